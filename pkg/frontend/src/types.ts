/** Wire types for the review service /v1 API. */

export interface ReviewTask {
  task_id: string;
  video_id: string;
  rater_id: string;
  pool: string;
  assist_mode: 'none' | 'v1' | 'v1_v2';
  lease_expiry: number;
}

export interface LineGraph {
  video_id: string;
  policy_id: string;
  /** [frame, score] pairs ordered by frame, scores in [0, 1]. */
  points: [number, number][];
}

export interface HintSegmentPayload {
  hint_id: string;
  video_id: string;
  policy_id: string;
  start_frame: number;
  end_frame: number; // half-open
  max_score: number;
  rank: number;
}

export interface HintPayload {
  video_id: string;
  v1: LineGraph[];
  v2: HintSegmentPayload[];
}

export interface MediaStrip {
  video_id: string;
  frame_count: number;
  fps: number;
  strip: number[]; // one brightness byte per frame
}

export type Verdict = 'accepted' | 'rejected';
export type HintState = 'pending' | Verdict;

export interface AnnotationRecord {
  annotation_id: string;
  video_id: string;
  rater_id: string;
  policy_id: string;
  start_frame: number;
  end_frame: number;
  origin: 'organic' | 'from_accepted_hint';
  timestamp: number;
}

export interface HintResponseRecord {
  hint_id: string;
  rater_id: string;
  verdict: Verdict;
  timestamp: number;
}

export interface SubmitBody {
  decision: boolean;
  annotations: AnnotationRecord[];
  hint_responses: HintResponseRecord[];
}

export interface ApiError {
  code: string;
  message: string;
}

export class SchemaError extends Error {}

function isNumber(x: unknown): x is number {
  return typeof x === 'number' && Number.isFinite(x);
}

/** Validate a hint payload; a malformed payload must never reach the timeline. */
export function parseHintPayload(raw: unknown): HintPayload {
  const obj = raw as Record<string, unknown>;
  if (!obj || typeof obj.video_id !== 'string' || !Array.isArray(obj.v1) || !Array.isArray(obj.v2)) {
    throw new SchemaError('hint payload missing video_id/v1/v2');
  }
  for (const g of obj.v1 as LineGraph[]) {
    if (typeof g.policy_id !== 'string' || !Array.isArray(g.points)) {
      throw new SchemaError('malformed line graph entry');
    }
    for (const p of g.points) {
      if (!Array.isArray(p) || p.length !== 2 || !isNumber(p[0]) || !isNumber(p[1]) || p[1] < 0 || p[1] > 1) {
        throw new SchemaError(`malformed point in graph ${g.policy_id}`);
      }
    }
  }
  for (const h of obj.v2 as HintSegmentPayload[]) {
    if (
      typeof h.hint_id !== 'string' ||
      typeof h.policy_id !== 'string' ||
      !isNumber(h.start_frame) ||
      !isNumber(h.end_frame) ||
      h.end_frame <= h.start_frame ||
      !isNumber(h.rank)
    ) {
      throw new SchemaError('malformed hint segment entry');
    }
  }
  return obj as unknown as HintPayload;
}
