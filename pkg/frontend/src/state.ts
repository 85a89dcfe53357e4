import {
  AnnotationRecord,
  HintPayload,
  HintResponseRecord,
  HintSegmentPayload,
  HintState,
  ReviewTask,
  SubmitBody,
  Verdict,
} from './types.js';

export interface DraftSegment {
  policy_id: string;
  start_frame: number;
  end_frame: number;
}

export interface HintView {
  segment: HintSegmentPayload;
  state: HintState;
}

/**
 * Client-side review state. Hints arrive from the served payload and are never
 * invented, dropped, reordered, or re-scored; each moves pending -> verdict at
 * most once. Drafts are rater-drawn organic segments.
 */
export class TimelineViewState {
  readonly task: ReviewTask;
  readonly payload: HintPayload;
  readonly hints: HintView[];
  readonly drafts: DraftSegment[] = [];
  playheadFrame = 0;
  locked = false;
  private responseOrder: string[] = [];

  constructor(task: ReviewTask, payload: HintPayload) {
    this.task = task;
    this.payload = payload;
    // served order is rank order; keep it exactly
    this.hints = payload.v2.map((segment) => ({ segment, state: 'pending' as HintState }));
  }

  seek(frame: number): void {
    this.playheadFrame = frame;
  }

  hint(hintId: string): HintView {
    const view = this.hints.find((h) => h.segment.hint_id === hintId);
    if (!view) throw new Error(`unknown hint ${hintId}`);
    return view;
  }

  respondToHint(hintId: string, verdict: Verdict): void {
    if (this.locked) throw new Error('view is locked after submit');
    const view = this.hint(hintId);
    if (view.state !== 'pending') {
      throw new Error(`hint ${hintId} already ${view.state}`);
    }
    view.state = verdict;
    this.responseOrder.push(hintId);
  }

  drawSegment(policyId: string, startFrame: number, endFrame: number): DraftSegment {
    if (this.locked) throw new Error('view is locked after submit');
    if (!(startFrame >= 0 && endFrame > startFrame)) {
      throw new Error(`bad segment [${startFrame}, ${endFrame})`);
    }
    const draft = { policy_id: policyId, start_frame: startFrame, end_frame: endFrame };
    this.drafts.push(draft);
    return draft;
  }

  removeDraft(index: number): void {
    if (this.locked) throw new Error('view is locked after submit');
    this.drafts.splice(index, 1);
  }

  pendingCount(): number {
    return this.hints.filter((h) => h.state === 'pending').length;
  }

  /** Accepted hints become annotations, drafts are organic; decision follows. */
  buildSubmission(now: () => number = Date.now): SubmitBody {
    const raterId = this.task.rater_id;
    const videoId = this.task.video_id;
    const annotations: AnnotationRecord[] = [];
    const responses: HintResponseRecord[] = [];
    for (const hintId of this.responseOrder) {
      const view = this.hint(hintId);
      responses.push({
        hint_id: hintId,
        rater_id: raterId,
        verdict: view.state as Verdict,
        timestamp: now() / 1000,
      });
      if (view.state === 'accepted') {
        annotations.push({
          annotation_id: `${videoId}:${raterId}:${hintId}`,
          video_id: videoId,
          rater_id: raterId,
          policy_id: view.segment.policy_id,
          start_frame: view.segment.start_frame,
          end_frame: view.segment.end_frame,
          origin: 'from_accepted_hint',
          timestamp: now() / 1000,
        });
      }
    }
    this.drafts.forEach((d, i) => {
      annotations.push({
        annotation_id: `${videoId}:${raterId}:draw${i}:${d.start_frame}:${d.end_frame}`,
        video_id: videoId,
        rater_id: raterId,
        policy_id: d.policy_id,
        start_frame: d.start_frame,
        end_frame: d.end_frame,
        origin: 'organic',
        timestamp: now() / 1000,
      });
    });
    return { decision: annotations.length > 0, annotations, hint_responses: responses };
  }

  lock(): void {
    this.locked = true;
  }
}
