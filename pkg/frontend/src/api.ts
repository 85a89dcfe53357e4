import {
  ApiError,
  HintPayload,
  MediaStrip,
  ReviewTask,
  SubmitBody,
  parseHintPayload,
} from './types.js';

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public body: ApiError,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

async function fail(res: Response): Promise<never> {
  let body: ApiError;
  try {
    body = (await res.json()) as ApiError;
  } catch {
    body = { code: 'http_error', message: res.statusText };
  }
  throw new ApiRequestError(res.status, body);
}

/** Thin client over the review service; the console never touches the store directly. */
export class ApiClient {
  constructor(private baseUrl: string) {}

  async nextTask(rater: string, pool: string): Promise<ReviewTask | null> {
    const res = await fetch(
      `${this.baseUrl}/v1/tasks/next?rater=${encodeURIComponent(rater)}&pool=${encodeURIComponent(pool)}`,
    );
    if (!res.ok) await fail(res);
    const data = (await res.json()) as { task: ReviewTask | null };
    return data.task;
  }

  async hints(videoId: string, mode: string): Promise<HintPayload> {
    const res = await fetch(
      `${this.baseUrl}/v1/videos/${encodeURIComponent(videoId)}/hints?mode=${encodeURIComponent(mode)}`,
    );
    if (!res.ok) await fail(res);
    return parseHintPayload(await res.json());
  }

  async media(videoId: string): Promise<MediaStrip> {
    const res = await fetch(`${this.baseUrl}/v1/videos/${encodeURIComponent(videoId)}/media`);
    if (!res.ok) await fail(res);
    return (await res.json()) as MediaStrip;
  }

  async submit(taskId: string, body: SubmitBody): Promise<void> {
    const res = await fetch(`${this.baseUrl}/v1/tasks/${encodeURIComponent(taskId)}/submit`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!res.ok) await fail(res);
  }
}
