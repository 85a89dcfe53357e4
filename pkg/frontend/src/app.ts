import { ApiClient, ApiRequestError } from './api.js';
import { TimelineViewState } from './state.js';
import { TimelineRenderer } from './timeline.js';
import { HintPayload, MediaStrip, ReviewTask, SchemaError, Verdict } from './types.js';

/**
 * The rater console: fetches a task and its hints, renders the timeline, and
 * carries local interactions until submit. The server stays the source of
 * truth; on lease expiry the submission is blocked with a re-lease prompt.
 */
export class RaterConsole {
  state: TimelineViewState | null = null;
  media: MediaStrip | null = null;
  private renderer: TimelineRenderer | null = null;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
    private raterId: string,
    private pool: string = 'generalist',
  ) {}

  private el(role: string): HTMLElement {
    let node = this.root.querySelector<HTMLElement>(`[data-role="${role}"]`);
    if (!node) {
      node = this.root.ownerDocument.createElement('div');
      node.dataset.role = role;
      this.root.appendChild(node);
    }
    return node;
  }

  banner(text: string | null, kind = 'error'): void {
    const banner = this.el('banner');
    banner.dataset.kind = kind;
    banner.textContent = text ?? '';
    banner.toggleAttribute('hidden', text === null);
  }

  async loadNextTask(): Promise<ReviewTask | null> {
    this.banner(null);
    const task = await this.api.nextTask(this.raterId, this.pool);
    if (!task) {
      this.banner('No tasks available.', 'info');
      return null;
    }
    let payload: HintPayload = { video_id: task.video_id, v1: [], v2: [] };
    try {
      payload = await this.api.hints(task.video_id, task.assist_mode);
    } catch (e) {
      if (e instanceof SchemaError) {
        // review must stay possible without hints
        this.banner(`Hint payload rejected: ${e.message}. Reviewing without hints.`);
      } else {
        throw e;
      }
    }
    this.media = await this.api.media(task.video_id);
    this.state = new TimelineViewState(task, payload);
    this.renderer = new TimelineRenderer(this.el('timeline'), this.media.frame_count, {
      onRespond: (hintId, verdict) => this.respondToHint(hintId, verdict),
      onSeek: (frame) => this.seek(frame),
    });
    this.rerender();
    return task;
  }

  private rerender(): void {
    if (this.state && this.renderer) this.renderer.render(this.state, this.media);
  }

  seek(frame: number): void {
    if (!this.state) return;
    this.state.seek(frame);
    this.rerender();
  }

  respondToHint(hintId: string, verdict: Verdict): void {
    if (!this.state) throw new Error('no active task');
    this.state.respondToHint(hintId, verdict);
    this.rerender();
  }

  drawSegment(policyId: string, startFrame: number, endFrame: number): void {
    if (!this.state) throw new Error('no active task');
    this.state.drawSegment(policyId, startFrame, endFrame);
    this.rerender();
  }

  /** Sends decision + annotations + responses atomically, then locks the view. */
  async submit(): Promise<boolean> {
    if (!this.state) throw new Error('no active task');
    const body = this.state.buildSubmission();
    try {
      await this.api.submit(this.state.task.task_id, body);
    } catch (e) {
      if (e instanceof ApiRequestError && e.body.code === 'lease_expired') {
        this.banner('Lease expired: request a new task to continue.', 'release');
        return false;
      }
      throw e;
    }
    this.state.lock();
    this.rerender();
    this.banner('Review submitted.', 'info');
    return true;
  }
}
