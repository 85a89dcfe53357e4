import { TimelineViewState } from './state.js';
import { MediaStrip, Verdict } from './types.js';

export interface TimelineCallbacks {
  onRespond(hintId: string, verdict: Verdict): void;
  onSeek(frame: number): void;
}

const POLICY_HUES = [210, 0, 120, 40, 280, 170, 320, 60];

function hueFor(policyId: string): number {
  let h = 0;
  for (let i = 0; i < policyId.length; i++) h = (h * 31 + policyId.charCodeAt(i)) | 0;
  return POLICY_HUES[Math.abs(h) % POLICY_HUES.length];
}

/**
 * Renders the review timeline: frame strip scrubber, V1 score line graphs
 * across the whole timeline, V2 hint chips in served (rank) order, drafts,
 * and the playhead. Pure view: every element mirrors the payload exactly.
 */
export class TimelineRenderer {
  constructor(
    private root: HTMLElement,
    private frameCount: number,
    private callbacks: TimelineCallbacks,
  ) {}

  private pct(frame: number): string {
    return `${(100 * frame) / Math.max(1, this.frameCount)}%`;
  }

  render(state: TimelineViewState, media: MediaStrip | null): void {
    const doc = this.root.ownerDocument;
    this.root.textContent = '';
    this.root.classList.add('timeline');
    this.root.dataset.videoId = state.task.video_id;
    this.root.dataset.locked = String(state.locked);

    this.root.appendChild(this.renderStrip(doc, media));
    this.root.appendChild(this.renderGraphs(doc, state));
    this.root.appendChild(this.renderChips(doc, state));
    this.root.appendChild(this.renderDrafts(doc, state));

    const playhead = doc.createElement('div');
    playhead.dataset.role = 'playhead';
    playhead.dataset.frame = String(state.playheadFrame);
    playhead.style.left = this.pct(state.playheadFrame);
    this.root.appendChild(playhead);
  }

  private renderStrip(doc: Document, media: MediaStrip | null): HTMLElement {
    const strip = doc.createElement('div');
    strip.dataset.role = 'strip';
    if (!media) return strip;
    for (let f = 0; f < media.strip.length; f++) {
      const cell = doc.createElement('div');
      cell.className = 'strip-cell';
      cell.dataset.frame = String(f);
      const v = media.strip[f];
      cell.style.backgroundColor = `rgb(${v},${v},${v})`;
      cell.style.left = this.pct(f);
      cell.addEventListener('click', () => this.callbacks.onSeek(f));
      strip.appendChild(cell);
    }
    return strip;
  }

  private renderGraphs(doc: Document, state: TimelineViewState): SVGElement {
    const svgNs = 'http://www.w3.org/2000/svg';
    const svg = doc.createElementNS(svgNs, 'svg');
    svg.setAttribute('data-role', 'graphs');
    svg.setAttribute('viewBox', `0 0 ${this.frameCount} 100`);
    svg.setAttribute('preserveAspectRatio', 'none');
    for (const graph of state.payload.v1) {
      const group = doc.createElementNS(svgNs, 'g');
      group.setAttribute('data-policy', graph.policy_id);
      const line = doc.createElementNS(svgNs, 'polyline');
      line.setAttribute(
        'points',
        graph.points.map(([f, s]) => `${f},${100 - 100 * s}`).join(' '),
      );
      line.setAttribute('stroke', `hsl(${hueFor(graph.policy_id)},70%,45%)`);
      line.setAttribute('fill', 'none');
      group.appendChild(line);

      // peak marker: click jumps the playhead to the strongest point
      if (graph.points.length > 0) {
        let peak = graph.points[0];
        for (const p of graph.points) if (p[1] > peak[1]) peak = p;
        const marker = doc.createElementNS(svgNs, 'circle');
        marker.setAttribute('data-role', 'peak');
        marker.setAttribute('data-frame', String(peak[0]));
        marker.setAttribute('cx', String(peak[0]));
        marker.setAttribute('cy', String(100 - 100 * peak[1]));
        marker.setAttribute('r', '3');
        marker.addEventListener('click', () => this.callbacks.onSeek(peak[0]));
        group.appendChild(marker);
      }
      svg.appendChild(group);
    }
    return svg as SVGElement;
  }

  private renderChips(doc: Document, state: TimelineViewState): HTMLElement {
    const chips = doc.createElement('div');
    chips.dataset.role = 'chips';
    for (const view of state.hints) {
      const h = view.segment;
      const chip = doc.createElement('div');
      chip.className = 'chip';
      chip.dataset.hintId = h.hint_id;
      chip.dataset.policy = h.policy_id;
      chip.dataset.rank = String(h.rank);
      chip.dataset.state = view.state;
      chip.dataset.startFrame = String(h.start_frame);
      chip.dataset.endFrame = String(h.end_frame);
      chip.style.left = this.pct(h.start_frame);
      chip.style.width = this.pct(h.end_frame - h.start_frame);
      chip.style.borderColor = `hsl(${hueFor(h.policy_id)},70%,45%)`;
      chip.addEventListener('click', () => this.callbacks.onSeek(h.start_frame));

      const label = doc.createElement('span');
      label.className = 'label';
      label.textContent = `#${h.rank} ${h.policy_id} (${h.max_score.toFixed(2)})`;
      chip.appendChild(label);

      if (view.state === 'pending' && !state.locked) {
        for (const verdict of ['accepted', 'rejected'] as Verdict[]) {
          const btn = doc.createElement('button');
          btn.dataset.action = verdict;
          btn.textContent = verdict === 'accepted' ? 'accept' : 'reject';
          btn.addEventListener('click', (ev) => {
            ev.stopPropagation();
            this.callbacks.onRespond(h.hint_id, verdict);
          });
          chip.appendChild(btn);
        }
      }
      chips.appendChild(chip);
    }
    return chips;
  }

  private renderDrafts(doc: Document, state: TimelineViewState): HTMLElement {
    const drafts = doc.createElement('div');
    drafts.dataset.role = 'drafts';
    state.drafts.forEach((d, i) => {
      const el = doc.createElement('div');
      el.className = 'draft';
      el.dataset.index = String(i);
      el.dataset.policy = d.policy_id;
      el.dataset.startFrame = String(d.start_frame);
      el.dataset.endFrame = String(d.end_frame);
      el.style.left = this.pct(d.start_frame);
      el.style.width = this.pct(d.end_frame - d.start_frame);
      el.textContent = `${d.policy_id} [${d.start_frame}, ${d.end_frame})`;
      drafts.appendChild(el);
    });
    return drafts;
  }
}
