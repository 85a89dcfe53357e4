import { ApiClient } from './api.js';
import { RaterConsole } from './app.js';

/** Browser bootstrap: ?rater=<id>&pool=<expert|generalist>&api=<base>. */
function init(): void {
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(params.get('api') ?? '');
  const rater = params.get('rater') ?? 'anonymous';
  const pool = params.get('pool') ?? 'generalist';
  const root = document.getElementById('console');
  if (!root) throw new Error('missing #console element');
  const app = new RaterConsole(api, root, rater, pool);

  document.getElementById('next-task')?.addEventListener('click', () => {
    void app.loadNextTask();
  });
  document.getElementById('submit')?.addEventListener('click', () => {
    void app.submit();
  });
  document.getElementById('add-segment')?.addEventListener('click', () => {
    const policy = (document.getElementById('draw-policy') as HTMLInputElement).value;
    const start = Number((document.getElementById('draw-start') as HTMLInputElement).value);
    const end = Number((document.getElementById('draw-end') as HTMLInputElement).value);
    app.drawSegment(policy, start, end);
  });
  void app.loadNextTask();
}

init();
