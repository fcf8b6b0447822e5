import { GatewayClient } from './api';
import { ReviewQueueController } from './reviewQueue';
import { SessionController } from './session';
import { renderQueue, renderSession } from './ui/render';

const POLL_MS = Number(new URLSearchParams(location.search).get('poll') ?? 5000);

const client = new GatewayClient('');
const queue = new ReviewQueueController(client);
const session = new SessionController(client);

const root = document.getElementById('app')!;
let view: 'queue' | 'session' = 'queue';

function draw(): void {
  const nav = `
    <nav>
      <button data-view="queue" ${view === 'queue' ? 'class="active"' : ''}>review queue</button>
      <button data-view="session" ${view === 'session' ? 'class="active"' : ''}>diagnostic session</button>
    </nav>`;
  root.innerHTML = nav + (view === 'queue' ? renderQueue(queue) : renderSession(session));
}

root.addEventListener('click', (event) => {
  const target = event.target as HTMLElement;
  const viewName = target.dataset.view as 'queue' | 'session' | undefined;
  if (viewName) {
    view = viewName;
    draw();
    return;
  }
  if (target.dataset.action === 'reload') {
    void queue.refresh().then(draw);
    return;
  }
  const verdict = target.dataset.verdict as 'approve' | 'reject' | undefined;
  if (verdict && target.dataset.item) {
    const item = queue.items.find((i) => i.item_id === target.dataset.item);
    if (item) void queue.decide(item, verdict).then(draw);
    return;
  }
  if (target.closest('.queue-item') && !verdict) {
    queue.select((target.closest('.queue-item') as HTMLElement).dataset.item!);
    draw();
    return;
  }
  const reply = target.dataset.reply;
  if (reply) {
    void session.answer(reply === 'yes').then(draw);
  }
});

root.addEventListener('submit', (event) => {
  const form = event.target as HTMLFormElement;
  if (form.id === 'intake') {
    event.preventDefault();
    const text = (form.elements.namedItem('text') as HTMLInputElement).value;
    if (text.trim()) void session.start(text).then(draw);
  }
});

setInterval(() => {
  if (view === 'queue') void queue.refresh().then(draw);
}, POLL_MS);

void queue.refresh().then(draw);
