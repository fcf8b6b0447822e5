// String-template rendering: pure functions from state to HTML, kept free
// of any arithmetic on API values.

import type { ReviewQueueController } from '../reviewQueue';
import type { SessionController } from '../session';
import type { OutcomeDoc, ReviewItemDoc, ScoredDoc } from '../types';

const esc = (value: unknown): string =>
  String(value).replace(/[&<>"']/g, (ch) =>
    ({ '&': '&amp;', '<': '&lt;', '>': '&gt;', '"': '&quot;', "'": '&#39;' })[ch]!,
  );

function tripleLine(item: ReviewItemDoc): string {
  const t = item.triple;
  return `${esc(t.subject)} —${esc(t.predicate)}→ ${esc(t.object)}`;
}

export function renderQueue(queue: ReviewQueueController): string {
  const rows = queue
    .visibleItems()
    .map(
      (item) => `
      <li class="queue-item" data-item="${esc(item.item_id)}">
        <span class="triple">${tripleLine(item)}</span>
        <span class="meta">${esc(item.proposed_by)} · rev ${item.revision}</span>
        <span class="actions">
          <button data-verdict="approve" data-item="${esc(item.item_id)}"
                  ${queue.canDecide(item) ? '' : 'disabled'}>approve</button>
          <button data-verdict="reject" data-item="${esc(item.item_id)}"
                  ${queue.canDecide(item) ? '' : 'disabled'}>reject</button>
        </span>
      </li>`,
    )
    .join('');
  const detail = queue.selected
    ? `<h3>${tripleLine(queue.selected)}</h3>
       <pre class="chunk">${esc(queue.selected.source_chunk_text ?? '(no source chunk)')}</pre>`
    : '<p class="hint">select an item to see its source text</p>';
  const feed = queue.decisions
    .slice(-8)
    .map((d) => `<li>${esc(d.verdict)}: ${esc(d.triple_key)}</li>`)
    .join('');
  return `
    ${queue.conflict ? `<div class="banner conflict">${esc(queue.conflict)} <button data-action="reload">reload</button></div>` : ''}
    <div class="two-pane">
      <section class="pane">
        <h2>pending review (${queue.visibleItems().length})</h2>
        <ul class="queue">${rows || '<li class="hint">queue empty</li>'}</ul>
      </section>
      <section class="pane">
        ${detail}
        <h3>graph version: <span id="graph-version">${queue.graphVersion}</span></h3>
        <ul class="feed">${feed}</ul>
      </section>
    </div>`;
}

function rankingRows(ranking: ScoredDoc[], tau: number): string {
  return ranking
    .map(
      (row) => `
      <tr class="${row.confidence >= tau ? 'above-tau' : ''}">
        <td>${esc(row.diagnosis_id)}</td>
        <td class="num">${row.confidence}</td>
      </tr>`,
    )
    .join('');
}

function outcomeCard(outcome: OutcomeDoc): string {
  const referral = outcome.decision.referral
    ? `<div class="banner referral">referred (${esc(outcome.decision.reason)}) →
         ${outcome.decision.target_specialties.map(esc).join(', ')}</div>`
    : '';
  return `
    ${referral}
    <div class="outcome card">
      <h3>${esc(outcome.kind)}</h3>
      <p><strong>${esc(outcome.final.diagnosis_id)}</strong>
         at confidence <strong>${outcome.final.confidence}</strong>
         ${outcome.flags.map((f) => `<em class="flag">${esc(f)}</em>`).join(' ')}</p>
      <ol class="trace">${outcome.trace.map((line) => `<li>${esc(line)}</li>`).join('')}</ol>
    </div>`;
}

export function renderSession(session: SessionController, tau = 0.7): string {
  const doc = session.doc;
  if (!doc) {
    return `
      <form id="intake">
        <input name="text" placeholder="describe the symptoms" autofocus />
        <button type="submit">start</button>
      </form>`;
  }
  const transcript = doc.transcript
    .map((t) => `<li class="turn ${esc(t.speaker)}"><b>${esc(t.speaker)}:</b> ${esc(t.text)}</li>`)
    .join('');
  const question =
    doc.state === 'clarifying' && doc.pending_question
      ? `<div class="question">
           <span>${esc(doc.pending_question)}?</span>
           <button data-reply="yes" ${session.busy ? 'disabled' : ''}>yes</button>
           <button data-reply="no" ${session.busy ? 'disabled' : ''}>no</button>
         </div>`
      : '';
  return `
    <div class="chat">
      <ul class="transcript">${transcript}</ul>
      ${question}
      <table class="ranking">
        <caption>candidates (τ = ${tau})</caption>
        ${rankingRows(doc.gp_ranking, tau)}
      </table>
      ${doc.outcome ? outcomeCard(doc.outcome) : ''}
    </div>`;
}
