import { describe, expect, it } from 'vitest';

import { ConflictError, GatewayClient, GatewayError, type FetchLike } from '../src/api';
import { ReviewQueueController } from '../src/reviewQueue';
import { SessionController } from '../src/session';
import type { ReviewItemDoc, SessionDoc } from '../src/types';

type Script = (input: string, init?: RequestInit) => { status: number; body: unknown } | 'network';

function fakeFetch(script: Script): { fetch: FetchLike; calls: { url: string; body: unknown }[] } {
  const calls: { url: string; body: unknown }[] = [];
  const impl: FetchLike = async (input, init) => {
    const body = init?.body ? JSON.parse(init.body as string) : null;
    calls.push({ url: input, body });
    const result = script(input, init);
    if (result === 'network') throw new TypeError('fetch failed');
    return new Response(JSON.stringify(result.body), { status: result.status });
  };
  return { fetch: impl, calls };
}

function pendingItem(id: string, revision = 0): ReviewItemDoc {
  return {
    item_id: id,
    relation_id: `rel-${id}`,
    proposed_by: 'augmenter',
    state: 'pending',
    reviewer: null,
    verdict_note: null,
    revision,
    triple: {
      id: `rel-${id}`,
      subject: 'obesity',
      predicate: 'comorbid-with',
      object: 'gout',
      provenance: 'augmenter',
      status: 'pending-review',
      'source-chunk': null,
    },
    source_chunk_text: null,
  };
}

function sessionDoc(partial: Partial<SessionDoc>): SessionDoc {
  return {
    session_id: 's-1',
    state: 'clarifying',
    symptom_ids: ['a'],
    asked_symptoms: [],
    pending_question: 'b',
    questions_left: 3,
    gp_ranking: [{ diagnosis_id: 'd1', confidence: 0.5 }],
    transcript: [],
    outcome: null,
    ...partial,
  };
}

describe('review queue controller', () => {
  it('removes an item locally after a successful verdict (no refresh)', async () => {
    const { fetch, calls } = fakeFetch((url) => {
      if (url.endsWith('/verdict')) {
        return { status: 200, body: { ...pendingItem('item-1', 1), state: 'approved' } };
      }
      return { status: 200, body: { status: 'ok', graph_version: 7 } };
    });
    const queue = new ReviewQueueController(new GatewayClient('', fetch), 'dr-ui');
    queue.items = [pendingItem('item-1'), pendingItem('item-2')];
    const ok = await queue.decide(queue.items[0]!, 'approve');
    expect(ok).toBe(true);
    expect(queue.items.map((i) => i.item_id)).toEqual(['item-2']);
    expect(queue.graphVersion).toBe(7);
    const verdictCall = calls.find((c) => c.url.includes('/verdict'));
    expect(verdictCall?.body).toMatchObject({
      verdict: 'approve',
      reviewer: 'dr-ui',
      expected_revision: 0,
    });
  });

  it('surfaces 409 as a reload prompt without mutating local state', async () => {
    const { fetch } = fakeFetch(() => ({
      status: 409,
      body: { error: 'RevisionConflict', detail: 'stale' },
    }));
    const queue = new ReviewQueueController(new GatewayClient('', fetch));
    queue.items = [pendingItem('item-1')];
    const ok = await queue.decide(queue.items[0]!, 'reject');
    expect(ok).toBe(false);
    expect(queue.conflict).toContain('item-1');
    expect(queue.items).toHaveLength(1);
    expect(queue.items[0]!.state).toBe('pending');
  });

  it('never decides a non-pending item', async () => {
    const { fetch, calls } = fakeFetch(() => ({ status: 200, body: {} }));
    const queue = new ReviewQueueController(new GatewayClient('', fetch));
    const decided = { ...pendingItem('item-1'), state: 'approved' as const };
    expect(queue.canDecide(decided)).toBe(false);
    expect(await queue.decide(decided, 'approve')).toBe(false);
    expect(calls).toHaveLength(0);
  });

  it('filters by provenance and predicate', () => {
    const queue = new ReviewQueueController(new GatewayClient(''));
    const other = pendingItem('item-2');
    other.proposed_by = 'lexicon-extractor';
    queue.items = [pendingItem('item-1'), other];
    queue.filters.provenance = 'augmenter';
    expect(queue.visibleItems().map((i) => i.item_id)).toEqual(['item-1']);
  });
});

describe('session controller', () => {
  it('retries a network failure with the same idempotency key', async () => {
    let first = true;
    const { fetch, calls } = fakeFetch((url) => {
      if (url.endsWith('/answer')) {
        if (first) {
          first = false;
          return 'network';
        }
        return { status: 200, body: sessionDoc({ state: 'decided', pending_question: null }) };
      }
      return { status: 200, body: sessionDoc({}) };
    });
    const session = new SessionController(new GatewayClient('', fetch));
    await session.start('a');
    await session.answer(true);
    const answerCalls = calls.filter((c) => c.url.endsWith('/answer'));
    expect(answerCalls).toHaveLength(2);
    const keys = answerCalls.map((c) => (c.body as { idempotency_key: string }).idempotency_key);
    expect(keys[0]).toBe(keys[1]); // same answer, same key: no duplicate submission
  });

  it('does not retry on gateway contract errors', async () => {
    const { fetch, calls } = fakeFetch((url) => {
      if (url.endsWith('/answer')) {
        return { status: 409, body: { detail: 'wrong state' } };
      }
      return { status: 200, body: sessionDoc({}) };
    });
    const session = new SessionController(new GatewayClient('', fetch));
    await session.start('a');
    await expect(session.answer(true)).rejects.toBeInstanceOf(GatewayError);
    expect(calls.filter((c) => c.url.endsWith('/answer'))).toHaveLength(1);
  });

  it('renders API numbers untouched', async () => {
    const doc = sessionDoc({
      gp_ranking: [{ diagnosis_id: 'd1', confidence: 0.6666666666666666 }],
    });
    const { fetch } = fakeFetch(() => ({ status: 200, body: doc }));
    const session = new SessionController(new GatewayClient('', fetch));
    await session.start('a');
    expect(session.doc?.gp_ranking[0]?.confidence).toBe(0.6666666666666666);
  });
});

describe('gateway client errors', () => {
  it('maps 409 to ConflictError and others to GatewayError', async () => {
    const conflict = new GatewayClient('', async () =>
      new Response(JSON.stringify({ detail: 'stale' }), { status: 409 }));
    await expect(conflict.health()).rejects.toBeInstanceOf(ConflictError);
    const missing = new GatewayClient('', async () =>
      new Response(JSON.stringify({ detail: 'nope' }), { status: 404 }));
    await expect(missing.health()).rejects.toBeInstanceOf(GatewayError);
  });
});
