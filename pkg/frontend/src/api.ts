import type {
  GraphExportDoc,
  HealthDoc,
  ReviewItemDoc,
  SessionDoc,
} from './types';

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`gateway error ${status}: ${detail}`);
  }
}

/** Optimistic-concurrency loser: the item moved under us; reload required. */
export class ConflictError extends GatewayError {}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(resp: Response): Promise<GatewayError> {
  let detail = resp.statusText;
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return resp.status === 409
    ? new ConflictError(resp.status, detail)
    : new GatewayError(resp.status, detail);
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<HealthDoc> {
    return this.request<HealthDoc>('/healthz');
  }

  reviewQueue(): Promise<ReviewItemDoc[]> {
    return this.request<{ items: ReviewItemDoc[] }>('/review/queue').then((r) => r.items);
  }

  submitVerdict(
    itemId: string,
    verdict: 'approve' | 'reject',
    reviewer: string,
    expectedRevision: number,
    note?: string,
  ): Promise<ReviewItemDoc> {
    return this.post<ReviewItemDoc>(`/review/${itemId}/verdict`, {
      verdict,
      reviewer,
      expected_revision: expectedRevision,
      note: note ?? null,
    });
  }

  graphExport(): Promise<GraphExportDoc> {
    return this.request<GraphExportDoc>('/graph/export');
  }

  startSession(text: string): Promise<SessionDoc> {
    return this.post<SessionDoc>('/sessions', { text });
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return this.request<SessionDoc>(`/sessions/${sessionId}`);
  }

  answer(
    sessionId: string,
    symptomId: string,
    present: boolean,
    idempotencyKey: string,
  ): Promise<SessionDoc> {
    return this.post<SessionDoc>(`/sessions/${sessionId}/answer`, {
      symptom_id: symptomId,
      present,
      idempotency_key: idempotencyKey,
    });
  }
}
