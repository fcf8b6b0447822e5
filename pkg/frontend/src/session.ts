import { GatewayClient, GatewayError } from './api';
import type { SessionDoc } from './types';

/**
 * Dialog client. Every answer posts with a per-answer idempotency key, so
 * a retry after a network failure can never submit the same answer twice.
 * All numbers shown (confidences, rankings) come straight off SessionDoc.
 */
export class SessionController {
  doc: SessionDoc | null = null;
  busy = false;
  lastError: string | null = null;
  private answerSeq = 0;

  constructor(private readonly client: GatewayClient) {}

  get state(): string {
    return this.doc?.state ?? 'idle';
  }

  get pendingQuestion(): string | null {
    return this.doc?.pending_question ?? null;
  }

  async start(text: string): Promise<SessionDoc> {
    this.busy = true;
    try {
      this.doc = await this.client.startSession(text);
      this.answerSeq = 0;
      this.lastError = null;
      return this.doc;
    } finally {
      this.busy = false;
    }
  }

  async answer(present: boolean, retries = 1): Promise<SessionDoc> {
    if (!this.doc || !this.doc.pending_question) {
      throw new Error('no pending question to answer');
    }
    const sessionId = this.doc.session_id;
    const symptom = this.doc.pending_question;
    this.answerSeq += 1;
    const key = `${sessionId}:${symptom}:${this.answerSeq}`;
    this.busy = true;
    try {
      let attempt = 0;
      for (;;) {
        try {
          this.doc = await this.client.answer(sessionId, symptom, present, key);
          this.lastError = null;
          return this.doc;
        } catch (err) {
          if (err instanceof GatewayError || attempt >= retries) throw err;
          attempt += 1; // transport blip: retry with the SAME key
        }
      }
    } finally {
      this.busy = false;
    }
  }

  /** Run a whole scripted dialog: one boolean per clarifying question. */
  async runScript(text: string, replies: boolean[]): Promise<SessionDoc> {
    let doc = await this.start(text);
    for (const reply of replies) {
      if (doc.state !== 'clarifying' || !doc.pending_question) break;
      doc = await this.answer(reply);
    }
    return doc;
  }
}
