import { ConflictError, GatewayClient } from './api';
import type { ReviewItemDoc } from './types';

export interface QueueFilters {
  provenance: string | null;
  predicate: string | null;
}

/**
 * Review-queue state. Verdicts carry the item's revision token; a 409
 * flips `conflict` so the UI can prompt a reload without mutating local
 * state, and a success removes the item locally without a full refresh.
 */
export class ReviewQueueController {
  items: ReviewItemDoc[] = [];
  selected: ReviewItemDoc | null = null;
  filters: QueueFilters = { provenance: null, predicate: null };
  graphVersion = 0;
  conflict: string | null = null;
  lastError: string | null = null;
  decisions: { item_id: string; verdict: string; triple_key: string }[] = [];

  constructor(
    private readonly client: GatewayClient,
    public reviewer: string = 'console-reviewer',
  ) {}

  async refresh(): Promise<void> {
    this.items = await this.client.reviewQueue();
    const health = await this.client.health();
    this.graphVersion = health.graph_version;
    if (this.selected) {
      this.selected =
        this.items.find((i) => i.item_id === this.selected?.item_id) ?? null;
    }
  }

  visibleItems(): ReviewItemDoc[] {
    return this.items.filter(
      (item) =>
        (!this.filters.provenance || item.proposed_by === this.filters.provenance) &&
        (!this.filters.predicate || item.triple.predicate === this.filters.predicate),
    );
  }

  select(itemId: string): void {
    this.selected = this.items.find((i) => i.item_id === itemId) ?? null;
  }

  canDecide(item: ReviewItemDoc): boolean {
    return item.state === 'pending';
  }

  async decide(item: ReviewItemDoc, verdict: 'approve' | 'reject'): Promise<boolean> {
    if (!this.canDecide(item)) return false;
    try {
      const updated = await this.client.submitVerdict(
        item.item_id,
        verdict,
        this.reviewer,
        item.revision,
      );
      // drop from the pending list in place; no full refresh needed
      this.items = this.items.filter((i) => i.item_id !== item.item_id);
      if (this.selected?.item_id === item.item_id) this.selected = null;
      this.decisions.push({
        item_id: updated.item_id,
        verdict,
        triple_key: `${updated.triple.subject} ${updated.triple.predicate} ${updated.triple.object}`,
      });
      const health = await this.client.health();
      this.graphVersion = health.graph_version;
      this.conflict = null;
      return true;
    } catch (err) {
      if (err instanceof ConflictError) {
        this.conflict = `${item.item_id} changed under you; reload the queue`;
        return false;
      }
      this.lastError = err instanceof Error ? err.message : String(err);
      throw err;
    }
  }
}
