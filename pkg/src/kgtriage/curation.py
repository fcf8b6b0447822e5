"""Expert review workflow over pending relations.

A FIFO queue of review items wraps graph triples awaiting a verdict.
Verdicts are terminal, guarded by optimistic revision tokens so two
reviewers cannot silently overwrite each other, and every action lands in
an append-only event log. The log is the source of truth: deltas of newly
approved knowledge are cut from it, and replaying it reconstructs queue
state after a restart.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

from .errors import (
    AlreadyDecided,
    RevisionConflict,
    UnknownReviewItem,
)
from .graph import KnowledgeGraph, Provenance, RelationTriple, Status


class ItemState(str, Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"


class Verdict(str, Enum):
    APPROVE = "approve"
    REJECT = "reject"


class DeltaSource(str, Enum):
    EXPERT_REVIEW = "expert-review"
    CONSULTANT_FEEDBACK = "consultant-feedback"


@dataclass
class ReviewItem:
    item_id: str
    relation_id: str
    proposed_by: Provenance
    state: ItemState = ItemState.PENDING
    reviewer: str | None = None
    verdict_note: str | None = None
    revision: int = 0

    def to_doc(self, triple: RelationTriple | None = None) -> dict:
        doc = {
            "item_id": self.item_id,
            "relation_id": self.relation_id,
            "proposed_by": self.proposed_by.value,
            "state": self.state.value,
            "reviewer": self.reviewer,
            "verdict_note": self.verdict_note,
            "revision": self.revision,
        }
        if triple is not None:
            doc["triple"] = triple.to_doc()
        return doc


@dataclass
class KnowledgeDelta:
    delta_id: str
    approved_triples: list[RelationTriple]
    source: DeltaSource = DeltaSource.EXPERT_REVIEW
    created_at: float = 0.0
    cursor: int = 0

    @property
    def empty(self) -> bool:
        return not self.approved_triples


@dataclass
class _Event:
    seq: int
    ts: float
    item_id: str
    actor: str
    action: str
    triple: dict


class ReviewQueue:
    """Review workflow bound to one knowledge graph.

    Enqueuing an extracted triple moves it to pending-review (it leaves the
    trusted scoring set until decided). Approve/reject write the verdict
    through to the triple's status before the event is logged, so a replay
    can always catch the graph up to the log.
    """

    def __init__(
        self,
        graph: KnowledgeGraph,
        log_path: str | Path | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.graph = graph
        self.items: dict[str, ReviewItem] = {}
        self._by_relation: dict[str, str] = {}
        self._order: list[str] = []
        self._events: list[_Event] = []
        self._next_item = 1
        self._next_delta = 1
        self._delta_cursor = 0
        self._clock = clock
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        if self._log_path:
            self._log_path.parent.mkdir(parents=True, exist_ok=True)

    # -- queue ----------------------------------------------------------------

    def enqueue(self, triples: Iterable[RelationTriple]) -> list[ReviewItem]:
        """Queue triples for review, FIFO, skipping ones already queued.

        Triples already decided (or already holding an item) are silently
        skipped; a re-extraction of rejected knowledge arrives as a fresh
        triple with its own id, so it queues normally.
        """
        created: list[ReviewItem] = []
        with self._lock:
            for triple in triples:
                if triple.id in self._by_relation:
                    continue
                if triple.status not in (Status.EXTRACTED, Status.PENDING_REVIEW):
                    continue
                if triple.status is Status.EXTRACTED:
                    self.graph.set_status(triple.id, Status.PENDING_REVIEW)
                item = ReviewItem(
                    item_id=f"item-{self._next_item:06d}",
                    relation_id=triple.id,
                    proposed_by=triple.provenance,
                )
                self._next_item += 1
                self.items[item.item_id] = item
                self._by_relation[triple.id] = item.item_id
                self._order.append(item.item_id)
                self._record(item.item_id, "system", "enqueue", triple.to_doc())
                created.append(item)
        return created

    def pending(self) -> list[ReviewItem]:
        """Pending items in FIFO order."""
        with self._lock:
            return [
                self.items[item_id]
                for item_id in self._order
                if self.items[item_id].state is ItemState.PENDING
            ]

    def get(self, item_id: str) -> ReviewItem:
        item = self.items.get(item_id)
        if item is None:
            raise UnknownReviewItem(f"unknown review item {item_id!r}")
        return item

    def triple_of(self, item: ReviewItem) -> RelationTriple:
        return self.graph.relations[item.relation_id]

    # -- verdicts ---------------------------------------------------------------

    def review(
        self,
        item_id: str,
        verdict: Verdict,
        reviewer: str,
        expected_revision: int,
        note: str | None = None,
    ) -> ReviewItem:
        """Apply a verdict under optimistic concurrency.

        The losing writer of a race sees RevisionConflict; a verdict on a
        decided item raises AlreadyDecided.
        """
        with self._lock:
            item = self.get(item_id)
            if item.state is not ItemState.PENDING:
                raise AlreadyDecided(f"item {item_id} already {item.state.value}")
            if item.revision != expected_revision:
                raise RevisionConflict(
                    f"item {item_id} is at revision {item.revision}, "
                    f"caller expected {expected_revision}"
                )
            status = Status.APPROVED if verdict is Verdict.APPROVE else Status.REJECTED
            triple = self.graph.set_status(item.relation_id, status)
            item.state = ItemState.APPROVED if verdict is Verdict.APPROVE else ItemState.REJECTED
            item.reviewer = reviewer
            item.verdict_note = note
            item.revision += 1
            self._record(item_id, reviewer, verdict.value, triple.to_doc())
            return item

    # -- deltas -----------------------------------------------------------------

    def build_delta(self, source: DeltaSource = DeltaSource.EXPERT_REVIEW) -> KnowledgeDelta:
        """Cut the batch of approvals since the previous delta.

        Successive deltas partition the approval history: every approved
        triple lands in exactly one delta. A delta with no approvals is a
        recorded no-op. The cut point itself is logged, so the partition
        survives a restart.
        """
        with self._lock:
            picked = [
                RelationTriple.from_doc(event.triple)
                for event in self._events
                if event.seq > self._delta_cursor and event.action == Verdict.APPROVE.value
            ]
            delta_id = f"delta-{self._next_delta:06d}"
            self._next_delta += 1
            marker = self._record(delta_id, "system", "delta", {})
            self._delta_cursor = marker.seq
            return KnowledgeDelta(
                delta_id=delta_id,
                approved_triples=picked,
                source=source,
                created_at=marker.ts,
                cursor=marker.seq,
            )

    def apply(self, delta: KnowledgeDelta, graph: KnowledgeGraph | None = None) -> KnowledgeGraph:
        """Expand a graph with a delta's approved triples (idempotent)."""
        target = graph if graph is not None else self.graph
        target.expand((), delta.approved_triples)
        return target

    # -- event log ----------------------------------------------------------------

    def _record(self, item_id: str, actor: str, action: str, triple_doc: dict) -> _Event:
        event = _Event(
            seq=len(self._events) + 1,
            ts=self._clock(),
            item_id=item_id,
            actor=actor,
            action=action,
            triple=triple_doc,
        )
        self._events.append(event)
        if self._log_path:
            record = {
                "ts": event.ts,
                "item_id": event.item_id,
                "actor": event.actor,
                "action": event.action,
                "triple": event.triple,
            }
            with self._log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        return event

    @property
    def events(self) -> list[dict]:
        """Event log as plain records (oldest first)."""
        return [
            {
                "seq": e.seq,
                "ts": e.ts,
                "item_id": e.item_id,
                "actor": e.actor,
                "action": e.action,
                "triple": dict(e.triple),
            }
            for e in self._events
        ]

    @classmethod
    def replay(
        cls,
        graph: KnowledgeGraph,
        log_path: str | Path,
        clock: Callable[[], float] = time.time,
    ) -> "ReviewQueue":
        """Rebuild queue state from the event log.

        Graph status writes are reapplied only when the graph does not
        already reflect them, so replaying over an up-to-date snapshot is a
        no-op and replaying over a stale one catches it up.
        """
        queue = cls(graph, log_path=None, clock=clock)
        path = Path(log_path)
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                record = json.loads(line)
                queue._replay_event(record)
        queue._log_path = path
        path.parent.mkdir(parents=True, exist_ok=True)
        return queue

    def _replay_event(self, record: dict) -> None:
        action = record["action"]
        item_id = record["item_id"]
        triple_doc = record.get("triple") or {}
        relation_id = triple_doc.get("id", "")
        event = _Event(
            seq=len(self._events) + 1,
            ts=record.get("ts", 0.0),
            item_id=item_id,
            actor=record.get("actor", "system"),
            action=action,
            triple=triple_doc,
        )
        self._events.append(event)
        if action == "enqueue":
            item = ReviewItem(
                item_id=item_id,
                relation_id=relation_id,
                proposed_by=Provenance(triple_doc["provenance"]),
            )
            self.items[item_id] = item
            self._by_relation[relation_id] = item_id
            self._order.append(item_id)
            seq = int(item_id.rsplit("-", 1)[-1])
            self._next_item = max(self._next_item, seq + 1)
            current = self.graph.relations.get(relation_id)
            if current is not None and current.status is Status.EXTRACTED:
                self.graph.set_status(relation_id, Status.PENDING_REVIEW)
        elif action in (Verdict.APPROVE.value, Verdict.REJECT.value):
            item = self.items.get(item_id)
            if item is None:
                return
            wanted = Status.APPROVED if action == Verdict.APPROVE.value else Status.REJECTED
            item.state = ItemState.APPROVED if action == Verdict.APPROVE.value else ItemState.REJECTED
            item.reviewer = record.get("actor")
            item.revision += 1
            current = self.graph.relations.get(relation_id)
            if current is not None and current.status is not wanted:
                self.graph.set_status(relation_id, wanted)
        elif action == "delta":
            self._delta_cursor = event.seq
            try:
                seq = int(item_id.rsplit("-", 1)[-1])
                self._next_delta = max(self._next_delta, seq + 1)
            except ValueError:
                pass
