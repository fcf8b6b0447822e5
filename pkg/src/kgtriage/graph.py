"""Property-graph store for medical knowledge.

Entities are nodes keyed by a canonical id derived from their label;
relations are directed, provenance-tagged triples with a review status.
Rejected relations are kept as tombstones so a re-extraction of the same
triple can be told apart from novel knowledge. All mutations are serialized
per graph instance; readers work on value snapshots.
"""

from __future__ import annotations

import copy
import json
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from .errors import (
    DanglingEndpoint,
    EmptyLabel,
    IntegrityViolation,
    InvalidStatusTransition,
    SchemaViolation,
    SelfLoop,
    UnapprovedInput,
    UnknownEntity,
    UnknownPredicate,
)


class Category(str, Enum):
    DISEASE = "disease"
    SYMPTOM = "symptom"
    DRUG = "drug"
    PROCEDURE = "procedure"
    RISK_FACTOR = "risk-factor"
    CATEGORY = "category"
    OTHER = "other"


class Specialty(str, Enum):
    GENERAL = "general"
    CARDIOLOGY = "cardiology"
    NEUROLOGY = "neurology"
    ENDOCRINOLOGY = "endocrinology"
    RHEUMATOLOGY = "rheumatology"


#: Consultant-tier domains, i.e. every specialty except general practice.
CONSULTANT_SPECIALTIES: tuple[Specialty, ...] = (
    Specialty.CARDIOLOGY,
    Specialty.NEUROLOGY,
    Specialty.ENDOCRINOLOGY,
    Specialty.RHEUMATOLOGY,
)


class Provenance(str, Enum):
    LEXICON_EXTRACTOR = "lexicon-extractor"
    AUGMENTER = "augmenter"
    EXPERT = "expert"
    SEED = "seed"


class Status(str, Enum):
    EXTRACTED = "extracted"
    PENDING_REVIEW = "pending-review"
    APPROVED = "approved"
    REJECTED = "rejected"


#: Statuses whose edges count as diagnostic knowledge. Pending-review edges
#: (unverified augmenter output) are quarantined until an expert approves.
SCORING_STATUSES: frozenset[Status] = frozenset({Status.EXTRACTED, Status.APPROVED})

#: Statuses that participate in duplicate detection (everything not rejected).
LIVE_STATUSES: frozenset[Status] = frozenset(
    {Status.EXTRACTED, Status.PENDING_REVIEW, Status.APPROVED}
)

_ALLOWED_TRANSITIONS: dict[Status, frozenset[Status]] = {
    Status.EXTRACTED: frozenset({Status.PENDING_REVIEW}),
    Status.PENDING_REVIEW: frozenset({Status.APPROVED, Status.REJECTED}),
    Status.APPROVED: frozenset(),
    Status.REJECTED: frozenset(),
}

KNOWN_PREDICATES: frozenset[str] = frozenset(
    {
        "has-symptom",
        "treats",
        "causes",
        "comorbid-with",
        "reduces-risk-of",
        "belongs-to",
        "contraindicated-with",
    }
)

_OTHER_PREFIX = "other:"

_PUNCT_RE = re.compile(r"[^\w\s-]+", re.UNICODE)
_SEP_RE = re.compile(r"[\s_]+")
_HYPHEN_RUN_RE = re.compile(r"-{2,}")


def canonical_id(label: str) -> str:
    """Derive the canonical entity id for a label.

    Lowercase, punctuation stripped, whitespace collapsed to single hyphens.
    Pure: the same label always yields the same id.
    """
    lowered = _PUNCT_RE.sub("", label.lower())
    hyphenated = _SEP_RE.sub("-", lowered.strip())
    return _HYPHEN_RUN_RE.sub("-", hyphenated).strip("-")


def validate_predicate(predicate: str) -> str:
    """Check a predicate against the closed vocabulary.

    Anything outside the vocabulary must use the ``other:<tag>`` escape hatch
    with a nonempty tag.
    """
    if predicate in KNOWN_PREDICATES:
        return predicate
    if predicate.startswith(_OTHER_PREFIX) and len(predicate) > len(_OTHER_PREFIX):
        return predicate
    raise UnknownPredicate(f"unknown predicate {predicate!r}")


@dataclass
class Entity:
    id: str
    label: str
    category: Category
    specialty: Specialty
    aliases: set[str] = field(default_factory=set)

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "category": self.category.value,
            "specialty": self.specialty.value,
            "aliases": sorted(self.aliases),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Entity":
        try:
            return cls(
                id=doc["id"],
                label=doc["label"],
                category=Category(doc["category"]),
                specialty=Specialty(doc["specialty"]),
                aliases=set(doc.get("aliases", [])),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaViolation(f"bad entity record: {exc}") from exc


@dataclass
class RelationTriple:
    id: str
    subject: str
    predicate: str
    object: str
    provenance: Provenance
    status: Status
    source_chunk: str | None = None

    def key(self) -> tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "subject": self.subject,
            "predicate": self.predicate,
            "object": self.object,
            "provenance": self.provenance.value,
            "status": self.status.value,
            "source-chunk": self.source_chunk,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RelationTriple":
        try:
            return cls(
                id=doc["id"],
                subject=doc["subject"],
                predicate=validate_predicate(doc["predicate"]),
                object=doc["object"],
                provenance=Provenance(doc["provenance"]),
                status=Status(doc["status"]),
                source_chunk=doc.get("source-chunk"),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaViolation(f"bad relation record: {exc}") from exc


_REL_SEQ_RE = re.compile(r"^rel-(\d+)$")


class KnowledgeGraph:
    """Entity/relation store with referential integrity and dedup.

    Mutations take an exclusive lock and bump ``version``; values handed out
    (snapshots, copies) are independent of the live graph, so they can cross
    thread boundaries safely.
    """

    def __init__(self) -> None:
        self.entities: dict[str, Entity] = {}
        self.relations: dict[str, RelationTriple] = {}
        self.version: int = 0
        self._alias_index: dict[str, str] = {}
        self._next_rel_seq: int = 1
        self._lock = threading.RLock()

    # -- queries ------------------------------------------------------------

    def resolve(self, label_or_id: str) -> str | None:
        """Map a label, alias, or id to the entity id it belongs to."""
        if label_or_id in self.entities:
            return label_or_id
        return self._alias_index.get(canonical_id(label_or_id))

    def get_entity(self, entity_id: str) -> Entity:
        ent = self.entities.get(entity_id)
        if ent is None:
            raise UnknownEntity(f"unknown entity {entity_id!r}")
        return ent

    def diseases(self) -> list[Entity]:
        return sorted(
            (e for e in self.entities.values() if e.category is Category.DISEASE),
            key=lambda e: e.id,
        )

    def live_relations(self) -> Iterator[RelationTriple]:
        return (r for r in self.relations.values() if r.status is not Status.REJECTED)

    def find_live(self, subject: str, predicate: str, obj: str) -> RelationTriple | None:
        for rel in self.relations.values():
            if rel.status is not Status.REJECTED and rel.key() == (subject, predicate, obj):
                return rel
        return None

    def symptoms_of(self, disease_id: str, statuses: Iterable[Status] = SCORING_STATUSES) -> list[str]:
        """Object ids of has-symptom edges from a disease, filtered by status.

        Lexicographic order for determinism.
        """
        if disease_id not in self.entities:
            raise UnknownEntity(f"unknown entity {disease_id!r}")
        wanted = frozenset(statuses)
        hits = {
            rel.object
            for rel in self.relations.values()
            if rel.subject == disease_id
            and rel.predicate == "has-symptom"
            and rel.status in wanted
        }
        return sorted(hits)

    # -- mutations ----------------------------------------------------------

    def _bump(self) -> None:
        self.version += 1

    def upsert_entity(
        self,
        label: str,
        category: Category,
        specialty: Specialty,
        aliases: Iterable[str] = (),
    ) -> str:
        """Insert an entity or merge into the one its label/alias resolves to.

        Returns the entity id. The canonical label and every alias are
        indexed, so a later upsert under any known surface folds into the
        same node. The first write wins for category and specialty; merges
        only add aliases.
        """
        with self._lock:
            cid = canonical_id(label)
            if not cid:
                raise EmptyLabel(f"label {label!r} normalizes to empty string")
            existing_id = self.resolve(label)
            incoming_aliases = {a for a in aliases if canonical_id(a)}
            if existing_id is not None:
                ent = self.entities[existing_id]
                new_aliases = {
                    a for a in incoming_aliases
                    if canonical_id(a) != ent.id and canonical_id(a) not in self._alias_index
                }
                if new_aliases:
                    ent.aliases |= new_aliases
                    for alias in new_aliases:
                        self._alias_index[canonical_id(alias)] = ent.id
                    self._bump()
                return ent.id

            kept = {a for a in incoming_aliases if canonical_id(a) != cid}
            ent = Entity(id=cid, label=label, category=category, specialty=specialty, aliases=kept)
            self.entities[cid] = ent
            self._alias_index[cid] = cid
            for alias in kept:
                self._alias_index[canonical_id(alias)] = cid
            self._bump()
            return cid

    def add_relation(
        self,
        subject: str,
        predicate: str,
        obj: str,
        provenance: Provenance,
        status: Status = Status.EXTRACTED,
        source_chunk: str | None = None,
    ) -> str:
        """Insert a relation unless a live duplicate already exists.

        Returns the relation id (the existing one on duplicate insert).
        """
        with self._lock:
            predicate = validate_predicate(predicate)
            if subject not in self.entities:
                raise DanglingEndpoint(f"subject {subject!r} not in graph")
            if obj not in self.entities:
                raise DanglingEndpoint(f"object {obj!r} not in graph")
            if subject == obj:
                raise SelfLoop(f"relation {subject!r} -> itself is forbidden")
            dup = self.find_live(subject, predicate, obj)
            if dup is not None:
                return dup.id
            rel_id = f"rel-{self._next_rel_seq:06d}"
            self._next_rel_seq += 1
            self.relations[rel_id] = RelationTriple(
                id=rel_id,
                subject=subject,
                predicate=predicate,
                object=obj,
                provenance=provenance,
                status=status,
                source_chunk=source_chunk,
            )
            self._bump()
            return rel_id

    def set_status(self, relation_id: str, status: Status) -> RelationTriple:
        """Move a relation along the review lifecycle.

        extracted -> pending-review -> approved | rejected; the terminal
        states never change again.
        """
        with self._lock:
            rel = self.relations.get(relation_id)
            if rel is None:
                raise UnknownEntity(f"unknown relation {relation_id!r}")
            if status is rel.status:
                return rel
            if status not in _ALLOWED_TRANSITIONS[rel.status]:
                raise InvalidStatusTransition(
                    f"{rel.status.value} -> {status.value} not allowed for {relation_id}"
                )
            rel.status = status
            self._bump()
            return rel

    def expand(
        self,
        entities: Iterable[Entity],
        approved: Iterable[RelationTriple],
    ) -> None:
        """Merge expert-approved knowledge into the graph (set union).

        Every incoming triple must carry status approved. Entities merge by
        id; a triple whose (subject, predicate, object) already exists live
        is left untouched, so the operation is idempotent and |V|, |E| never
        shrink.
        """
        with self._lock:
            triples = list(approved)
            for rel in triples:
                if rel.status is not Status.APPROVED:
                    raise UnapprovedInput(
                        f"relation {rel.id} has status {rel.status.value}, expected approved"
                    )
            for ent in entities:
                self.upsert_entity(ent.label, ent.category, ent.specialty, ent.aliases)
            for rel in triples:
                subject = self.resolve(rel.subject) or rel.subject
                obj = self.resolve(rel.object) or rel.object
                if subject not in self.entities or obj not in self.entities:
                    raise IntegrityViolation(
                        f"approved triple {rel.id} references unknown entity"
                    )
                if self.find_live(subject, rel.predicate, obj) is None:
                    rel_id = f"rel-{self._next_rel_seq:06d}"
                    self._next_rel_seq += 1
                    self.relations[rel_id] = RelationTriple(
                        id=rel_id,
                        subject=subject,
                        predicate=rel.predicate,
                        object=obj,
                        provenance=rel.provenance,
                        status=Status.APPROVED,
                        source_chunk=rel.source_chunk,
                    )
            self._bump()

    # -- integrity ------------------------------------------------------------

    def check_integrity(self) -> None:
        """Assert referential integrity and live-triple dedup."""
        seen: set[tuple[str, str, str]] = set()
        for rel in self.relations.values():
            if rel.subject not in self.entities or rel.object not in self.entities:
                raise IntegrityViolation(f"relation {rel.id} has a dangling endpoint")
            if rel.status is not Status.REJECTED:
                if rel.key() in seen:
                    raise IntegrityViolation(f"duplicate live triple {rel.key()}")
                seen.add(rel.key())

    # -- persistence ----------------------------------------------------------

    def snapshot(self) -> bytes:
        """Serialize to the canonical export document (UTF-8 JSON).

        Entities sorted by id, relations by (subject, predicate, object),
        fixed key order throughout, so the same graph always yields the
        same bytes.
        """
        with self._lock:
            doc = {
                "version": self.version,
                "entities": [e.to_doc() for e in sorted(self.entities.values(), key=lambda e: e.id)],
                "relations": [
                    r.to_doc()
                    for r in sorted(self.relations.values(), key=lambda r: (r.key(), r.id))
                ],
            }
        return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")

    @classmethod
    def load(cls, data: bytes | str | dict) -> "KnowledgeGraph":
        """Rebuild a graph from an export document."""
        if isinstance(data, (bytes, str)):
            try:
                doc = json.loads(data)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"not valid JSON: {exc}") from exc
        else:
            doc = data
        if not isinstance(doc, dict):
            raise SchemaViolation("export document must be a JSON object")
        for key in ("version", "entities", "relations"):
            if key not in doc:
                raise SchemaViolation(f"missing top-level key {key!r}")
        if not isinstance(doc["version"], int) or doc["version"] < 0:
            raise SchemaViolation("version must be a non-negative integer")

        graph = cls()
        for ent_doc in doc["entities"]:
            ent = Entity.from_doc(ent_doc)
            if ent.id in graph.entities:
                raise SchemaViolation(f"duplicate entity id {ent.id!r}")
            graph.entities[ent.id] = ent
            graph._alias_index[ent.id] = ent.id
            for alias in ent.aliases:
                graph._alias_index[canonical_id(alias)] = ent.id
        max_seq = 0
        for rel_doc in doc["relations"]:
            rel = RelationTriple.from_doc(rel_doc)
            if rel.id in graph.relations:
                raise SchemaViolation(f"duplicate relation id {rel.id!r}")
            if rel.subject not in graph.entities or rel.object not in graph.entities:
                raise IntegrityViolation(f"relation {rel.id} references a missing node")
            if rel.subject == rel.object:
                raise IntegrityViolation(f"relation {rel.id} is a self-loop")
            graph.relations[rel.id] = rel
            m = _REL_SEQ_RE.match(rel.id)
            if m:
                max_seq = max(max_seq, int(m.group(1)))
        graph.check_integrity()
        graph._next_rel_seq = max_seq + 1
        graph.version = doc["version"]
        return graph

    def copy(self) -> "KnowledgeGraph":
        """Deep value copy, safe to hand to another thread."""
        with self._lock:
            dup = KnowledgeGraph()
            dup.entities = {k: copy.deepcopy(v) for k, v in self.entities.items()}
            dup.relations = {k: copy.deepcopy(v) for k, v in self.relations.items()}
            dup.version = self.version
            dup._alias_index = dict(self._alias_index)
            dup._next_rel_seq = self._next_rel_seq
            return dup
