"""Knowledge-graph-backed diagnostic triage.

A property-graph store built from medical text, a two-tier GP/consultant
referral engine over it, an expert review workflow for extracted knowledge,
and an HTTP gateway plus CLI wrapping the lot.
"""

from .engine import (
    AgentProfile,
    AggregationMode,
    DiagnosisOutcome,
    DiagnosticQuery,
    EngineConfig,
    aggregate,
    decide_referral,
    default_roster,
    diagnose,
    kg_confidence,
    score,
)
from .graph import (
    Category,
    Entity,
    KnowledgeGraph,
    Provenance,
    RelationTriple,
    Specialty,
    Status,
    canonical_id,
)
from .ingest import (
    Chunk,
    Document,
    IngestReport,
    Lexicon,
    RelationPattern,
    extract_entities,
    extract_relations,
    ingest_corpus,
    segment_document,
)

__version__ = "0.1.0"

__all__ = [
    "AgentProfile",
    "AggregationMode",
    "Category",
    "Chunk",
    "DiagnosisOutcome",
    "DiagnosticQuery",
    "Document",
    "EngineConfig",
    "Entity",
    "IngestReport",
    "KnowledgeGraph",
    "Lexicon",
    "Provenance",
    "RelationPattern",
    "RelationTriple",
    "Specialty",
    "Status",
    "aggregate",
    "canonical_id",
    "decide_referral",
    "default_roster",
    "diagnose",
    "extract_entities",
    "extract_relations",
    "ingest_corpus",
    "kg_confidence",
    "score",
    "segment_document",
]
