"""Exception types shared across the package.

Every error raised by kgtriage inherits from KgTriageError so callers can
catch the whole family at the CLI / service boundary and map it to an
exit code or HTTP status.
"""


class KgTriageError(Exception):
    """Base class for all kgtriage errors."""


# --- graph store ----------------------------------------------------------

class EmptyLabel(KgTriageError):
    """Entity label normalizes to the empty string."""


class DanglingEndpoint(KgTriageError):
    """Relation references an entity id not present in the graph."""


class SelfLoop(KgTriageError):
    """Relation subject and object are the same entity."""


class UnknownEntity(KgTriageError):
    """Entity id does not resolve."""


class UnknownPredicate(KgTriageError):
    """Predicate is not in the closed vocabulary and not an 'other:' tag."""


class InvalidStatusTransition(KgTriageError):
    """Relation status change outside the allowed lifecycle."""


class UnapprovedInput(KgTriageError):
    """Graph expansion received a triple whose status is not approved."""


class SchemaViolation(KgTriageError):
    """Graph document does not match the export schema."""


class IntegrityViolation(KgTriageError):
    """Referential integrity broken (e.g. dangling edge in a document)."""


# --- ingestion ------------------------------------------------------------

class EmptyDocument(KgTriageError):
    """Document has no text to segment."""


class LexiconError(KgTriageError):
    """Lexicon file malformed or contains duplicate surfaces."""


class PatternError(KgTriageError):
    """Relation pattern file malformed."""


class AugmenterUnavailable(KgTriageError):
    """External augmenter endpoint unreachable (non-fatal to ingestion)."""


class AugmenterProtocolError(KgTriageError):
    """Augmenter responded outside the wire contract."""


# --- diagnosis engine -----------------------------------------------------

class ScorerUnavailable(KgTriageError):
    """Remote diagnostic scorer unreachable or broke the wire contract."""


class WeightSumViolation(KgTriageError):
    """Aggregation weights do not sum to 1 within tolerance."""


class EmptyResults(KgTriageError):
    """Aggregation or diagnosis invoked with nothing to rank."""


class RosterError(KgTriageError):
    """Agent roster invalid (needs exactly one GP and at least one consultant)."""


class NoConsultantForSpecialty(KgTriageError):
    """No consultant in the roster covers the referred specialty."""


# --- curation -------------------------------------------------------------

class AlreadyDecided(KgTriageError):
    """Verdict submitted for a review item that is no longer pending."""


class RevisionConflict(KgTriageError):
    """Optimistic-concurrency token did not match the item's revision."""


class UnknownReviewItem(KgTriageError):
    """Review item id does not resolve."""


# --- gateway --------------------------------------------------------------

class WrongState(KgTriageError):
    """Session operation not allowed in the current state."""


class UnexpectedSymptom(KgTriageError):
    """Answer supplied for a symptom that was not the pending question."""


class GraphNotLoaded(KgTriageError):
    """Service invoked before a graph is available."""


class UnknownSession(KgTriageError):
    """Session id does not resolve."""


class ConfigError(KgTriageError):
    """Service configuration file malformed."""
