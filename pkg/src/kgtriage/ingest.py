"""Document ingestion: segmentation, dictionary extraction, pattern-based
relation mining, and the optional external augmenter.

The deterministic path (lexicon + patterns) writes edges with status
extracted; anything coming back from the augmenter endpoint is quarantined
as pending-review and only becomes diagnostic knowledge after expert
approval.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (
    AugmenterProtocolError,
    AugmenterUnavailable,
    EmptyDocument,
    LexiconError,
    PatternError,
    UnknownPredicate,
)
from .graph import (
    Category,
    KnowledgeGraph,
    Provenance,
    Specialty,
    Status,
    canonical_id,
    validate_predicate,
)

log = logging.getLogger(__name__)

DEFAULT_AUGMENTER_TIMEOUT = 10.0


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    source: str = ""


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    ordinal: int
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    label: str
    category: Category
    specialty: Specialty


class Lexicon:
    """Case-folded surface-form dictionary for entity recognition."""

    def __init__(self, entries: dict[str, LexiconEntry] | None = None) -> None:
        self.entries: dict[str, LexiconEntry] = entries or {}
        # surfaces bucketed by first character, longest first, so the
        # matcher can try candidates in longest-match order
        self._by_first: dict[str, list[str]] = {}
        for surface in self.entries:
            self._by_first.setdefault(surface[0], []).append(surface)
        for bucket in self._by_first.values():
            bucket.sort(key=lambda s: (-len(s), s))

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, surface: str, label: str, category: Category, specialty: Specialty) -> None:
        key = surface.casefold().strip()
        if not key:
            raise LexiconError("empty surface form")
        if not label.strip():
            raise LexiconError(f"surface {surface!r} maps to empty canonical label")
        if key in self.entries:
            raise LexiconError(f"duplicate surface {surface!r}")
        self.entries[key] = LexiconEntry(key, label, category, specialty)
        bucket = self._by_first.setdefault(key[0], [])
        bucket.append(key)
        bucket.sort(key=lambda s: (-len(s), s))

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicon":
        """Load the tab-separated lexicon format.

        ``surface<TAB>canonical-label<TAB>category<TAB>specialty`` per line,
        ``#`` starts a comment, duplicate surfaces are an error.
        """
        lex = cls()
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise LexiconError(f"cannot read lexicon {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise LexiconError(f"{path}:{lineno}: expected 4 tab-separated fields")
            surface, label, category, specialty = (p.strip() for p in parts)
            try:
                lex.add(surface, label, Category(category), Specialty(specialty))
            except ValueError as exc:
                raise LexiconError(f"{path}:{lineno}: {exc}") from exc
        return lex


@dataclass(frozen=True)
class EntityMention:
    surface: str
    label: str
    category: Category
    specialty: Specialty
    start: int
    end: int


@dataclass(frozen=True)
class TripleCandidate:
    subject: str
    predicate: str
    object: str
    confidence: float
    provenance: Provenance


@dataclass
class ExtractionCandidate:
    mentions: list[EntityMention] = field(default_factory=list)
    triples: list[TripleCandidate] = field(default_factory=list)
    dropped: int = 0


@dataclass(frozen=True)
class RelationPattern:
    """Trigger-word template with two entity slots.

    The template is an ordered token sequence mixing literal trigger words
    with the slots ``{1}`` (subject) and ``{2}`` (object); at most max_gap
    filler tokens may sit between consecutive template elements.
    """

    pattern_id: str
    predicate: str
    template: tuple[str, ...]
    max_gap: int

    def __post_init__(self) -> None:
        slots = [t for t in self.template if t in ("{1}", "{2}")]
        if sorted(slots) != ["{1}", "{2}"]:
            raise PatternError(
                f"pattern {self.pattern_id!r} must contain exactly one {{1}} and one {{2}}"
            )
        if len(self.template) < 3 or self.template[0] not in ("{1}", "{2}") or self.template[-1] not in ("{1}", "{2}"):
            raise PatternError(
                f"pattern {self.pattern_id!r} must be slot, trigger word(s), slot"
            )
        if self.max_gap < 0:
            raise PatternError(f"pattern {self.pattern_id!r} has negative max-gap")


def load_patterns(path: str | Path) -> list[RelationPattern]:
    """Load the tab-separated pattern format.

    ``pattern-id<TAB>predicate<TAB>trigger-template<TAB>max-gap`` per line,
    ``#`` comments allowed.
    """
    patterns: list[RelationPattern] = []
    seen: set[str] = set()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PatternError(f"cannot read patterns {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise PatternError(f"{path}:{lineno}: expected 4 tab-separated fields")
        pattern_id, predicate, template, max_gap = (p.strip() for p in parts)
        if pattern_id in seen:
            raise PatternError(f"{path}:{lineno}: duplicate pattern id {pattern_id!r}")
        seen.add(pattern_id)
        try:
            validate_predicate(predicate)
            patterns.append(
                RelationPattern(pattern_id, predicate, tuple(template.split()), int(max_gap))
            )
        except ValueError as exc:
            raise PatternError(f"{path}:{lineno}: {exc}") from exc
    return patterns


# --- segmentation -----------------------------------------------------------

_PARA_RE = re.compile(r"\n{2,}")
_SENT_RE = re.compile(r"[.!?]+[\"')\]]*\s+")
_WS_RE = re.compile(r"\s+")


def _split_point(text: str, limit: int) -> int:
    """Pick where the next chunk ends inside ``text[:limit+1]``.

    Preference order: last paragraph break, last sentence break, last
    whitespace run, hard cut at the limit. The separator stays with the
    left chunk so concatenation is lossless.
    """
    window = text[: limit + 1]
    for regex in (_PARA_RE, _SENT_RE, _WS_RE):
        best = None
        for m in regex.finditer(window):
            if 0 < m.end() <= limit:
                best = m.end()
        if best is not None:
            return best
    return limit


def segment_document(doc: Document, max_chunk_chars: int) -> list[Chunk]:
    """Split a document into contiguous chunks within a character budget.

    Chunks are lossless: their concatenation equals the document text
    byte-for-byte. Ordinals are dense from 0.
    """
    if max_chunk_chars < 1:
        raise ValueError("max_chunk_chars must be >= 1")
    if not doc.text:
        raise EmptyDocument(f"document {doc.id!r} has no text")

    chunks: list[Chunk] = []
    pos = 0
    text = doc.text
    while pos < len(text):
        remaining = text[pos:]
        if len(remaining) <= max_chunk_chars:
            cut = len(remaining)
        else:
            cut = _split_point(remaining, max_chunk_chars)
        ordinal = len(chunks)
        chunks.append(
            Chunk(
                id=f"{doc.id}#{ordinal}",
                doc_id=doc.id,
                ordinal=ordinal,
                text=remaining[:cut],
                start=pos,
                end=pos + cut,
            )
        )
        pos += cut
    return chunks


# --- entity extraction ------------------------------------------------------

def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def extract_entities(chunk: Chunk, lexicon: Lexicon) -> list[EntityMention]:
    """Longest, leftmost, non-overlapping dictionary matches.

    Case-insensitive, word-boundary anchored on both sides, output ordered
    by character offset.
    """
    text = chunk.text
    folded = text.casefold()
    mentions: list[EntityMention] = []
    i = 0
    n = len(folded)
    while i < n:
        if i > 0 and _is_word_char(folded[i - 1]):
            i += 1
            continue
        hit = None
        for surface in lexicon._by_first.get(folded[i], ()):
            j = i + len(surface)
            if folded[i:j] != surface:
                continue
            if j < n and _is_word_char(folded[j]):
                continue
            hit = (surface, j)
            break
        if hit is None:
            i += 1
            continue
        surface, j = hit
        entry = lexicon.entries[surface]
        mentions.append(
            EntityMention(
                surface=text[i:j],
                label=entry.label,
                category=entry.category,
                specialty=entry.specialty,
                start=i,
                end=j,
            )
        )
        i = j
    return mentions


# --- relation extraction ----------------------------------------------------

_TOKEN_RE = re.compile(r"\S+")
_EDGE_PUNCT = ".,;:!?()[]{}\"'"


@dataclass(frozen=True)
class _Token:
    text: str
    start: int
    end: int


def _tokenize(text: str) -> list[_Token]:
    return [_Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _token_span(tokens: list[_Token], start: int, end: int) -> tuple[int, int] | None:
    """Indices of the tokens overlapping a character range (inclusive)."""
    lo = hi = None
    for idx, tok in enumerate(tokens):
        if tok.end > start and tok.start < end:
            if lo is None:
                lo = idx
            hi = idx
    if lo is None or hi is None:
        return None
    return lo, hi


def _word_matches(token: _Token, trigger: str) -> bool:
    return token.text.strip(_EDGE_PUNCT).casefold() == trigger.casefold()


def _trigger_fits(
    words: tuple[str, ...], tokens: list[_Token], lo: int, hi: int, max_gap: int
) -> bool:
    """Match trigger words in order within tokens[lo..hi], each consecutive
    hop (span edge to word, word to word, word to span edge) at most
    max_gap filler tokens wide. Backtracks over word placements."""

    def place(word_idx: int, prev: int) -> bool:
        if word_idx == len(words):
            return hi - prev <= max_gap
        upper = min(hi + 1, prev + max_gap + 2)
        for idx in range(prev + 1, upper):
            if _word_matches(tokens[idx], words[word_idx]) and place(word_idx + 1, idx):
                return True
        return False

    return place(0, lo - 1)


_SENTENCE_END = (".", "!", "?", ";")


def extract_relations(
    chunk: Chunk,
    mentions: list[EntityMention],
    patterns: list[RelationPattern],
) -> list[TripleCandidate]:
    """Emit a triple whenever two mentions bracket a pattern's trigger words.

    Both mentions and the trigger must sit inside one sentence (no token up
    to the right mention may end with sentence-final punctuation). Pattern
    confidence is fixed at 1.0. Output is deterministic: sorted by
    (pattern id, subject offset, object offset).
    """
    tokens = _tokenize(chunk.text)
    ends_sentence = [t.text.rstrip("\"')]").endswith(_SENTENCE_END) for t in tokens]
    spans: list[tuple[EntityMention, int, int]] = []
    for m in mentions:
        span = _token_span(tokens, m.start, m.end)
        if span is not None:
            spans.append((m, span[0], span[1]))

    hits: list[tuple[str, int, int, TripleCandidate]] = []
    for pattern in patterns:
        first_slot = next(t for t in pattern.template if t in ("{1}", "{2}"))
        words = tuple(t for t in pattern.template if t not in ("{1}", "{2}"))
        for left, l_lo, l_hi in spans:
            for right, r_lo, r_hi in spans:
                if left is right or r_lo <= l_hi:
                    continue
                if any(ends_sentence[i] for i in range(l_hi, r_lo)):
                    continue
                between_lo, between_hi = l_hi + 1, r_lo - 1
                if between_hi - between_lo + 1 < len(words):
                    continue
                if not _trigger_fits(words, tokens, between_lo, between_hi, pattern.max_gap):
                    continue
                subject, obj = (left, right) if first_slot == "{1}" else (right, left)
                hits.append(
                    (
                        pattern.pattern_id,
                        subject.start,
                        obj.start,
                        TripleCandidate(
                            subject=subject.label,
                            predicate=pattern.predicate,
                            object=obj.label,
                            confidence=1.0,
                            provenance=Provenance.LEXICON_EXTRACTOR,
                        ),
                    )
                )
    hits.sort(key=lambda h: (h[0], h[1], h[2]))
    return [h[3] for h in hits]


# --- augmenter --------------------------------------------------------------

def augment(
    chunk: Chunk,
    endpoint: str | None,
    timeout: float = DEFAULT_AUGMENTER_TIMEOUT,
) -> ExtractionCandidate:
    """Ask the external context-aware extractor for additional candidates.

    No endpoint configured: no-op returning an empty candidate set. Every
    triple that comes back is marked augmenter provenance and quarantined
    as pending-review; malformed items are dropped one by one and counted
    in ``dropped``.
    """
    result = ExtractionCandidate()
    if not endpoint:
        return result
    try:
        resp = requests.post(
            endpoint,
            json={"chunk_id": chunk.id, "text": chunk.text},
            timeout=timeout,
        )
    except requests.RequestException as exc:
        raise AugmenterUnavailable(f"augmenter at {endpoint} unreachable: {exc}") from exc
    if resp.status_code != 200:
        raise AugmenterProtocolError(f"augmenter returned HTTP {resp.status_code}")
    try:
        payload = resp.json()
    except ValueError as exc:
        raise AugmenterProtocolError(f"augmenter response is not JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise AugmenterProtocolError("augmenter response must be a JSON object")

    for raw in payload.get("mentions", []):
        mention = _parse_augmenter_mention(raw)
        if mention is None:
            result.dropped += 1
        else:
            result.mentions.append(mention)
    for raw in payload.get("triples", []):
        triple = _parse_augmenter_triple(raw)
        if triple is None:
            result.dropped += 1
        else:
            result.triples.append(triple)
    if result.dropped:
        log.warning(
            "augmenter: dropped %d malformed candidate(s) for chunk %s",
            result.dropped,
            chunk.id,
        )
    return result


def _parse_augmenter_mention(raw: object) -> EntityMention | None:
    if not isinstance(raw, dict):
        return None
    try:
        label = str(raw["label"]).strip()
        if not label:
            return None
        return EntityMention(
            surface=str(raw.get("surface", label)),
            label=label,
            category=Category(raw.get("category", "other")),
            specialty=Specialty(raw.get("specialty", "general")),
            start=int(raw.get("start", 0)),
            end=int(raw.get("end", 0)),
        )
    except (KeyError, ValueError, TypeError):
        return None


def _parse_augmenter_triple(raw: object) -> TripleCandidate | None:
    if not isinstance(raw, dict):
        return None
    try:
        confidence = float(raw["confidence"])
        if not 0.0 <= confidence <= 1.0:
            return None
        subject = str(raw["subject"]).strip()
        obj = str(raw["object"]).strip()
        if not subject or not obj or canonical_id(subject) == canonical_id(obj):
            return None
        return TripleCandidate(
            subject=subject,
            predicate=validate_predicate(str(raw["predicate"])),
            object=obj,
            confidence=confidence,
            provenance=Provenance.AUGMENTER,
        )
    except (KeyError, ValueError, TypeError, UnknownPredicate):
        return None


# --- corpus pipeline --------------------------------------------------------

@dataclass
class IngestReport:
    documents: int = 0
    chunks: int = 0
    mentions: int = 0
    triples_extracted: int = 0
    triples_pending: int = 0
    augmenter_dropped: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "documents": self.documents,
            "chunks": self.chunks,
            "mentions": self.mentions,
            "triples_extracted": self.triples_extracted,
            "triples_pending": self.triples_pending,
            "augmenter_dropped": self.augmenter_dropped,
            "errors": [{"doc_id": d, "error": e} for d, e in self.errors],
        }


DEFAULT_MAX_CHUNK_CHARS = 480


def ingest_corpus(
    docs: list[Document],
    lexicon: Lexicon,
    patterns: list[RelationPattern],
    graph: KnowledgeGraph,
    augmenter_endpoint: str | None = None,
    max_chunk_chars: int = DEFAULT_MAX_CHUNK_CHARS,
    chunk_sink: dict[str, str] | None = None,
    augmenter_timeout: float = DEFAULT_AUGMENTER_TIMEOUT,
) -> IngestReport:
    """Run segment -> extract -> (augment) -> graph upsert for a corpus.

    Triples from the deterministic extractors land with status extracted;
    augmenter triples land pending-review. Triple counters report edges
    actually inserted, so re-ingesting the same corpus leaves them at zero
    while mention counts still reflect the scan. A failing document is
    recorded and the rest of the corpus still runs.
    """
    report = IngestReport()
    endpoint = augmenter_endpoint
    seen_ids: set[str] = set()
    for doc in docs:
        if doc.id in seen_ids:
            report.errors.append((doc.id, "duplicate document id in corpus"))
            continue
        seen_ids.add(doc.id)
        try:
            endpoint = _ingest_document(
                doc, lexicon, patterns, graph, endpoint,
                max_chunk_chars, report, chunk_sink, augmenter_timeout,
            )
            report.documents += 1
        except Exception as exc:  # noqa: BLE001 - per-document isolation
            log.error("ingest failed for document %s: %s", doc.id, exc)
            report.errors.append((doc.id, str(exc)))
    return report


def _ingest_document(
    doc: Document,
    lexicon: Lexicon,
    patterns: list[RelationPattern],
    graph: KnowledgeGraph,
    augmenter_endpoint: str | None,
    max_chunk_chars: int,
    report: IngestReport,
    chunk_sink: dict[str, str] | None,
    augmenter_timeout: float = DEFAULT_AUGMENTER_TIMEOUT,
) -> str | None:
    for chunk in segment_document(doc, max_chunk_chars):
        report.chunks += 1
        if chunk_sink is not None:
            chunk_sink[chunk.id] = chunk.text
        mentions = extract_entities(chunk, lexicon)
        report.mentions += len(mentions)
        for m in mentions:
            graph.upsert_entity(m.label, m.category, m.specialty)
        for cand in extract_relations(chunk, mentions, patterns):
            inserted = _add_candidate(graph, cand, Status.EXTRACTED, chunk.id)
            report.triples_extracted += inserted

        if augmenter_endpoint:
            try:
                extra = augment(chunk, augmenter_endpoint, timeout=augmenter_timeout)
            except AugmenterUnavailable as exc:
                log.warning("augmenter unavailable, continuing without it: %s", exc)
                augmenter_endpoint = None
                continue
            report.augmenter_dropped += extra.dropped
            report.mentions += len(extra.mentions)
            for m in extra.mentions:
                graph.upsert_entity(m.label, m.category, m.specialty)
            for cand in extra.triples:
                inserted = _add_candidate(graph, cand, Status.PENDING_REVIEW, chunk.id)
                report.triples_pending += inserted
    return augmenter_endpoint


def _add_candidate(
    graph: KnowledgeGraph,
    cand: TripleCandidate,
    status: Status,
    chunk_id: str,
) -> int:
    """Resolve candidate endpoints and insert the edge; returns 1 if new."""
    subject = graph.resolve(cand.subject)
    if subject is None:
        subject = graph.upsert_entity(cand.subject, Category.OTHER, Specialty.GENERAL)
    obj = graph.resolve(cand.object)
    if obj is None:
        obj = graph.upsert_entity(cand.object, Category.OTHER, Specialty.GENERAL)
    if subject == obj:
        return 0
    existing = graph.find_live(subject, cand.predicate, obj)
    if existing is not None:
        return 0
    graph.add_relation(subject, cand.predicate, obj, cand.provenance, status, chunk_id)
    return 1
