"""Interactive diagnostic sessions.

A session walks a fixed state machine: intake, a bounded run of clarifying
yes/no questions, then either a direct GP decision or the referral path
(referred -> consulting -> final). The clarifying policy is greedy: ask the
unasked symptom that appears in the most - but not all - of the current
top-k candidates' symptom sets, ties broken lexicographically.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .engine import (
    AgentProfile,
    DiagnosisOutcome,
    DiagnosticQuery,
    EngineConfig,
    diagnose,
    score,
)
from .errors import UnexpectedSymptom, WrongState
from .graph import Category, KnowledgeGraph
from .ingest import Chunk, Lexicon, extract_entities


class SessionState(str, Enum):
    INTAKE = "intake"
    CLARIFYING = "clarifying"
    DECIDED = "decided"
    REFERRED = "referred"
    CONSULTING = "consulting"
    FINAL = "final"
    CLOSED = "closed"


@dataclass
class TranscriptEntry:
    speaker: str  # patient | gp | consultant | system
    text: str
    ts: float

    def to_doc(self) -> dict:
        return {"speaker": self.speaker, "text": self.text, "ts": self.ts}


def normalize_symptoms(text: str, lexicon: Lexicon, graph: KnowledgeGraph) -> set[str]:
    """Map free text to the symptom entity ids it mentions.

    Mentions that do not resolve to a symptom node stay in the raw text
    only and never enter the structured query.
    """
    probe = Chunk(id="query#0", doc_id="query", ordinal=0, text=text, start=0, end=len(text))
    symptom_ids: set[str] = set()
    for mention in extract_entities(probe, lexicon):
        entity_id = graph.resolve(mention.label)
        if entity_id is None:
            continue
        if graph.entities[entity_id].category is Category.SYMPTOM:
            symptom_ids.add(entity_id)
    return symptom_ids


def select_question(
    query_symptoms: set[str],
    asked: set[str],
    candidates: Sequence[str],
    graph: KnowledgeGraph,
) -> str | None:
    """Greedy discriminator choice over the candidate diseases.

    Returns the symptom present in the largest number - but not all - of
    the candidates' symptom sets, skipping anything already asked or
    already reported; ties break lexicographically. None when nothing
    discriminates.
    """
    if not candidates:
        return None
    counts: dict[str, int] = {}
    for disease_id in candidates:
        for symptom in graph.symptoms_of(disease_id):
            counts[symptom] = counts.get(symptom, 0) + 1
    blocked = asked | query_symptoms
    best: tuple[int, str] | None = None
    for symptom, count in counts.items():
        if symptom in blocked or count == len(candidates):
            continue
        key = (-count, symptom)
        if best is None or key < best:
            best = key
    return best[1] if best else None


class Session:
    """One patient dialog bound to a graph snapshot and roster.

    Operations are serialized per session; a symptom is asked at most once
    and only the pending question may be answered.
    """

    def __init__(
        self,
        session_id: str,
        initial_text: str,
        graph: KnowledgeGraph,
        lexicon: Lexicon,
        config: EngineConfig,
        roster: Sequence[AgentProfile],
        max_questions: int = 3,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.session_id = session_id
        self.graph = graph
        self.lexicon = lexicon
        self.config = config
        self.roster = list(roster)
        self.max_questions = max_questions
        self.clock = clock
        self.state = SessionState.INTAKE
        self.query = DiagnosticQuery(
            query_id=session_id,
            raw_text=initial_text,
            symptom_ids=normalize_symptoms(initial_text, lexicon, graph),
        )
        self.asked_symptoms: set[str] = set()
        self.pending_question: str | None = None
        self.transcript: list[TranscriptEntry] = []
        self.outcome: DiagnosisOutcome | None = None
        self.gp_ranking: list[tuple[str, float]] = []
        self._lock = threading.Lock()
        self._say("patient", initial_text)
        with self._lock:
            self._advance()

    # -- public API -------------------------------------------------------

    def next_question(self) -> str | None:
        """The pending clarifying symptom id (None once deciding)."""
        with self._lock:
            if self.state is not SessionState.CLARIFYING:
                raise WrongState(f"session is {self.state.value}, not clarifying")
            return self.pending_question

    def answer(self, symptom_id: str, present: bool) -> "Session":
        """Answer the pending question and advance the machine."""
        with self._lock:
            if self.state is not SessionState.CLARIFYING:
                raise WrongState(f"session is {self.state.value}, not clarifying")
            if symptom_id != self.pending_question:
                raise UnexpectedSymptom(
                    f"pending question is {self.pending_question!r}, got {symptom_id!r}"
                )
            self.asked_symptoms.add(symptom_id)
            self.pending_question = None
            if present:
                self.query.symptom_ids.add(symptom_id)
            self._say("patient", ("yes, " if present else "no, not ") + symptom_id)
            self._advance()
        return self

    def close(self) -> "Session":
        with self._lock:
            if self.state not in (SessionState.DECIDED, SessionState.FINAL):
                raise WrongState(f"cannot close a session in state {self.state.value}")
            self.state = SessionState.CLOSED
            self._say("system", "session closed")
        return self

    # -- machine ----------------------------------------------------------

    def _advance(self) -> None:
        gp_results = self._gp_ranking()
        self.gp_ranking = gp_results
        top_confidence = gp_results[0][1] if gp_results else 0.0
        budget_left = self.max_questions - len(self.asked_symptoms)
        if top_confidence >= self.config.tau or budget_left <= 0:
            self._decide()
            return
        question = select_question(
            self.query.symptom_ids,
            self.asked_symptoms,
            [d for d, _ in gp_results],
            self.graph,
        )
        if question is None:
            self._decide()
            return
        self.state = SessionState.CLARIFYING
        self.pending_question = question
        label = self.graph.entities[question].label
        self._say("gp", f"do you also have {label}?")

    def _gp_ranking(self) -> list[tuple[str, float]]:
        gp = next(a for a in self.roster if a.tier.value == "gp")
        return score(gp, self.query, self.graph, self.config.top_k)

    def _decide(self) -> None:
        outcome = diagnose(self.query, self.config, self.roster, self.graph, clock=self.clock)
        self.outcome = outcome
        if outcome.decision.referral:
            self.state = SessionState.REFERRED
            targets = ", ".join(s.value for s in outcome.decision.target_specialties)
            self._say("system", f"referred ({outcome.decision.reason.value}) to {targets}")
            self.state = SessionState.CONSULTING
            for agent in outcome.per_agent[1:]:
                if agent.results:
                    top = agent.results[0]
                    self._say(
                        "consultant",
                        f"{agent.agent_id}: {top[0]} at {top[1]:.6f}",
                    )
            self.state = SessionState.FINAL
        else:
            self.state = SessionState.DECIDED
        final_id, final_conf = outcome.final
        self._say("gp", f"final diagnosis {final_id} at {final_conf:.6f}")

    def _say(self, speaker: str, text: str) -> None:
        self.transcript.append(TranscriptEntry(speaker, text, self.clock()))

    # -- serialization ------------------------------------------------------

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "state": self.state.value,
            "symptom_ids": sorted(self.query.symptom_ids),
            "asked_symptoms": sorted(self.asked_symptoms),
            "pending_question": self.pending_question,
            "questions_left": max(0, self.max_questions - len(self.asked_symptoms)),
            "gp_ranking": [
                {"diagnosis_id": d, "confidence": c} for d, c in self.gp_ranking
            ],
            "transcript": [t.to_doc() for t in self.transcript],
            "outcome": self.outcome.to_doc() if self.outcome else None,
        }
