"""Two-tier diagnostic engine: a general-practice agent scores every disease
in the graph, refers low-confidence or specialist-domain cases to
specialty-scoped consultant agents, and combines consultant opinions by a
normalized weighted sum.

All scoring here is deterministic: a disease's confidence is the fraction
of its known symptoms present in the query, ties are broken by id, and the
whole pipeline is a pure function of (query, config, graph snapshot) when
run with the default clock.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol, Sequence

import requests

from .errors import (
    EmptyResults,
    RosterError,
    ScorerUnavailable,
    UnknownEntity,
    WeightSumViolation,
)
from .graph import (
    CONSULTANT_SPECIALTIES,
    Category,
    Entity,
    KnowledgeGraph,
    RelationTriple,
    Specialty,
)

log = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-9
DEFAULT_TAU = 0.7
DEFAULT_TOP_K = 5
DEFAULT_SCORER_TIMEOUT = 10.0

Scored = tuple[str, float]


@dataclass
class DiagnosticQuery:
    query_id: str
    raw_text: str
    symptom_ids: set[str] = field(default_factory=set)
    context: dict[str, str] = field(default_factory=dict)


class Tier(str, Enum):
    GP = "gp"
    CONSULTANT = "consultant"


class SpecialistSetRule(str, Enum):
    EXPLICIT_LIST = "explicit-list"
    SPECIALTY_NOT_GENERAL = "specialty-not-general"


class AggregationMode(str, Enum):
    WEIGHTED = "weighted"
    UNIFORM = "uniform"


class ReferralReason(str, Enum):
    BELOW_THRESHOLD = "below-threshold"
    SPECIALIST_DIAGNOSIS = "specialist-diagnosis"
    NONE = "none"


class OutcomeKind(str, Enum):
    GP_DIRECT = "gp-direct"
    CONSULTANT_SINGLE = "consultant-single"
    CONSULTANT_AGGREGATED = "consultant-aggregated"


@dataclass
class EngineConfig:
    tau: float = DEFAULT_TAU
    top_k: int = DEFAULT_TOP_K
    specialist_set_rule: SpecialistSetRule = SpecialistSetRule.SPECIALTY_NOT_GENERAL
    specialist_ids: frozenset[str] = frozenset()
    aggregation: AggregationMode = AggregationMode.UNIFORM

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be within [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        self.specialist_ids = frozenset(self.specialist_ids)


class DiagnosticFunction(Protocol):
    """Pure mapping from (query, graph view, domain filter) to scored ids."""

    def __call__(
        self,
        query: DiagnosticQuery,
        graph: KnowledgeGraph,
        specialty: Specialty | None,
        top_k: int,
    ) -> list[Scored]: ...


def kg_confidence(
    symptom_ids: set[str],
    disease_id: str,
    graph: KnowledgeGraph,
) -> float:
    """Fraction of the disease's known symptoms present in the query.

    Diseases with no recorded symptoms score 0. Only edges in scoring
    statuses (extracted, approved) count as known symptoms.
    """
    ent = graph.entities.get(disease_id)
    if ent is None or ent.category is not Category.DISEASE:
        raise UnknownEntity(f"{disease_id!r} is not a disease in this graph")
    known = graph.symptoms_of(disease_id)
    if not known:
        return 0.0
    return len(symptom_ids.intersection(known)) / len(known)


def _rank(scores: list[Scored], top_k: int) -> list[Scored]:
    scores.sort(key=lambda s: (-s[1], s[0]))
    return scores[:top_k]


class KgOverlapScorer:
    """Default deterministic scorer: symptom-set overlap against the graph."""

    def __call__(
        self,
        query: DiagnosticQuery,
        graph: KnowledgeGraph,
        specialty: Specialty | None,
        top_k: int,
    ) -> list[Scored]:
        scores = [
            (d.id, kg_confidence(query.symptom_ids, d.id, graph))
            for d in graph.diseases()
            if specialty is None or d.specialty is specialty
        ]
        return _rank(scores, top_k)


class RemoteScorer:
    """Scorer backed by an external HTTP service.

    Confidences outside [0, 1] are clamped and counted as protocol
    warnings; transport failures raise ScorerUnavailable.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_SCORER_TIMEOUT) -> None:
        self.endpoint = endpoint
        self.timeout = timeout
        self.protocol_warnings = 0

    def __call__(
        self,
        query: DiagnosticQuery,
        graph: KnowledgeGraph,
        specialty: Specialty | None,
        top_k: int,
    ) -> list[Scored]:
        body = {
            "query_id": query.query_id,
            "symptom_ids": sorted(query.symptom_ids),
            "specialty": (specialty or Specialty.GENERAL).value,
            "top_k": top_k,
        }
        try:
            resp = requests.post(self.endpoint, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ScorerUnavailable(f"remote scorer {self.endpoint} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerUnavailable(f"remote scorer returned HTTP {resp.status_code}")
        try:
            rows = resp.json()["results"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ScorerUnavailable(f"remote scorer broke the wire contract: {exc}") from exc
        scores: list[Scored] = []
        for row in rows:
            try:
                diagnosis_id = str(row["diagnosis_id"])
                confidence = float(row["confidence"])
            except (KeyError, TypeError, ValueError):
                self.protocol_warnings += 1
                continue
            if not 0.0 <= confidence <= 1.0:
                self.protocol_warnings += 1
                log.warning("remote scorer confidence %r clamped to [0,1]", confidence)
                confidence = min(1.0, max(0.0, confidence))
            scores.append((diagnosis_id, confidence))
        return _rank(scores, top_k)


@dataclass
class AgentProfile:
    agent_id: str
    tier: Tier
    specialty: Specialty
    weight: float = 1.0
    scorer: DiagnosticFunction | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("agent weight must be within [0, 1]")


def default_roster() -> list[AgentProfile]:
    """One GP plus the four consultant domains, uniformly weighted."""
    roster = [AgentProfile("gp", Tier.GP, Specialty.GENERAL)]
    for sp in CONSULTANT_SPECIALTIES:
        roster.append(
            AgentProfile(f"consultant-{sp.value}", Tier.CONSULTANT, sp, weight=0.25)
        )
    return roster


def score(
    agent: AgentProfile,
    query: DiagnosticQuery,
    graph: KnowledgeGraph,
    top_k: int = DEFAULT_TOP_K,
) -> list[Scored]:
    """Run one agent's diagnostic function.

    The GP ranks every disease; a consultant only sees diseases tagged with
    its own specialty. Output sorted by (confidence desc, id asc) and
    truncated to top_k.
    """
    scorer = agent.scorer or KgOverlapScorer()
    domain = None if agent.tier is Tier.GP else agent.specialty
    return scorer(query, graph, domain, top_k)


@dataclass
class ReferralDecision:
    referral: bool
    reason: ReferralReason
    target_specialties: list[Specialty] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "referral": self.referral,
            "reason": self.reason.value,
            "target_specialties": [s.value for s in self.target_specialties],
        }


def in_specialist_set(diagnosis_id: str, specialty: Specialty, config: EngineConfig) -> bool:
    """Membership test for the always-refer diagnosis set."""
    if config.specialist_set_rule is SpecialistSetRule.EXPLICIT_LIST:
        return diagnosis_id in config.specialist_ids
    return specialty is not Specialty.GENERAL


def decide_referral(
    gp_top: Scored,
    top_specialty: Specialty,
    config: EngineConfig,
    candidate_specialties: Sequence[Specialty] = (),
) -> ReferralDecision:
    """Escalate when GP confidence falls below tau or the top diagnosis
    belongs to the specialist set.

    Targets: the top diagnosis's specialty for specialist referrals; for
    below-threshold referrals, the single specialty shared by every
    positive-confidence candidate, or every consultant domain when the
    candidates disagree (or none score above zero).
    """
    diagnosis_id, confidence = gp_top
    if confidence < config.tau:
        reason = ReferralReason.BELOW_THRESHOLD
    elif in_specialist_set(diagnosis_id, top_specialty, config):
        reason = ReferralReason.SPECIALIST_DIAGNOSIS
    else:
        return ReferralDecision(referral=False, reason=ReferralReason.NONE)

    if reason is ReferralReason.SPECIALIST_DIAGNOSIS:
        targets = [top_specialty]
    else:
        positive = set(candidate_specialties)
        if len(positive) == 1 and Specialty.GENERAL not in positive:
            targets = [positive.pop()]
        else:
            targets = list(CONSULTANT_SPECIALTIES)
    return ReferralDecision(referral=True, reason=reason, target_specialties=targets)


@dataclass
class Hop:
    frm: str
    to: str
    ts: float

    def to_doc(self) -> dict:
        return {"from": self.frm, "to": self.to}


@dataclass
class TransferEnvelope:
    """Consultant-compatible form of a query: normalized symptom ids, the
    GP's ranked candidates, and an append-only hop log."""

    query_id: str
    symptom_ids: list[str]
    gp_candidates: list[Scored]
    trace: list[Hop] = field(default_factory=list)


def transfer(
    query: DiagnosticQuery,
    gp_results: list[Scored],
    from_agent: str,
    to_agent: str,
    envelope: TransferEnvelope | None = None,
    clock: Callable[[], float] | None = None,
) -> TransferEnvelope:
    """Package a query for handoff, appending one hop to the trace."""
    now = clock() if clock else 0.0
    if envelope is None:
        envelope = TransferEnvelope(
            query_id=query.query_id,
            symptom_ids=sorted(query.symptom_ids),
            gp_candidates=list(gp_results),
        )
    envelope.trace.append(Hop(from_agent, to_agent, now))
    return envelope


def aggregate(
    results: list[list[Scored]],
    weights: Sequence[float] | None = None,
) -> Scored:
    """Combine per-agent rankings into one diagnosis.

    ``weights=None`` is uniform mode and averages the per-candidate
    confidences exactly; explicit weights must sum to 1 within 1e-9 and
    combine by weighted sum. A candidate an agent did not score contributes
    0 for that agent. Ties break lexicographically.
    """
    if not results or all(not r for r in results):
        raise EmptyResults("nothing to aggregate")
    n = len(results)
    if weights is not None:
        if len(weights) != n:
            raise WeightSumViolation(
                f"{len(weights)} weights for {n} result lists"
            )
        if abs(sum(weights) - 1.0) > WEIGHT_TOLERANCE:
            raise WeightSumViolation(f"weights sum to {sum(weights)!r}, expected 1")

    candidates: set[str] = set()
    tables: list[dict[str, float]] = []
    for agent_results in results:
        table = dict(agent_results)
        tables.append(table)
        candidates.update(table)

    combined: dict[str, float] = {}
    for z in candidates:
        if weights is None:
            combined[z] = sum(t.get(z, 0.0) for t in tables) / n
        else:
            combined[z] = sum(w * t.get(z, 0.0) for w, t in zip(weights, tables))
    return min(combined.items(), key=lambda item: (-item[1], item[0]))


@dataclass
class AgentResult:
    agent_id: str
    specialty: Specialty
    results: list[Scored]

    def to_doc(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "specialty": self.specialty.value,
            "results": [
                {"diagnosis_id": d, "confidence": c} for d, c in self.results
            ],
        }


@dataclass
class DiagnosisOutcome:
    kind: OutcomeKind
    final: Scored
    decision: ReferralDecision
    per_agent: list[AgentResult]
    flags: list[str] = field(default_factory=list)
    trace: list[str] = field(default_factory=list)
    envelope: TransferEnvelope | None = None

    @property
    def hops(self) -> list[Hop]:
        return self.envelope.trace if self.envelope else []

    def to_doc(self) -> dict:
        return {
            "kind": self.kind.value,
            "final": {"diagnosis_id": self.final[0], "confidence": self.final[1]},
            "decision": self.decision.to_doc(),
            "flags": list(self.flags),
            "per_agent": [a.to_doc() for a in self.per_agent],
            "hops": [h.to_doc() for h in self.hops],
            "trace": list(self.trace),
        }


def _validate_roster(roster: Sequence[AgentProfile]) -> tuple[AgentProfile, list[AgentProfile]]:
    gps = [a for a in roster if a.tier is Tier.GP]
    consultants = [a for a in roster if a.tier is Tier.CONSULTANT]
    if len(gps) != 1 or not consultants:
        raise RosterError("roster needs exactly one GP and at least one consultant")
    return gps[0], sorted(consultants, key=lambda a: a.agent_id)


def diagnose(
    query: DiagnosticQuery,
    config: EngineConfig,
    roster: Sequence[AgentProfile],
    graph: KnowledgeGraph,
    clock: Callable[[], float] | None = None,
) -> DiagnosisOutcome:
    """Run the full triage protocol for one query.

    GP ranking, referral decision, and - on referral - either a single
    consultant's verdict or a weighted aggregation across consultants.
    Referral outcomes that still land below tau carry a low-confidence
    flag. The per-agent tables, decision, and hop log are all recorded.
    """
    gp, consultants = _validate_roster(roster)
    gp_results = score(gp, query, graph, config.top_k)
    if not gp_results:
        raise EmptyResults("graph has no diseases to rank")

    trace: list[str] = []
    top = gp_results[0]
    top_specialty = graph.get_entity(top[0]).specialty
    candidate_specialties = [
        graph.get_entity(d).specialty for d, c in gp_results if c > 0
    ]
    trace.append(f"gp ranked {len(gp_results)} candidate(s); top {top[0]} at {top[1]:.6f}")
    decision = decide_referral(top, top_specialty, config, candidate_specialties)
    per_agent = [AgentResult(gp.agent_id, gp.specialty, gp_results)]

    if not decision.referral:
        trace.append(f"gp retained the case (confidence >= {config.tau:.6f})")
        return DiagnosisOutcome(
            kind=OutcomeKind.GP_DIRECT,
            final=top,
            decision=decision,
            per_agent=per_agent,
            trace=trace,
        )

    trace.append(f"referral: {decision.reason.value}")
    by_specialty = {c.specialty: c for c in consultants}
    consulted: list[AgentProfile]
    if len(decision.target_specialties) == 1:
        target = decision.target_specialties[0]
        if target in by_specialty:
            consulted = [by_specialty[target]]
        else:
            trace.append(
                f"no consultant for {target.value}; aggregating over all consultants"
            )
            consulted = list(consultants)
    else:
        consulted = [c for c in consultants if c.specialty in decision.target_specialties]
        if not consulted:
            consulted = list(consultants)

    envelope: TransferEnvelope | None = None
    consulted_results: list[list[Scored]] = []
    for consultant in consulted:
        envelope = transfer(query, gp_results, gp.agent_id, consultant.agent_id, envelope, clock)
        results = score(consultant, query, graph, config.top_k)
        consulted_results.append(results)
        per_agent.append(AgentResult(consultant.agent_id, consultant.specialty, results))

    if len(consulted) == 1 and consulted_results[0]:
        kind = OutcomeKind.CONSULTANT_SINGLE
        final = consulted_results[0][0]
        trace.append(f"{consulted[0].agent_id} answered with {final[0]} at {final[1]:.6f}")
    else:
        if len(consulted) == 1:
            # targeted consultant had no diseases in its domain: widen
            trace.append(
                f"{consulted[0].agent_id} returned no candidates; aggregating over all consultants"
            )
            already = {c.agent_id for c in consulted}
            for consultant in consultants:
                if consultant.agent_id in already:
                    continue
                envelope = transfer(
                    query, gp_results, gp.agent_id, consultant.agent_id, envelope, clock
                )
                results = score(consultant, query, graph, config.top_k)
                consulted_results.append(results)
                per_agent.append(AgentResult(consultant.agent_id, consultant.specialty, results))
            consulted = list(consultants)
        kind = OutcomeKind.CONSULTANT_AGGREGATED
        if all(not r for r in consulted_results):
            # nothing in any consultant's domain: keep the GP's own answer
            final = top
            trace.append("consultants returned no candidates; gp ranking retained")
        else:
            weights = _aggregation_weights(consulted, config)
            final = aggregate(consulted_results, weights)
            trace.append(
                f"aggregated {len(consulted_results)} consultant(s) "
                f"({config.aggregation.value}); final {final[0]} at {final[1]:.6f}"
            )

    flags = []
    if final[1] < config.tau:
        flags.append("low-confidence")
        trace.append("all consulted agents stayed below the referral threshold")
    return DiagnosisOutcome(
        kind=kind,
        final=final,
        decision=decision,
        per_agent=per_agent,
        flags=flags,
        trace=trace,
        envelope=envelope,
    )


def _aggregation_weights(
    consulted: Sequence[AgentProfile], config: EngineConfig
) -> list[float] | None:
    """Weights over the consulted set; renormalized so they sum to 1."""
    if config.aggregation is AggregationMode.UNIFORM:
        return None
    total = sum(c.weight for c in consulted)
    if total <= 0:
        return None
    return [c.weight / total for c in consulted]


def update_gp_knowledge(
    graph: KnowledgeGraph,
    approved_triples: Sequence[RelationTriple],
    entities: Sequence[Entity] = (),
) -> KnowledgeGraph:
    """Merge a batch of approved knowledge into the GP-visible graph.

    Scoring reflects the new edges immediately; the edge count never
    decreases. Dangling content raises IntegrityViolation, non-approved
    content UnapprovedInput.
    """
    graph.expand(entities, approved_triples)
    return graph
