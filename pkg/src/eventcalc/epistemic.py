"""Knowledge-level reasoning under partial observability.

Single-model epistemic mode: fluents are known true, known false or
unknown; trigger axioms whose context is only possibly satisfied fire
*potential* events, and the effects of potential events (or of effect
axioms with unknown context) are recorded as hidden causal dependencies
(HCDs) — disjunctive clauses over fluent literals.  Sensing adds a
literal to the knowledge set and runs unit propagation over the clause
set, which can turn correlations into explicit knowledge.

Completeness is not claimed: resolution is plain unit propagation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Optional

from .core import (
    AtomKind, Axiom, AxiomClass, Compound, DomainDescription, EFFECT_CLASSES,
    Literal, Term, apply_literal, apply_term, compare_terms, is_ground,
    unify, variable_sorts, INTEGER_SORT,
)
from .errors import KnowledgeInconsistency, UnknownSort

FluentLiteral = tuple[Term, bool]


class Knowledge(Enum):
    KNOWN_TRUE = "KnownTrue"
    KNOWN_FALSE = "KnownFalse"
    UNKNOWN = "Unknown"


@dataclass(frozen=True, slots=True)
class HCD:
    """A reified disjunction of ground fluent literals."""
    clause: frozenset[FluentLiteral]
    born_at: int

    def __post_init__(self):
        fluents = [f for f, _ in self.clause]
        if len(set(fluents)) != len(fluents):
            raise KnowledgeInconsistency("HCD contains a literal and its negation")


@dataclass(frozen=True, slots=True)
class PotentialEvent:
    event: Term
    unknowns: frozenset[FluentLiteral]   # context literals not known to hold


@dataclass(frozen=True)
class EpistemicState:
    known: dict[Term, bool] = field(default_factory=dict)
    hcds: tuple[HCD, ...] = ()
    potentials: dict[int, frozenset[PotentialEvent]] = field(default_factory=dict)

    def key(self):
        return (frozenset(self.known.items()), frozenset(self.hcds),
                frozenset((t, ev) for t, evs in self.potentials.items() for ev in evs))

    def potential_events(self, t: int) -> frozenset[Term]:
        return frozenset(p.event for p in self.potentials.get(t, frozenset()))


def knows(es: EpistemicState, fluent: Term) -> Knowledge:
    v = es.known.get(fluent)
    if v is None:
        return Knowledge.UNKNOWN
    return Knowledge.KNOWN_TRUE if v else Knowledge.KNOWN_FALSE


# ---------------------------------------------------------------------------
# Unit propagation


def resolve(es: EpistemicState) -> EpistemicState:
    """Unit propagation to fixpoint over the HCD clause set.

    A clause with every literal but one known false promotes the
    remaining literal; satisfied clauses are discarded; an emptied
    clause signals inconsistent knowledge."""
    known = dict(es.known)
    clauses = list(es.hcds)
    changed = True
    while changed:
        changed = False
        keep: list[HCD] = []
        for hcd in clauses:
            satisfied = False
            open_lits: list[FluentLiteral] = []
            for fluent, positive in hcd.clause:
                v = known.get(fluent)
                if v is None:
                    open_lits.append((fluent, positive))
                elif v == positive:
                    satisfied = True
                    break
            if satisfied:
                changed = True
                continue
            if not open_lits:
                raise KnowledgeInconsistency(f"clause {_fmt_clause(hcd.clause)} is violated")
            if len(open_lits) == 1:
                fluent, positive = open_lits[0]
                known[fluent] = positive
                changed = True
                continue
            keep.append(hcd)
        clauses = keep
    return replace(es, known=known, hcds=tuple(clauses))


def sense(es: EpistemicState, fluent: Term, value: bool, t: int) -> EpistemicState:
    """Knowledge-producing action: the literal joins the known set and
    propagation runs to fixpoint.  Idempotent for a repeated value."""
    current = es.known.get(fluent)
    if current is not None:
        if current != value:
            raise KnowledgeInconsistency(
                f"sensed {fluent!r}={value} against known {current}")
        return es
    known = dict(es.known)
    known[fluent] = value
    return resolve(replace(es, known=known))


def _fmt_clause(clause: Iterable[FluentLiteral]) -> str:
    return " v ".join(("" if pos else "~") + repr(f)
                      for f, pos in sorted(clause, key=lambda l: repr(l[0])))


def format_hcd(hcd: HCD) -> str:
    return _fmt_clause(hcd.clause)


# ---------------------------------------------------------------------------
# Tri-valued axiom evaluation


class _Tri(Enum):
    SAT = 1
    VIOLATED = 2
    UNKNOWN = 3


def _eval_literal(lit: Literal, known: dict[Term, bool], narrative: frozenset[Term],
                  domain: DomainDescription) -> _Tri:
    if lit.kind is AtomKind.COMPARISON:
        ok = compare_terms(lit.op, lit.lhs, lit.rhs, domain)
        return _Tri.SAT if ok else _Tri.VIOLATED
    if lit.kind is AtomKind.HAPPENS:
        happened = lit.term in narrative
        return _Tri.SAT if happened == lit.positive else _Tri.VIOLATED
    if lit.kind is AtomKind.RELEASED_AT:
        # release status is not tracked epistemically; unknown fluents
        # subsume released ones in this mode
        return _Tri.VIOLATED if lit.positive else _Tri.SAT
    v = known.get(lit.term)
    if v is None:
        return _Tri.UNKNOWN
    return _Tri.SAT if v == lit.positive else _Tri.VIOLATED


def _groundings(ax: Axiom, domain: DomainDescription,
                seed: Optional[dict[str, Term]] = None) -> Iterator[dict[str, Term]]:
    var_sorts = variable_sorts(ax, domain)
    seed = seed or {}
    free = sorted(v for v in var_sorts if v not in seed and v != ax.time_var)
    pools = []
    for v in free:
        sort_name = var_sorts[v]
        if sort_name == INTEGER_SORT:
            raise UnknownSort(f"cannot enumerate ?{v} over the integer sort")
        pools.append([(v, c) for c in domain.sorts[sort_name].constants])
    for combo in itertools.product(*pools):
        sub = dict(seed)
        sub.update(dict(combo))
        yield sub


def _eval_body(body: tuple[Literal, ...], sub: dict[str, Term], known, narrative,
               domain) -> tuple[_Tri, frozenset[FluentLiteral]]:
    """Overall body status plus the fluent literals that are unknown."""
    unknowns: set[FluentLiteral] = set()
    for lit in body:
        g = apply_literal(sub, lit)
        r = _eval_literal(g, known, narrative, domain)
        if r is _Tri.VIOLATED:
            return _Tri.VIOLATED, frozenset()
        if r is _Tri.UNKNOWN:
            unknowns.add((g.term, g.positive))
    if unknowns:
        return _Tri.UNKNOWN, frozenset(unknowns)
    return _Tri.SAT, frozenset()


# ---------------------------------------------------------------------------
# The epistemic step


@dataclass
class EpistemicStepResult:
    state: EpistemicState
    fired_actual: frozenset[Term]        # trigger events known to occur at t+1
    fired_potential: frozenset[PotentialEvent]


def epistemic_step(es: EpistemicState, domain: DomainDescription,
                   narrative_t: frozenset[Term], t: int) -> EpistemicState:
    """Knowledge state at t+1 from the events at t.

    Actual events with all-known-satisfied effect contexts produce known
    effects; unknown (but unviolated) contexts produce HCDs and lose
    knowledge of the effect fluent.  Potential events recorded for t are
    re-examined against current knowledge: resolved contexts make them
    actual, violated ones discard them, open ones route their effects
    through HCDs extended with the trigger unknowns.
    """
    known = dict(es.known)
    new_known: dict[Term, bool] = {}
    lost: set[Term] = set()
    new_clauses: list[HCD] = []
    causally_touched: set[Term] = set()

    def apply_effect_axioms(event: Term, extra_unknowns: frozenset[FluentLiteral]):
        for ax in domain.sigma:
            sub0 = unify(ax.event, event)
            if sub0 is None:
                continue
            for sub in _groundings(ax, domain, sub0):
                status, unknowns = _eval_body(ax.body, sub, known, narrative_t, domain)
                if status is _Tri.VIOLATED:
                    continue
                fluent = apply_term(sub, ax.fluent)
                if not is_ground(fluent):
                    continue
                unknowns = unknowns | extra_unknowns
                if ax.cls is AxiomClass.RELEASE:
                    lost.add(fluent)
                    continue
                target = ax.cls is AxiomClass.POSITIVE_EFFECT
                if not unknowns:
                    new_known[fluent] = target
                    causally_touched.add(fluent)
                elif known.get(fluent) == target:
                    pass   # effect could not change the fluent; nothing learned or lost
                else:
                    _add_hcd_clauses(new_clauses, known, fluent, target, unknowns, t + 1)
                    lost.add(fluent)

    for event in narrative_t:
        apply_effect_axioms(event, frozenset())
    for pot in es.potentials.get(t, frozenset()):
        open_unknowns = set()
        violated = False
        for fluent, positive in pot.unknowns:
            v = known.get(fluent)
            if v is None:
                open_unknowns.add((fluent, positive))
            elif v != positive:
                violated = True
                break
        if violated:
            continue
        apply_effect_axioms(actual_of_potential(pot.event), frozenset(open_unknowns))

    # knowledge inertia, then changes and losses
    result = dict(known)
    for f in lost:
        if f not in new_known:
            result.pop(f, None)
    for f, v in new_known.items():
        old = result.get(f)
        result[f] = v
        if old is not None and old != v:
            causally_touched.add(f)

    # stale correlations: a causally re-affected fluent invalidates the
    # clauses that mention it
    kept = [h for h in es.hcds
            if not any(fl in causally_touched for fl, _ in h.clause)]
    state = EpistemicState(result, tuple(kept) + tuple(new_clauses), dict(es.potentials))
    return resolve(state)


def _add_hcd_clauses(out: list[HCD], known: dict[Term, bool], fluent: Term,
                     target: bool, unknowns: frozenset[FluentLiteral], born_at: int):
    """Material-implication encoding of a conditional effect.

    Forward: had the unknown context held, the effect holds now.  When
    the effect fluent's prior value is known to differ and nothing else
    is known to cause it, the converse direction also holds: observing
    the effect reveals the context."""
    forward = frozenset([(fluent, target)]) | frozenset((f, not p) for f, p in unknowns)
    _push(out, known, forward, born_at, fluent)
    prior = known.get(fluent)
    if prior is not None and prior != target:
        for f, p in unknowns:
            _push(out, known, frozenset([(fluent, not target), (f, p)]), born_at, fluent)


def _push(out: list[HCD], known: dict[Term, bool], clause: frozenset[FluentLiteral],
          born_at: int, effect_fluent: Optional[Term] = None):
    if len(clause) < 2:
        return
    # subsumption is judged against post-step knowledge: the effect
    # fluent is about to become unknown, so it never subsumes
    if any(f != effect_fluent and known.get(f) == p for f, p in clause):
        return
    fluents = [f for f, _ in clause]
    if len(set(fluents)) != len(fluents):
        return
    hcd = HCD(clause, born_at)
    if hcd not in out:
        out.append(hcd)


def fire_epistemic_triggers(es: EpistemicState, domain: DomainDescription,
                            t: int, narrative_t: frozenset[Term]) -> EpistemicStepResult:
    """Evaluate the trigger axioms at t against current knowledge.

    All-known-satisfied bodies fire actual events; bodies with unknown
    (unviolated) fluents fire potential events, remembered with their
    open context for the next step."""
    actual: set[Term] = set()
    potential: set[PotentialEvent] = set()
    for ax in domain.delta2:
        for sub in _groundings(ax, domain):
            status, unknowns = _eval_body(ax.body, sub, es.known, narrative_t, domain)
            if status is _Tri.VIOLATED:
                continue
            event = apply_term(sub, ax.head.term)
            if not is_ground(event):
                continue
            if status is _Tri.SAT:
                actual.add(event)
            else:
                potential.add(PotentialEvent(_potential_name(event), frozenset(unknowns)))
    potentials = dict(es.potentials)
    if potential:
        potentials[t] = potentials.get(t, frozenset()) | frozenset(potential)
    state = replace(es, potentials=potentials)
    return EpistemicStepResult(state, frozenset(actual), frozenset(potential))


def _potential_name(event: Term) -> Term:
    if isinstance(event, Compound):
        return Compound(event.functor + "_pot", event.args)
    return event


def actual_of_potential(event: Term) -> Term:
    """Inverse of the _pot naming, used when a potential event resolves."""
    if isinstance(event, Compound) and event.functor.endswith("_pot"):
        return Compound(event.functor[:-4], event.args)
    return event
