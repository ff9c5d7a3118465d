"""Working memory and the single-model discrete Event Calculus step.

A `WorkingMemory` holds the per-timepoint fluent state, the event
narrative and the derived effect conclusions for one candidate model.
The step is decomposed into effect derivation, inertia application and
state-constraint closure; the model pool drives these pieces and adds
observation filtering and branching on top.

Negation-as-failure storage: only true fluents are materialized, and a
fluent absent from the snapshot that is not released is false.  Fluent
templates listed in the domain's `released:` declarations are derived
predicates: permanently exempt from inertia, pinned by state
constraints and completed to false when no constraint derives them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Iterator, Optional

from .core import (
    AtomKind, Axiom, AxiomClass, Compound, DomainDescription, EFFECT_CLASSES,
    Literal, Term, apply_literal, apply_term, compare_terms, is_ground,
    term_variables, unify, variable_sorts, INTEGER_SORT,
)
from .errors import (
    ConstraintContradiction, HistoryUnavailable, Inconsistency, ModeUnavailable,
    UnknownSort,
)


class Value(Enum):
    TRUE = "True"
    FALSE = "False"
    RELEASED = "Released"


class KBMode(Enum):
    NON_DESTRUCTIVE = "non-destructive"
    SEMI_DESTRUCTIVE = "semi-destructive"


@dataclass(frozen=True, slots=True)
class Snapshot:
    """Fluent state at one timepoint.

    `true` are the materialized positive fluents; `released` the fluents
    currently exempt from inertia; `assigned` the subset of released
    fluents whose value was fixed this tick (by an observation, a state
    constraint or a branch) — the value being membership in `true`.
    """

    true: frozenset[Term] = frozenset()
    released: frozenset[Term] = frozenset()
    assigned: frozenset[Term] = frozenset()


@dataclass(frozen=True, slots=True)
class EffectSet:
    initiated: frozenset[Term] = frozenset()
    terminated: frozenset[Term] = frozenset()
    released: frozenset[Term] = frozenset()

    def __bool__(self):
        return bool(self.initiated or self.terminated or self.released)


class WorkingMemory:
    """Single-writer store for one model's state, narrative and clock."""

    def __init__(self, domain: DomainDescription, mode: KBMode = KBMode.NON_DESTRUCTIVE,
                 initial: Optional[Snapshot] = None):
        if mode is KBMode.SEMI_DESTRUCTIVE and domain.uses_past_time:
            raise ModeUnavailable("domain references past timepoints; "
                                  "semi-destructive storage is unavailable")
        self.domain = domain
        self.mode = mode
        self.clock = 0
        self.current: Snapshot = initial if initial is not None else _initial_snapshot(domain)
        self.history: dict[int, Snapshot] = {}
        if mode is KBMode.NON_DESTRUCTIVE:
            self.history[0] = self.current
        self.narrative: dict[int, frozenset[Term]] = {}
        self.derived: dict[int, EffectSet] = {}
        self.flushed_before = 0
        self._sigma_index = _index_by_event(domain.sigma)

    # -- queries -----------------------------------------------------------

    def snapshot_at(self, t: int) -> Snapshot:
        if t == self.clock:
            return self.current
        if self.mode is KBMode.SEMI_DESTRUCTIVE:
            raise HistoryUnavailable(f"semi-destructive memory keeps only the clock ({self.clock})")
        if t < self.flushed_before or t not in self.history:
            raise HistoryUnavailable(f"no record for timepoint {t}")
        return self.history[t]

    def holds(self, fluent: Term, t: int) -> Value:
        if t > self.clock:
            raise HistoryUnavailable(f"timepoint {t} is beyond the clock ({self.clock})")
        snap = self.snapshot_at(t)
        return snapshot_value(snap, fluent, self.domain)

    def narrative_at(self, t: int) -> frozenset[Term]:
        return self.narrative.get(t, frozenset())

    def true_fluents(self, t: int) -> frozenset[Term]:
        return self.snapshot_at(t).true

    # -- mutation ----------------------------------------------------------

    def add_events(self, t: int, events: Iterable[Term]):
        self.narrative[t] = self.narrative_at(t) | frozenset(events)

    def commit(self, snapshot: Snapshot, effects: EffectSet):
        """Advance the clock by one, installing the new snapshot."""
        self.derived[self.clock] = effects
        self.clock += 1
        self.current = snapshot
        if self.mode is KBMode.NON_DESTRUCTIVE:
            self.history[self.clock] = snapshot

    def flush_before(self, t: int):
        """Drop per-timepoint records older than t (non-destructive mode)."""
        if self.mode is not KBMode.NON_DESTRUCTIVE:
            return
        for old in [k for k in self.history if k < t]:
            del self.history[old]
        for old in [k for k in self.derived if k < t]:
            del self.derived[old]
        self.flushed_before = max(self.flushed_before, t)

    def clone(self) -> "WorkingMemory":
        other = WorkingMemory.__new__(WorkingMemory)
        other.domain = self.domain
        other.mode = self.mode
        other.clock = self.clock
        other.current = self.current
        other.history = dict(self.history)
        other.narrative = dict(self.narrative)
        other.derived = dict(self.derived)
        other.flushed_before = self.flushed_before
        other._sigma_index = self._sigma_index
        return other


def _initial_snapshot(domain: DomainDescription) -> Snapshot:
    true, released, assigned = set(), set(), set()
    for fact in domain.gamma.get(0, ()):
        if hasattr(fact, "value"):       # HoldsObs
            if fact.value:
                true.add(fact.fluent)
        elif hasattr(fact, "fluent"):    # ReleasedObs
            released.add(fact.fluent)
    for f in true & released:
        assigned.add(f)
    return Snapshot(frozenset(true), frozenset(released), frozenset(assigned))


def snapshot_value(snap: Snapshot, fluent: Term, domain: DomainDescription) -> Value:
    if fluent in snap.true:
        return Value.TRUE
    if isinstance(fluent, Compound) and fluent.functor in domain.released_templates:
        return Value.FALSE   # derived predicate, completed closed-world
    if fluent in snap.released and fluent not in snap.assigned:
        return Value.RELEASED
    return Value.FALSE


def _index_by_event(axioms: tuple[Axiom, ...]) -> dict[str, list[Axiom]]:
    index: dict[str, list[Axiom]] = {}
    for ax in axioms:
        if ax.cls in EFFECT_CLASSES:
            index.setdefault(ax.event.functor, []).append(ax)
    return index


# ---------------------------------------------------------------------------
# Body matching


class StateView:
    """Read view used while matching axiom bodies at timepoint t.

    `holds_fn(f, t)` must answer for t and, in non-destructive mode, for
    earlier timepoints; `happens_fn(t)` yields the event set of a tick;
    `true_fn(t)` the materialized true fluents (for candidate joins).
    """

    def __init__(self, domain: DomainDescription,
                 holds_fn: Callable[[Term, int], Value],
                 happens_fn: Callable[[int], frozenset[Term]],
                 true_fn: Callable[[int], frozenset[Term]]):
        self.domain = domain
        self.holds = holds_fn
        self.happens = happens_fn
        self.true_at = true_fn

    @classmethod
    def of(cls, wm: WorkingMemory) -> "StateView":
        return cls(wm.domain, wm.holds, wm.narrative_at, wm.true_fluents)


def _resolve_time(ref, t: int) -> int:
    return ref.resolve(t)


def _eval_ground_literal(lit: Literal, t: int, view: StateView) -> bool:
    if lit.kind is AtomKind.COMPARISON:
        return compare_terms(lit.op, lit.lhs, lit.rhs, view.domain)
    at = _resolve_time(lit.time, t)
    if lit.kind is AtomKind.HAPPENS:
        happened = lit.term in view.happens(at)
        return happened if lit.positive else not happened
    value = view.holds(lit.term, at)
    if lit.kind is AtomKind.HOLDS_AT:
        return (value is Value.TRUE) if lit.positive else (value is Value.FALSE)
    return (value is Value.RELEASED) if lit.positive else (value is not Value.RELEASED)


def match_body(body: tuple[Literal, ...], t: int, view: StateView,
               sub: dict[str, Term], var_sorts: dict[str, str]) -> Iterator[dict[str, Term]]:
    """All substitutions extending `sub` that satisfy the body at t.

    Positive HoldsAt/Happens literals are joined lazily against the
    materialized true set and the narrative; any variable left unbound is
    enumerated over its sort's constants.
    """
    ground, open_pos, deferred = [], [], []
    for lit in body:
        lit_vars = _unbound_vars(lit, sub)
        if not lit_vars:
            ground.append(lit)
        elif lit.positive and lit.kind in (AtomKind.HOLDS_AT, AtomKind.HAPPENS):
            open_pos.append(lit)
        else:
            deferred.append(lit)

    def recurse(sub: dict[str, Term], open_pos: list[Literal]) -> Iterator[dict[str, Term]]:
        if open_pos:
            lit, rest = open_pos[0], open_pos[1:]
            inst = apply_literal(sub, lit)
            if not _unbound_vars(inst, {}):
                if _eval_ground_literal(inst, t, view):
                    yield from recurse(sub, rest)
                return
            at = _resolve_time(lit.time, t)
            if lit.kind is AtomKind.HAPPENS:
                candidates = view.happens(at)
            else:
                candidates = view.true_at(at)
            functor = inst.term.functor if isinstance(inst.term, Compound) else None
            for cand in candidates:
                if functor is not None and (not isinstance(cand, Compound) or cand.functor != functor):
                    continue
                ext = unify(inst.term, cand, sub)
                if ext is not None:
                    yield from recurse(ext, rest)
            return
        # enumerate any variables still unbound (negative/comparison-only)
        remaining = sorted({v for lit in deferred for v in _unbound_vars(lit, sub)})
        pools = []
        for v in remaining:
            sort_name = var_sorts.get(v)
            if sort_name is None or sort_name == INTEGER_SORT:
                raise UnknownSort(f"cannot enumerate variable ?{v} (sort {sort_name})")
            pools.append([(v, c) for c in view.domain.sorts[sort_name].constants])
        for combo in itertools.product(*pools):
            full = dict(sub)
            full.update(dict(combo))
            if all(_eval_ground_literal(apply_literal(full, lit), t, view)
                   for lit in deferred):
                yield full

    for lit in ground:
        if not _eval_ground_literal(apply_literal(sub, lit), t, view):
            return
    yield from recurse(sub, open_pos)


def _unbound_vars(lit: Literal, sub) -> set[str]:
    from .core import literal_variables
    return {v for v in literal_variables(lit) if v not in sub}


# ---------------------------------------------------------------------------
# Effect derivation and inertia


def derive_effects(wm: WorkingMemory, domain: DomainDescription, t: int,
                   view: Optional[StateView] = None) -> EffectSet:
    """Evaluate the effect axioms against narrative(t) and KB(t).

    Fluents are instantiated on first derivation (lazy); the same ground
    fluent both initiated and terminated at t raises Inconsistency.
    """
    view = view or StateView.of(wm)
    initiated: set[Term] = set()
    terminated: set[Term] = set()
    released: set[Term] = set()
    buckets = {AxiomClass.POSITIVE_EFFECT: initiated,
               AxiomClass.NEGATIVE_EFFECT: terminated,
               AxiomClass.RELEASE: released}
    events = wm.narrative_at(t)
    index = wm._sigma_index
    for event in events:
        if not isinstance(event, Compound):
            continue
        for ax in index.get(event.functor, ()):
            sub = unify(ax.event, event)
            if sub is None:
                continue
            var_sorts = variable_sorts(ax, domain)
            for full in match_body(ax.body, t, view, sub, var_sorts):
                fluent = apply_term(full, ax.fluent)
                if is_ground(fluent):
                    buckets[ax.cls].add(fluent)
    conflict = initiated & terminated
    if conflict:
        raise Inconsistency(f"fluents both initiated and terminated at {t}: {sorted(map(repr, conflict))}")
    return EffectSet(frozenset(initiated), frozenset(terminated), frozenset(released))


def apply_inertia(wm: WorkingMemory, effects: EffectSet, t: int) -> Snapshot:
    """Fluent state at t+1 before constraints: initiated fluents become
    true, inertial true fluents persist, release flags persist and are
    re-captured by initiation/termination.  Branch-assigned values of
    released fluents do not carry over: a fluent still released at t+1 is
    undetermined again."""
    old = wm.snapshot_at(t)
    domain = wm.domain
    removed = effects.terminated | effects.released
    if old.released or domain.released_templates:
        carried = frozenset(
            f for f in old.true
            if f not in old.released and f not in removed
            and not (isinstance(f, Compound) and f.functor in domain.released_templates))
    else:
        carried = old.true - removed if removed else old.true
    true = carried | effects.initiated
    released = (old.released | effects.released) - effects.initiated - effects.terminated
    return Snapshot(true, released, frozenset())


# ---------------------------------------------------------------------------
# State-constraint closure


class ClosureState:
    """Mutable three-valued view of a snapshot under Psi closure.

    A fluent is determined True when materialized, determined False when
    valued-false or inertial-absent, and Unknown while released (or a
    derived predicate) and not yet pinned."""

    def __init__(self, snap: Snapshot, domain: DomainDescription):
        self.domain = domain
        self.true: set[Term] = set(snap.true)
        self.released: set[Term] = set(snap.released)
        self.assigned: set[Term] = set(snap.assigned)
        self.pinned: set[Term] = set()
        self.completing = False

    def _is_derived(self, fluent: Term) -> bool:
        return isinstance(fluent, Compound) and fluent.functor in self.domain.released_templates

    def value(self, fluent: Term) -> Optional[Value]:
        """None means undetermined."""
        if fluent in self.true:
            return Value.TRUE
        if fluent in self.assigned or fluent in self.pinned:
            return Value.FALSE
        if self._is_derived(fluent):
            return Value.FALSE if self.completing else None
        if fluent in self.released:
            return None
        return Value.FALSE

    def pin(self, fluent: Term, value: bool):
        current = self.value(fluent)
        # completed-to-false derived fluents carry a default, not a
        # determination; a constraint firing later may still pin them
        defaulted = (self.completing and self._is_derived(fluent)
                     and fluent not in self.true and fluent not in self.pinned)
        if current is not None and not defaulted:
            if (current is Value.TRUE) != value:
                raise ConstraintContradiction(f"{fluent!r} forced {value} against {current.value}")
            return
        self.pinned.add(fluent)
        if value:
            self.true.add(fluent)

    def assign(self, fluent: Term, value: bool):
        """Observation- or branch-level assignment of a released fluent."""
        current = self.value(fluent)
        if current is not None:
            if (current is Value.TRUE) != value:
                raise ConstraintContradiction(f"{fluent!r} observed {value} against {current.value}")
            return
        self.assigned.add(fluent)
        if value:
            self.true.add(fluent)

    def undetermined(self) -> list[Term]:
        """Materialized released fluents still free for branching."""
        return [f for f in self.released
                if f not in self.assigned and f not in self.pinned and f not in self.true]

    def freeze(self) -> Snapshot:
        assigned = {f for f in self.assigned | self.pinned
                    if f in self.released}
        return Snapshot(frozenset(self.true), frozenset(self.released), frozenset(assigned))

    def copy(self) -> "ClosureState":
        other = ClosureState.__new__(ClosureState)
        other.domain = self.domain
        other.true = set(self.true)
        other.released = set(self.released)
        other.assigned = set(self.assigned)
        other.pinned = set(self.pinned)
        other.completing = self.completing
        return other


def close_constraints(cs: ClosureState, psi: tuple[Axiom, ...], t: int,
                      view: StateView) -> ClosureState:
    """Least-fixpoint application of the state constraints at t.

    A constraint whose body is fully determined-satisfied pins its head
    fluent; bodies touching an Unknown fluent stay dormant.  After the
    fixpoint, unpinned derived predicates are completed to false and the
    constraints re-run until stable.  Contradictions raise
    ConstraintContradiction (the pool turns these into eliminations).
    """
    if not psi:
        return cs

    cv = closure_view(cs, t, view)

    def one_pass() -> bool:
        changed = False
        for ax in psi:
            var_sorts = variable_sorts(ax, cs.domain)
            for sub in list(match_body(ax.body, t, cv, {}, var_sorts)):
                head = apply_literal(sub, ax.head)
                if not is_ground(head.term):
                    continue
                before = (cs.value(head.term), head.term in cs.pinned)
                cs.pin(head.term, head.positive)
                if (cs.value(head.term), head.term in cs.pinned) != before:
                    changed = True
        return changed

    while one_pass():
        pass
    if cs.domain.released_templates:
        cs.completing = True
        while one_pass():
            pass
    validate_constraints(cs, psi, t, view)
    return cs


def closure_view(cs: ClosureState, t: int, view: StateView) -> StateView:
    """View where an undetermined fluent at t reads as Released, which
    satisfies neither a positive nor a negative HoldsAt literal: bodies
    touching it stay dormant until the fluent gets pinned."""

    def holds_fn(f: Term, at: int) -> Value:
        if at == t:
            v = cs.value(f)
            return Value.RELEASED if v is None else v
        return view.holds(f, at)

    def true_fn(at: int) -> frozenset[Term]:
        if at == t:
            return frozenset(cs.true)
        return view.true_at(at)

    return StateView(cs.domain, holds_fn, view.happens, true_fn)


def validate_constraints(cs: ClosureState, psi, t: int, view: StateView):
    """Check every grounded constraint with a determined-satisfied body
    has a satisfied head; used after closure and after branch assignment."""
    cs.completing = True
    cv = closure_view(cs, t, view)
    for ax in psi:
        var_sorts = variable_sorts(ax, cs.domain)
        for sub in match_body(ax.body, t, cv, {}, var_sorts):
            head = apply_literal(sub, ax.head)
            if not is_ground(head.term):
                continue
            v = cs.value(head.term)
            if v is not None and (v is Value.TRUE) != head.positive:
                raise ConstraintContradiction(
                    f"constraint head {head!r} violated at {t}")


# ---------------------------------------------------------------------------
# Triggers


def fire_triggers(domain: DomainDescription, t: int, view: StateView) -> frozenset[Term]:
    """Ground events whose trigger bodies hold at t."""
    fired: set[Term] = set()
    for ax in domain.delta2:
        var_sorts = variable_sorts(ax, domain)
        for sub in match_body(ax.body, t, view, {}, var_sorts):
            event = apply_term(sub, ax.head.term)
            if is_ground(event):
                fired.add(event)
    return frozenset(fired)


# ---------------------------------------------------------------------------
# Semi-destructive update


def semi_destructive_update(wm: WorkingMemory, effects: EffectSet, t: int) -> Snapshot:
    """Single-snapshot update per the destructive-assertion scheme:
    terminated and released fluents leave the snapshot, initiated ones
    join it.  History before t is not retained (the narrative is)."""
    if wm.mode is not KBMode.SEMI_DESTRUCTIVE:
        raise ModeUnavailable("working memory is not in semi-destructive mode")
    return apply_inertia(wm, effects, t)
