"""Multi-model management: branching, observation filtering, triggers.

The pool advances every candidate model one tick at a time: external
events are merged into each model's narrative, effects and inertia give
the pre-constraint state, state constraints close it, observations pin
or eliminate, and the remaining undetermined released fluents branch
the model into one child per consistent assignment.  Models whose
current state coincides are merged (the earliest id survives), so a
domain whose only non-determinism is re-released each tick keeps a
stable model count instead of growing exponentially.

In epistemic mode the pool holds a single model and branching is
replaced by knowledge-level bookkeeping (see `epistemic`).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from . import epistemic as ep
from .core import (
    Compound, DomainDescription, GroundFact, HappensFact, HoldsObs,
    ReleasedObs, Term, ground_instances, INTEGER_SORT,
)
from .engine import (
    ClosureState, EffectSet, KBMode, Snapshot, StateView, Value, WorkingMemory,
    apply_inertia, close_constraints, derive_effects, fire_triggers,
    snapshot_value, validate_constraints,
)
from .errors import (
    BranchCapExceeded, ConstraintContradiction, GlobalInconsistency,
    HistoryUnavailable, Inconsistency, KnowledgeInconsistency, ModeUnavailable,
    RejectPast,
)
from .parser import _normalize_functor


@dataclass
class Model:
    id: str
    wm: WorkingMemory
    parent: Optional[str]
    born_at: int
    knowledge: Optional[ep.EpistemicState] = None
    _branch_counter: int = 0

    def next_child_id(self) -> str:
        self._branch_counter += 1
        return f"{self.id}.{self._branch_counter}"

    def state_key(self):
        key: tuple = (self.wm.current,)
        if self.knowledge is not None:
            key += (self.knowledge.key(),)
        return key


@dataclass(frozen=True)
class Elimination:
    model_id: str
    t: int
    reason: str
    detail: str

    def to_dict(self):
        return {"modelId": self.model_id, "t": self.t,
                "reason": self.reason, "detail": self.detail}


@dataclass
class ModelSummary:
    id: str
    parent: Optional[str]
    born_at: int
    true: list[str]
    released: list[str]
    events: list[str]
    known_true: Optional[list[str]] = None
    known_false: Optional[list[str]] = None
    hcds: Optional[list[str]] = None
    potential_events: Optional[list[str]] = None

    def to_dict(self):
        out = {"id": self.id, "parent": self.parent, "bornAt": self.born_at,
               "true": self.true, "released": self.released, "events": self.events}
        if self.known_true is not None:
            out["knownTrue"] = self.known_true
            out["knownFalse"] = self.known_false
            out["hcds"] = self.hcds
            out["potentialEvents"] = self.potential_events
        return out


@dataclass
class TickReport:
    """What one pool tick did, for logs, traces and the UI."""

    t: int                                  # clock after the tick
    survivors: list[str] = field(default_factory=list)
    created: list[str] = field(default_factory=list)
    eliminated: list[Elimination] = field(default_factory=list)
    merged: list[tuple[str, str]] = field(default_factory=list)   # (dropped, into)
    timings_ms: dict[str, float] = field(default_factory=dict)
    models: list[ModelSummary] = field(default_factory=list)
    elapsed_ms: float = 0.0
    fact_count: int = 0          # materialized true fluents across survivors
    rule_firings: int = 0        # effect conclusions + triggered events

    def to_dict(self):
        return {
            "t": self.t,
            "survivors": self.survivors,
            "created": self.created,
            "eliminated": [e.to_dict() for e in self.eliminated],
            "merged": [{"dropped": a, "into": b} for a, b in self.merged],
            "timingsMs": self.timings_ms,
            "models": [m.to_dict() for m in self.models],
            "elapsedMs": self.elapsed_ms,
            "factCount": self.fact_count,
            "ruleFirings": self.rule_firings,
        }


class ModelPool:
    """The online reasoner: a clock, pending inputs and candidate models."""

    def __init__(self, domain: DomainDescription, mode: KBMode = KBMode.NON_DESTRUCTIVE,
                 branch_cap: int = 1024, epistemic: bool = False,
                 collect_summaries: bool = True):
        if epistemic and mode is KBMode.SEMI_DESTRUCTIVE:
            raise ModeUnavailable("epistemic reasoning requires non-destructive storage")
        self.domain = domain
        self.mode = mode
        self.branch_cap = branch_cap
        self.epistemic = epistemic
        # per-tick model summaries are for reporting; bulk runs skip them
        self.collect_summaries = collect_summaries
        self.clock = 0
        self.models: list[Model] = []
        self.reports: list[TickReport] = []
        self.tombstones: list[Elimination] = []
        self._next_root = 0
        self._pending_events: dict[int, set[Term]] = {}
        self._pending_obs: dict[int, list[GroundFact]] = {}
        for t, facts in domain.delta1.items():
            self._pending_events.setdefault(t, set()).update(f.event for f in facts)
        for t, facts in domain.gamma.items():
            if t > 0:
                self._pending_obs.setdefault(t, []).extend(facts)
        self._bootstrap()

    # -- input -------------------------------------------------------------

    def submit(self, fact: GroundFact):
        """Queue a runtime fact; chronology is strict (time > clock)."""
        fact = self._normalize(fact)
        if fact.t <= self.clock:
            raise RejectPast(f"fact for t={fact.t} at clock {self.clock}")
        if isinstance(fact, HappensFact):
            self._pending_events.setdefault(fact.t, set()).add(fact.event)
        else:
            self._pending_obs.setdefault(fact.t, []).append(fact)

    def _normalize(self, fact: GroundFact) -> GroundFact:
        tpls = self.domain.templates
        if isinstance(fact, HappensFact):
            return HappensFact(_normalize_functor(fact.event, tpls), fact.t)
        if isinstance(fact, HoldsObs):
            return HoldsObs(_normalize_functor(fact.fluent, tpls), fact.value, fact.t)
        return ReleasedObs(_normalize_functor(fact.fluent, tpls), fact.t)

    def sense(self, fluent: Term, value: bool) -> None:
        """Knowledge-producing observation at the current clock (epistemic)."""
        if not self.epistemic:
            raise ModeUnavailable("sensing requires epistemic mode")
        fluent = _normalize_functor(fluent, self.domain.templates)
        for m in self.models:
            m.knowledge = ep.sense(m.knowledge, fluent, value, self.clock)

    # -- views -------------------------------------------------------------

    def _pending_at(self, t: int) -> frozenset[Term]:
        return frozenset(self._pending_events.get(t, ()))

    def _model_view(self, m: Model, horizon: int) -> StateView:
        """Reads up to `horizon` from the working memory, events from the
        narrative plus anything already queued for a future tick."""
        wm = m.wm

        def holds_fn(f: Term, at: int) -> Value:
            if at > horizon:
                raise HistoryUnavailable(f"timepoint {at} beyond {horizon}")
            return wm.holds(f, at)

        def happens_fn(at: int) -> frozenset[Term]:
            return wm.narrative_at(at) | self._pending_at(at)

        def true_fn(at: int) -> frozenset[Term]:
            if at > horizon:
                raise HistoryUnavailable(f"timepoint {at} beyond {horizon}")
            return wm.true_fluents(at)

        return StateView(self.domain, holds_fn, happens_fn, true_fn)

    # -- bootstrap ---------------------------------------------------------

    def _bootstrap(self):
        root = Model(f"m{self._next_root}", WorkingMemory(self.domain, self.mode),
                     parent=None, born_at=0)
        self._next_root += 1
        if self.epistemic:
            root.knowledge = self._initial_knowledge()
            self.models = [root]
            self._fire_model_triggers(root, 0)
            return
        cs = ClosureState(root.wm.current, self.domain)
        view = self._model_view(root, 0)
        report = TickReport(t=0)
        try:
            for fact in self.domain.gamma.get(0, ()):
                if isinstance(fact, HoldsObs) and not fact.value:
                    cs.assign(fact.fluent, False)
            close_constraints(cs, self.domain.psi, 0, view)
        except ConstraintContradiction as e:
            raise GlobalInconsistency(f"initial state is unsatisfiable: {e}")
        self.models = self._branch_model(root, cs, EffectSet(), 0, report, bootstrap=True)
        self._dedupe(report)
        for m in self.models:
            self._fire_model_triggers(m, 0)
        if not self.models:
            raise GlobalInconsistency("initial observations are unsatisfiable")

    def _initial_knowledge(self) -> ep.EpistemicState:
        known: dict[Term, bool] = {}
        for name in sorted(self.domain.templates):
            tpl = self.domain.templates[name]
            if tpl.kind.value != "fluent" or name in self.domain.released_templates:
                continue
            if INTEGER_SORT in tpl.arg_sorts:
                continue   # not enumerable; instances default to Unknown
            for f in ground_instances(tpl, self.domain.sorts):
                known[f] = False
        for fact in self.domain.gamma.get(0, ()):
            if isinstance(fact, HoldsObs):
                known[fact.fluent] = fact.value
            elif isinstance(fact, ReleasedObs):
                known.pop(fact.fluent, None)
        return ep.EpistemicState(known=known)

    # -- the tick ----------------------------------------------------------

    def tick(self) -> TickReport:
        t = self.clock
        new_t = t + 1
        started = time.perf_counter()
        report = TickReport(t=new_t)
        externals = frozenset(self._pending_events.get(t, ()))
        obs = self._pending_obs.pop(new_t, [])

        survivors: list[Model] = []
        for m in self.models:
            m_started = time.perf_counter()
            if externals:
                m.wm.add_events(t, externals)
            if self.epistemic:
                produced = self._tick_epistemic(m, t, obs, report)
            else:
                produced = self._tick_classical(m, t, obs, report)
            survivors.extend(produced)
            report.timings_ms[m.id] = (time.perf_counter() - m_started) * 1000.0

        self._pending_events.pop(t, None)
        self.models = survivors
        self.clock = new_t
        self._dedupe(report)
        if len(self.models) > self.branch_cap:
            raise BranchCapExceeded(
                f"{len(self.models)} models exceed the cap {self.branch_cap} at t={new_t}")
        for m in self.models:
            self._fire_model_triggers(m, new_t, report)
        report.survivors = [m.id for m in self.models]
        report.fact_count = sum(len(m.wm.current.true) for m in self.models)
        if self.collect_summaries:
            report.models = [self._summarize(m) for m in self.models]
        report.elapsed_ms = (time.perf_counter() - started) * 1000.0
        self.reports.append(report)
        if not self.models:
            err = GlobalInconsistency(f"all models eliminated at t={new_t}")
            err.report = report
            raise err
        return report

    def _tick_classical(self, m: Model, t: int, obs: list[GroundFact],
                        report: TickReport) -> list[Model]:
        new_t = t + 1
        view = self._model_view(m, t)
        try:
            effects = derive_effects(m.wm, self.domain, t, view)
        except Inconsistency as e:
            self._eliminate(m, new_t, "effect-conflict", str(e), report)
            return []
        report.rule_firings += (len(effects.initiated) + len(effects.terminated)
                                + len(effects.released))
        snap = apply_inertia(m.wm, effects, t)
        cs = ClosureState(snap, self.domain)
        # a wider view: closure and validation may look back at history
        # and at the incoming narrative of the new tick
        wide = self._wide_view(m, t)
        try:
            for fact in obs:
                if isinstance(fact, HoldsObs):
                    cs.assign(fact.fluent, fact.value)
                elif isinstance(fact, ReleasedObs):
                    cs.released.add(fact.fluent)
            close_constraints(cs, self.domain.psi, new_t, wide)
        except ConstraintContradiction as e:
            self._eliminate(m, new_t, "contradiction", str(e), report)
            return []
        return self._branch_model(m, cs, effects, new_t, report)

    def _wide_view(self, m: Model, t: int) -> StateView:
        """Like the model view at t but events of t+1 are also visible
        (the incoming narrative), for constraints that mention them."""
        base = self._model_view(m, t)
        return StateView(self.domain, base.holds, base.happens, base.true_at)

    def _branch_model(self, m: Model, cs: ClosureState, effects: EffectSet,
                      new_t: int, report: TickReport, bootstrap: bool = False) -> list[Model]:
        free = sorted(cs.undetermined(), key=repr)
        if free and 2 ** len(free) > self.branch_cap:
            raise BranchCapExceeded(
                f"{len(free)} undetermined fluents would branch into "
                f"{2 ** len(free)} models (cap {self.branch_cap}) at t={new_t}")
        wide = self._wide_view(m, max(new_t - 1, 0)) if not bootstrap else self._model_view(m, 0)
        candidates: list[ClosureState] = []
        if not free:
            candidates.append(cs)
        else:
            # the parent keeps its id for the branch closest to its prior
            # state, so ids stay put while a fluent remains released
            prior = m.wm.current.true
            combos = sorted(itertools.product((False, True), repeat=len(free)),
                            key=lambda c: [v != (fl in prior)
                                           for fl, v in zip(free, c)])
            for combo in combos:
                c = cs.copy()
                try:
                    for fluent, value in zip(free, combo):
                        c.assign(fluent, value)
                    validate_constraints(c, self.domain.psi, new_t, wide)
                except ConstraintContradiction:
                    continue
                candidates.append(c)
        if not candidates:
            self._eliminate(m, new_t, "no-consistent-branch",
                            f"every assignment of {[repr(f) for f in free]} violates a constraint",
                            report)
            return []
        # all clones are taken before any commit mutates m.wm
        targets = [m]
        for _ in candidates[1:]:
            child = Model(m.next_child_id(), m.wm.clone(), parent=m.id,
                          born_at=new_t, knowledge=m.knowledge)
            report.created.append(child.id)
            targets.append(child)
        out: list[Model] = []
        for target, c in zip(targets, candidates):
            if bootstrap:
                target.wm.current = c.freeze()
                if target.wm.mode is KBMode.NON_DESTRUCTIVE:
                    target.wm.history[0] = target.wm.current
            else:
                target.wm.commit(c.freeze(), effects)
            out.append(target)
        return out

    def _tick_epistemic(self, m: Model, t: int, obs: list[GroundFact],
                        report: TickReport) -> list[Model]:
        new_t = t + 1
        narrative_t = m.wm.narrative_at(t) | self._pending_at(t)
        try:
            es = ep.epistemic_step(m.knowledge, self.domain, narrative_t, t)
            for fact in obs:
                if isinstance(fact, HoldsObs):
                    es = ep.sense(es, fact.fluent, fact.value, new_t)
                elif isinstance(fact, ReleasedObs):
                    known = dict(es.known)
                    known.pop(fact.fluent, None)
                    es = ep.EpistemicState(known, es.hcds, es.potentials)
        except KnowledgeInconsistency as e:
            self._eliminate(m, new_t, "knowledge-inconsistency", str(e), report)
            return []
        m.knowledge = es
        true = frozenset(f for f, v in es.known.items() if v)
        m.wm.commit(Snapshot(true=true), EffectSet())
        return [m]

    def _fire_model_triggers(self, m: Model, t: int, report: Optional[TickReport] = None):
        if self.epistemic:
            result = ep.fire_epistemic_triggers(
                m.knowledge, self.domain, t, m.wm.narrative_at(t) | self._pending_at(t))
            m.knowledge = result.state
            if result.fired_actual:
                m.wm.add_events(t, result.fired_actual)
            if report is not None:
                report.rule_firings += len(result.fired_actual) + len(result.fired_potential)
            return
        view = self._model_view(m, t)
        fired = fire_triggers(self.domain, t, view)
        if fired:
            m.wm.add_events(t, fired)
        if report is not None:
            report.rule_firings += len(fired)

    def _eliminate(self, m: Model, t: int, reason: str, detail: str, report: TickReport):
        e = Elimination(m.id, t, reason, detail)
        report.eliminated.append(e)
        self.tombstones.append(e)

    def _dedupe(self, report: TickReport):
        # the oldest model with a given state survives, so ids stay
        # stable across ticks even while branches churn
        ranked = sorted(self.models, key=lambda m: (m.born_at, len(m.id), m.id))
        seen: dict[tuple, Model] = {}
        for m in ranked:
            key = m.state_key()
            if key in seen:
                report.merged.append((m.id, seen[key].id))
            else:
                seen[key] = m
        survivors = set(id(m) for m in seen.values())
        self.models = [m for m in self.models if id(m) in survivors]

    # -- queries -----------------------------------------------------------

    def model(self, mid: str) -> Model:
        for m in self.models:
            if m.id == mid:
                return m
        raise KeyError(mid)

    def query_holds(self, fluent: Term, t: Optional[int] = None) -> dict[str, Value]:
        fluent = _normalize_functor(fluent, self.domain.templates)
        at = self.clock if t is None else t
        return {m.id: m.wm.holds(fluent, at) for m in self.models}

    def holds_summary(self, fluent: Term, t: Optional[int] = None) -> str:
        """'True'/'False' when every model agrees, else 'Undetermined'."""
        values = set(self.query_holds(fluent, t).values())
        if values == {Value.TRUE}:
            return "True"
        if values == {Value.FALSE}:
            return "False"
        return "Undetermined"

    def _summarize(self, m: Model) -> ModelSummary:
        snap = m.wm.current
        s = ModelSummary(
            id=m.id, parent=m.parent, born_at=m.born_at,
            true=sorted(map(repr, snap.true)),
            released=sorted(repr(f) for f in snap.released if f not in snap.assigned),
            events=sorted(map(repr, m.wm.narrative_at(self.clock))),
        )
        if m.knowledge is not None:
            s.known_true = sorted(repr(f) for f, v in m.knowledge.known.items() if v)
            s.known_false = sorted(repr(f) for f, v in m.knowledge.known.items() if not v)
            s.hcds = sorted(ep.format_hcd(h) for h in m.knowledge.hcds)
            s.potential_events = sorted(repr(e) for e in m.knowledge.potential_events(self.clock))
        return s

    def state_set(self, t: Optional[int] = None) -> frozenset[frozenset[Term]]:
        """The set of distinct true-fluent states across models at t."""
        at = self.clock if t is None else t
        return frozenset(m.wm.snapshot_at(at).true for m in self.models)

    def run_narrative(self, horizon: int) -> list[TickReport]:
        out = []
        while self.clock < horizon:
            out.append(self.tick())
        return out

    def flush_before(self, t: int):
        if t > self.clock:
            raise RejectPast(f"cannot flush the future (t={t}, clock={self.clock})")
        for m in self.models:
            m.wm.flush_before(t)

    def stats(self) -> dict:
        return {
            "clock": self.clock,
            "modelCount": len(self.models),
            "modelIds": [m.id for m in self.models],
            "eliminatedTotal": len(self.tombstones),
            "mode": self.mode.value,
            "epistemic": self.epistemic,
            "branchCap": self.branch_cap,
            "pendingEvents": {str(t): sorted(map(repr, evs))
                              for t, evs in sorted(self._pending_events.items())},
        }
