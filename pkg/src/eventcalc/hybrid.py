"""The three-step smart-space cycle: logic, probabilities, feedback.

Step 1 ticks the reasoner over the incoming sensor events and reads
off the weighted PossActivity hypotheses derived by the rulesets.
Step 2 evaluates the named activities' recognition networks against an
observation vector built from the reasoner state and the wall-clock
event history.  Step 3 feeds the activities above the confidence
threshold back as Recognize events — so the feedback obeys the same
causal semantics as any other event — ticks twice more, and harvests
the DoAction conclusions.  One external action = exactly three ticks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import ebn as ebn_mod
from .core import (
    Compound, Constant, DomainDescription, GroundFact, HappensFact, IntConst,
    Term, is_ground,
)
from .ebn import ActivityNetwork, ConstraintStatus, build_observation_vector
from .engine import Value
from .errors import (
    FormatError, MissingNetwork, UnknownExplanation, ValidationError,
)
from .parser import parse_term_text
from .pool import ModelPool

POSS_ACTIVITY = "PossActivity"
DO_ACTION = "DoAction"
RECOGNIZE = "Recognize"


@dataclass(frozen=True, slots=True)
class PossActivity:
    user: str
    activity: str
    explanation_id: str
    weight: int          # 1 (strongest) .. 5

    def to_dict(self):
        return {"user": self.user, "activity": self.activity,
                "explanationId": self.explanation_id, "weight": self.weight}


@dataclass(frozen=True, slots=True)
class RecognizedActivity:
    user: str
    activity: str
    confidence: float
    at: int

    def to_dict(self):
        return {"user": self.user, "activity": self.activity,
                "confidence": self.confidence, "at": self.at}


@dataclass(frozen=True, slots=True)
class DoAction:
    kind: str            # Notify | Alert | DeviceCommand
    payload: str
    at: int
    cause: Optional[RecognizedActivity] = None

    def to_dict(self):
        return {"kind": self.kind, "payload": self.payload, "at": self.at,
                "cause": self.cause.to_dict() if self.cause else None}


ExplanationCatalog = dict[str, str]


@dataclass
class SessionConfig:
    threshold: float = 0.5
    # weights not listed here are evaluated; listed ones are skipped
    skip_weights: frozenset[int] = frozenset()
    repertoire: dict[str, ActivityNetwork] = field(default_factory=dict)
    catalog: ExplanationCatalog = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ValueError(f"threshold must be in (0,1), got {self.threshold}")


@dataclass
class CycleReport:
    t_start: int
    t_end: int
    poss: list[PossActivity] = field(default_factory=list)
    confidences: dict[str, float] = field(default_factory=dict)
    recognized: list[RecognizedActivity] = field(default_factory=list)
    do_actions: list[DoAction] = field(default_factory=list)

    def to_dict(self):
        return {"tStart": self.t_start, "tEnd": self.t_end,
                "poss": [p.to_dict() for p in self.poss],
                "confidences": self.confidences,
                "recognized": [r.to_dict() for r in self.recognized],
                "doActions": [d.to_dict() for d in self.do_actions]}


def validate_ruleset(domain: DomainDescription) -> None:
    """Static checks the generic parser cannot do: PossActivity weights
    appearing in axiom heads must lie in 1..5."""
    problems = []
    for ax in domain.psi:
        term = ax.head.term
        if isinstance(term, Compound) and term.functor == POSS_ACTIVITY and term.args:
            w = term.args[-1]
            if isinstance(w, IntConst) and not (1 <= w.value <= 5):
                problems.append(f"PossActivity weight {w.value} outside 1..5")
    if problems:
        raise ValidationError(problems)


# ---------------------------------------------------------------------------
# Step 1: hypotheses


def collect_poss_activities(pool: ModelPool, t: int,
                            catalog: Optional[ExplanationCatalog] = None) -> list[PossActivity]:
    """The PossActivity fluents every surviving model agrees on at t."""
    sets = []
    for m in pool.models:
        snap = m.wm.snapshot_at(t)
        sets.append({f for f in snap.true
                     if isinstance(f, Compound) and f.functor == POSS_ACTIVITY})
    agreed = frozenset.intersection(*map(frozenset, sets)) if sets else frozenset()
    out = []
    for f in sorted(agreed, key=repr):
        if len(f.args) != 4:
            raise FormatError(f"malformed hypothesis fluent {f!r}")
        user, activity, expl, weight = f.args
        if not isinstance(weight, IntConst):
            raise FormatError(f"hypothesis weight must be an integer: {f!r}")
        pa = PossActivity(str(user), str(activity), str(expl), weight.value)
        if catalog is not None and pa.explanation_id not in catalog:
            raise UnknownExplanation(pa.explanation_id)
        out.append(pa)
    return out


# ---------------------------------------------------------------------------
# World adapter for the network constraints


class PoolWorldView:
    """Answers the network constraints from the pool's skeptical state
    and a wall-clock event log (payload milliseconds)."""

    def __init__(self, pool: ModelPool, event_log: Sequence[tuple[Term, float]],
                 wall_ms_of_tick):
        self.pool = pool
        self.event_log = event_log     # (event term without payload, seconds)
        self.wall_ms_of_tick = wall_ms_of_tick

    def fluent_value(self, subject: str) -> Optional[bool]:
        term = parse_term_text(subject)
        summary = self.pool.holds_summary(term)
        if summary == "True":
            return True
        if summary == "False":
            return False
        return None

    def fluent_true_for_s(self, subject: str, now_s: float) -> Optional[float]:
        term = parse_term_text(subject)
        if self.fluent_value(subject) is not True:
            return 0.0
        t = self.pool.clock
        since = t
        while since > 0:
            try:
                if self.pool.holds_summary(term, since - 1) != "True":
                    break
            except Exception:
                break
            since -= 1
        start_ms = self.wall_ms_of_tick(since)
        if start_ms is None:
            return None
        return max(0.0, now_s - start_ms / 1000.0)

    def event_times_s(self, subject: str) -> Optional[list[float]]:
        term = parse_term_text(subject)
        times = [s for ev, s in self.event_log if _event_matches(term, ev)]
        return times or None


def _event_matches(pattern: Term, event: Term) -> bool:
    if not (isinstance(pattern, Compound) and isinstance(event, Compound)):
        return pattern == event
    if pattern.functor != event.functor:
        return False
    if len(pattern.args) == len(event.args):
        return pattern.args == event.args
    # pattern without the trailing payload argument
    if len(pattern.args) == len(event.args) - 1:
        return pattern.args == event.args[:-1]
    return False


# ---------------------------------------------------------------------------
# Step 2: scoring


def score(poss: Iterable[PossActivity], view: ebn_mod.WorldView, now_s: float,
          config: SessionConfig) -> dict[str, float]:
    """One recognition inference per activity that passed weight gating."""
    named = {}
    for p in poss:
        if p.weight in config.skip_weights:
            continue
        named.setdefault(p.activity, p)
    out = {}
    for activity in sorted(named):
        an = config.repertoire.get(activity)
        if an is None:
            raise MissingNetwork(activity)
        obs = build_observation_vector(an, view, now_s)
        out[activity] = ebn_mod.infer(an.recognition, an.recognition.target, obs)
    return out


# ---------------------------------------------------------------------------
# The session and its cycle


class HybridSession:
    def __init__(self, domain: DomainDescription, config: SessionConfig,
                 pool: Optional[ModelPool] = None):
        validate_ruleset(domain)
        self.domain = domain
        self.config = config
        self.pool = pool or ModelPool(domain)
        self.now_ms = 0.0
        self.event_log: list[tuple[Term, float]] = []
        self._tick_wall_ms: dict[int, float] = {self.pool.clock: 0.0}
        self.cycles: list[CycleReport] = []

    @property
    def now_s(self) -> float:
        return self.now_ms / 1000.0

    def wall_ms_of_tick(self, t: int) -> Optional[float]:
        if not self._tick_wall_ms:
            return None
        best = [ms for tick, ms in self._tick_wall_ms.items() if tick <= t]
        return max(best) if best else min(self._tick_wall_ms.values())

    def world_view(self) -> PoolWorldView:
        return PoolWorldView(self.pool, self.event_log, self.wall_ms_of_tick)

    def _ingest_event(self, fact: HappensFact):
        if fact.t == -1:   # sentinel: next tick
            fact = HappensFact(fact.event, self.pool.clock + 1)
        payload = _payload_ms(fact.event)
        if payload is not None:
            self.now_ms = max(self.now_ms, float(payload))
            self.event_log.append((fact.event, payload / 1000.0))
        else:
            self.event_log.append((fact.event, self.now_s))
        self.pool.submit(fact)

    def _tick(self):
        self.pool.tick()
        self._tick_wall_ms[self.pool.clock] = self.now_ms

    def run_cycle(self, external: Sequence[GroundFact] = ()) -> CycleReport:
        t_start = self.pool.clock
        for fact in external:
            if isinstance(fact, HappensFact):
                self._ingest_event(fact)
            else:
                self.pool.submit(fact)

        # step 1: logical filtering
        self._tick()
        poss = collect_poss_activities(self.pool, self.pool.clock,
                                       self.config.catalog or None)

        # step 2: probabilistic evaluation
        confidences = score(poss, self.world_view(), self.now_s, self.config)

        # step 3: feedback and actuation
        recognized = []
        pairs = {(p.user, p.activity) for p in poss}
        for activity, conf in sorted(confidences.items()):
            if conf >= self.config.threshold:
                for user, a in sorted(pairs):
                    if a == activity:
                        recognized.append(RecognizedActivity(user, activity, conf,
                                                             self.pool.clock))
        if RECOGNIZE in self.domain.templates:
            for r in recognized:
                self.pool.submit(HappensFact(
                    Compound(RECOGNIZE, (Constant(r.user), Constant(r.activity))),
                    self.pool.clock + 1))
        self._tick()
        self._tick()

        report = CycleReport(t_start=t_start, t_end=self.pool.clock, poss=poss,
                             confidences=confidences, recognized=recognized)
        report.do_actions = self._harvest_do_actions(t_start, recognized)
        self.cycles.append(report)
        return report

    def _harvest_do_actions(self, t_start: int,
                            recognized: list[RecognizedActivity]) -> list[DoAction]:
        by_activity = {r.activity: r for r in recognized}
        seen: set[Term] = set()
        out = []
        for t in range(t_start + 1, self.pool.clock + 1):
            for m in self.pool.models:
                snap = m.wm.snapshot_at(t)
                for f in snap.true:
                    if not (isinstance(f, Compound) and f.functor == DO_ACTION):
                        continue
                    if f in seen:
                        continue
                    seen.add(f)
                    kind = str(f.args[0]) if f.args else "Notify"
                    payload = ",".join(str(a) for a in f.args[1:])
                    cause = next((by_activity[str(a)] for a in f.args[1:]
                                  if str(a) in by_activity), None)
                    out.append(DoAction(kind, payload, t, cause))
        return sorted(out, key=lambda d: (d.at, d.kind, d.payload))


# ---------------------------------------------------------------------------
# Sensor traces


def ingest_trace(path: str, rounds: int = 1, round_offset_ms: int = 15000
                 ) -> list[HappensFact]:
    """JSON-lines sensor log -> chronological Happens schedule.

    Each line is {"event": functor, "args": [...], "payloadMs": int};
    repeating the file for r rounds shifts every payload by
    r*round_offset_ms.  Timepoints are sentinel -1 placeholders: the
    caller feeds each action into its own cycle.
    """
    entries = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{i}: invalid JSON: {e}")
            if not isinstance(obj, dict) or "event" not in obj or "payloadMs" not in obj:
                raise FormatError(f"{path}:{i}: expected event/args/payloadMs object")
            entries.append((obj["event"], obj.get("args", []), int(obj["payloadMs"])))
    out = []
    for r in range(rounds):
        for functor, args, ms in entries:
            terms = tuple(_arg_term(a) for a in args) + (IntConst(ms + r * round_offset_ms),)
            event = Compound(str(functor), terms)
            if not is_ground(event):
                raise FormatError(f"trace event is not ground: {event!r}")
            out.append(HappensFact(event, -1))
    return out


def _arg_term(a) -> Term:
    if isinstance(a, bool):
        raise FormatError(f"boolean trace argument unsupported: {a}")
    if isinstance(a, int):
        return IntConst(a)
    return Constant(str(a))


def _payload_ms(event: Term) -> Optional[int]:
    if isinstance(event, Compound) and event.args and isinstance(event.args[-1], IntConst):
        return event.args[-1].value
    return None
