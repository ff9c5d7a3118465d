"""Bayesian activity networks with typed nodes and gating constraints.

Nodes carry a class (state fluent, action, activity, grouping), an
ordered parent list with a complete CPT, and optional temporal/count
constraints that gate whether the node's sentence counts as observed
true.  Inference is exact enumeration over the unknowns — network
sizes are small by construction (one grouping layer feeding a single
target) — and the full term list of an inference is exposed for
auditability.

Wall-clock windows are always measured in seconds derived from event
payload timestamps, never in reasoner ticks.
"""

from __future__ import annotations

import itertools
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Protocol, Sequence

from .errors import (
    CycleError, IncompleteCPT, PhaseNotEntered, SchemaError, ZeroEvidence,
)


class NodeClass(Enum):
    STATE_FLUENT = "StateFluent"
    ACTIVITY = "Activity"
    ACTION = "Action"
    GROUPING = "Grouping"


class EBNKind(Enum):
    RECOGNITION = "Recognition"
    MONITORING = "Monitoring"


class ConstraintOp(Enum):
    MORE_THAN_X_TIMES = "MoreThanXTimes"
    LESS_THAN_X_TIMES = "LessThanXTimes"
    IN_THE_LAST_X_SEC = "InTheLastXSec"
    FOR_AT_LEAST_X_SEC = "ForAtLeastXSec"
    FLUENT_HOLDS = "FluentHolds"
    FLUENT_NOT_HOLDS = "FluentNotHolds"


class ConstraintStatus(Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    NO_DATA = "NoData"


@dataclass(frozen=True, slots=True)
class NodeConstraint:
    op: ConstraintOp
    subject: str
    x: int = 0

    def __post_init__(self):
        if self.x < 0:
            raise SchemaError(f"constraint parameter must be >= 0, got {self.x}")


@dataclass
class EBNNode:
    label: str
    node_class: NodeClass
    parents: tuple[str, ...] = ()
    cpt: dict[tuple[bool, ...], float] = field(default_factory=dict)
    constraints: tuple[NodeConstraint, ...] = ()
    subject: Optional[str] = None   # world reference; defaults to the label

    def probability(self, parent_values: tuple[bool, ...]) -> float:
        try:
            return self.cpt[parent_values]
        except KeyError:
            raise IncompleteCPT(f"node {self.label}: no CPT row for {parent_values}")

    @property
    def world_subject(self) -> str:
        return self.subject if self.subject is not None else self.label


@dataclass
class EBN:
    nodes: dict[str, EBNNode]
    kind: EBNKind
    target: Optional[str] = None          # recognition graphs
    entry: Optional[str] = None           # monitoring graphs
    exits: frozenset[str] = frozenset()
    _order: tuple[str, ...] = ()          # topological, set by validate()

    def validate(self) -> "EBN":
        for n in self.nodes.values():
            for p in n.parents:
                if p not in self.nodes:
                    raise SchemaError(f"node {n.label}: unknown parent {p}")
            want = 2 ** len(n.parents)
            if len(n.cpt) != want:
                raise IncompleteCPT(
                    f"node {n.label}: {len(n.cpt)} CPT rows, expected {want}")
            for key, p in n.cpt.items():
                if len(key) != len(n.parents):
                    raise IncompleteCPT(f"node {n.label}: malformed row {key}")
                if not (0.0 <= p <= 1.0):
                    raise SchemaError(f"node {n.label}: probability {p} out of range")
        self._order = self._toposort()
        if self.kind is EBNKind.RECOGNITION:
            if self.target is None or self.target not in self.nodes:
                raise SchemaError("recognition graph needs a target node")
            for n in self.nodes.values():
                if n.node_class is NodeClass.GROUPING:
                    children = [c.label for c in self.nodes.values() if n.label in c.parents]
                    if children != [self.target]:
                        raise SchemaError(
                            f"grouping node {n.label} must feed only the target")
        else:
            if self.entry is None or self.entry not in self.nodes:
                raise SchemaError("monitoring graph needs an entry node")
            missing = [x for x in self.exits if x not in self.nodes]
            if missing:
                raise SchemaError(f"unknown exit nodes {missing}")
        return self

    def _toposort(self) -> tuple[str, ...]:
        order, mark = [], {}

        def visit(label: str):
            state = mark.get(label)
            if state == 1:
                raise CycleError(f"cycle through node {label}")
            if state == 2:
                return
            mark[label] = 1
            for p in self.nodes[label].parents:
                visit(p)
            mark[label] = 2
            order.append(label)

        for label in sorted(self.nodes):
            visit(label)
        return tuple(order)

    @property
    def order(self) -> tuple[str, ...]:
        if not self._order:
            self._order = self._toposort()
        return self._order


@dataclass
class ActivityNetwork:
    activity: str
    recognition: EBN
    monitoring: tuple[EBN, ...] = ()


ObservationVector = Mapping[str, bool]


# ---------------------------------------------------------------------------
# Inference


def joint(ebn: EBN, full: Mapping[str, bool]) -> float:
    """Product of one CPT factor per node under a total assignment."""
    p = 1.0
    for label in ebn.order:
        node = ebn.nodes[label]
        row = node.probability(tuple(full[par] for par in node.parents))
        p *= row if full[label] else 1.0 - row
    return p


@dataclass(frozen=True)
class JointTerm:
    """One summand of an enumeration: a full assignment and its factors."""
    assignment: tuple[tuple[str, bool], ...]
    factors: tuple[tuple[str, bool, float], ...]   # (label, value, CPT row prob)

    @property
    def product(self) -> float:
        return math.prod((p if v else 1.0 - p) for _, v, p in self.factors)


@dataclass(frozen=True)
class InferenceTrace:
    numerator_terms: tuple[JointTerm, ...]
    denominator_terms: tuple[JointTerm, ...]

    @property
    def numerator(self) -> float:
        return sum(t.product for t in self.numerator_terms)

    @property
    def denominator(self) -> float:
        return sum(t.product for t in self.denominator_terms)


def enumerate_terms(ebn: EBN, fixed: Mapping[str, bool]) -> list[JointTerm]:
    """Every completion of `fixed`, each with its per-node factor list."""
    unknown = [l for l in ebn.order if l not in fixed]
    terms = []
    for combo in itertools.product((True, False), repeat=len(unknown)):
        full = dict(fixed)
        full.update(zip(unknown, combo))
        factors = []
        for label in ebn.order:
            node = ebn.nodes[label]
            row = node.probability(tuple(full[par] for par in node.parents))
            factors.append((label, full[label], row))
        terms.append(JointTerm(tuple(sorted(full.items())), tuple(factors)))
    return terms


def infer(ebn: EBN, target: str, obs: ObservationVector) -> float:
    return infer_traced(ebn, target, obs).numerator / _denominator(ebn, target, obs)


def infer_traced(ebn: EBN, target: str, obs: ObservationVector) -> InferenceTrace:
    """Conditional probability of target=True given the observations,
    with the full numerator/denominator term lists."""
    if target in obs:
        raise SchemaError(f"target {target} must not be observed")
    unknown_labels = [l for l in obs if l not in ebn.nodes]
    if unknown_labels:
        raise SchemaError(f"observed labels not in the network: {unknown_labels}")
    num = enumerate_terms(ebn, {**obs, target: True})
    den = enumerate_terms(ebn, dict(obs))
    trace = InferenceTrace(tuple(num), tuple(den))
    if trace.denominator == 0.0:
        raise ZeroEvidence(f"observations {dict(obs)} have probability zero")
    return trace


def _denominator(ebn: EBN, target: str, obs: ObservationVector) -> float:
    d = sum(t.product for t in enumerate_terms(ebn, dict(obs)))
    if d == 0.0:
        raise ZeroEvidence(f"observations {dict(obs)} have probability zero")
    return d


# ---------------------------------------------------------------------------
# Constraints against the world


class WorldView(Protocol):
    """What the constraint evaluator needs to know about the world.

    `None` answers mean "no data".  Times are wall-clock seconds taken
    from event payloads.
    """

    def fluent_value(self, subject: str) -> Optional[bool]: ...
    def fluent_true_for_s(self, subject: str, now_s: float) -> Optional[float]: ...
    def event_times_s(self, subject: str) -> Optional[Sequence[float]]: ...


def evaluate_constraints(node: EBNNode, view: WorldView, now_s: float) -> ConstraintStatus:
    """Conjoin the node's constraints: any violation wins, then any
    missing data, else satisfied.  Count operators share the node's
    window (whole history when no window constraint is present)."""
    window = None
    for c in node.constraints:
        if c.op is ConstraintOp.IN_THE_LAST_X_SEC:
            window = c.x if window is None else min(window, c.x)
    statuses = []
    for c in node.constraints:
        statuses.append(_evaluate_one(c, view, now_s, window))
    if ConstraintStatus.VIOLATED in statuses:
        return ConstraintStatus.VIOLATED
    if ConstraintStatus.NO_DATA in statuses:
        return ConstraintStatus.NO_DATA
    return ConstraintStatus.SATISFIED


def _count_in_window(c: NodeConstraint, view: WorldView, now_s: float,
                     window: Optional[int]) -> Optional[int]:
    times = view.event_times_s(c.subject)
    if times is None:
        return None if window is None else 0
    if window is None:
        return len(times)
    return sum(1 for s in times if now_s - window <= s <= now_s)


def _evaluate_one(c: NodeConstraint, view: WorldView, now_s: float,
                  window: Optional[int]) -> ConstraintStatus:
    if c.op is ConstraintOp.IN_THE_LAST_X_SEC:
        # pure window declaration: checked through the count operators;
        # alone it requires at least one occurrence in the window
        count = _count_in_window(c, view, now_s, c.x)
        if count is None:
            return ConstraintStatus.NO_DATA
        return ConstraintStatus.SATISFIED if count > 0 else ConstraintStatus.VIOLATED
    if c.op in (ConstraintOp.MORE_THAN_X_TIMES, ConstraintOp.LESS_THAN_X_TIMES):
        count = _count_in_window(c, view, now_s, window)
        if count is None:
            return ConstraintStatus.NO_DATA
        ok = count > c.x if c.op is ConstraintOp.MORE_THAN_X_TIMES else count < c.x
        return ConstraintStatus.SATISFIED if ok else ConstraintStatus.VIOLATED
    if c.op is ConstraintOp.FOR_AT_LEAST_X_SEC:
        dur = view.fluent_true_for_s(c.subject, now_s)
        if dur is None:
            return ConstraintStatus.NO_DATA
        return ConstraintStatus.SATISFIED if dur >= c.x else ConstraintStatus.VIOLATED
    value = view.fluent_value(c.subject)
    if value is None:
        return ConstraintStatus.NO_DATA
    want = c.op is ConstraintOp.FLUENT_HOLDS
    return ConstraintStatus.SATISFIED if value == want else ConstraintStatus.VIOLATED


def build_observation_vector(an: ActivityNetwork, view: WorldView,
                             now_s: float) -> dict[str, bool]:
    """Three-way routing per node of the recognition graph: observed
    True when the node's sentence holds and its constraints are
    satisfied, False on a false sentence or a violated constraint, and
    omitted (left to enumeration) when there is no data.  The target,
    grouping nodes and other activities' nodes are always latent."""
    ebn = an.recognition
    out: dict[str, bool] = {}
    for label in ebn.order:
        node = ebn.nodes[label]
        if label == ebn.target or node.node_class in (NodeClass.GROUPING, NodeClass.ACTIVITY):
            continue
        sentence = _sentence_value(node, view, now_s)
        status = (evaluate_constraints(node, view, now_s)
                  if node.constraints else ConstraintStatus.SATISFIED)
        if status is ConstraintStatus.VIOLATED:
            out[label] = False
        elif sentence is False:
            out[label] = False
        elif sentence is True and status is ConstraintStatus.SATISFIED:
            out[label] = True
        # NoData either way: omitted
    return out


def _sentence_value(node: EBNNode, view: WorldView, now_s: float) -> Optional[bool]:
    if node.node_class is NodeClass.STATE_FLUENT:
        return view.fluent_value(node.world_subject)
    if node.node_class is NodeClass.ACTION:
        times = view.event_times_s(node.world_subject)
        if times is None:
            return None
        return len(times) > 0
    return None


def monitor(an: ActivityNetwork, phase: int, obs: ObservationVector,
            view: WorldView, now_s: float) -> dict[str, float]:
    """Probabilities of the not-yet-performed actions of one monitoring
    phase, conditioned on what was observed."""
    try:
        ebn = an.monitoring[phase]
    except IndexError:
        raise PhaseNotEntered(f"activity {an.activity} has no phase {phase}")
    entry = ebn.nodes[ebn.entry]
    if entry.constraints and evaluate_constraints(entry, view, now_s) is not ConstraintStatus.SATISFIED:
        raise PhaseNotEntered(f"entry node {entry.label} is not satisfied")
    scoped = {l: v for l, v in obs.items() if l in ebn.nodes}
    out = {}
    for label in ebn.order:
        node = ebn.nodes[label]
        if node.node_class is NodeClass.ACTION and label not in scoped:
            out[label] = infer(ebn, label, scoped)
    return out


# ---------------------------------------------------------------------------
# XML loading


def load_ebn(xml_text: str) -> ActivityNetwork:
    """One document per activity: a recognition `network` root with
    optional nested monitoring `network` elements."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as e:
        raise SchemaError(f"not well-formed XML: {e}")
    if root.tag != "network":
        raise SchemaError(f"expected <network> root, found <{root.tag}>")
    activity = root.get("activity")
    if not activity:
        raise SchemaError("network element needs an activity attribute")
    recognition = _parse_network(root, activity)
    if recognition.kind is not EBNKind.RECOGNITION:
        raise SchemaError("the root network must have kind='Recognition'")
    monitoring = tuple(_parse_network(el, activity)
                       for el in root.findall("network"))
    for m in monitoring:
        if m.kind is not EBNKind.MONITORING:
            raise SchemaError("nested networks must have kind='Monitoring'")
    return ActivityNetwork(activity, recognition, monitoring)


def _parse_network(el: ET.Element, activity: str) -> EBN:
    kind_attr = el.get("kind", "Recognition")
    try:
        kind = EBNKind(kind_attr)
    except ValueError:
        raise SchemaError(f"unknown network kind {kind_attr!r}")
    nodes: dict[str, EBNNode] = {}
    for nel in el.findall("node"):
        node = _parse_node(nel)
        if node.label in nodes:
            raise SchemaError(f"duplicate node label {node.label}")
        nodes[node.label] = node
    exits = frozenset(x for x in (el.get("exits") or "").split(",") if x)
    ebn = EBN(nodes=nodes, kind=kind, target=el.get("target"),
              entry=el.get("entry"), exits=exits)
    return ebn.validate()


def _parse_node(el: ET.Element) -> EBNNode:
    label = el.get("label")
    if not label:
        raise SchemaError("node element needs a label")
    cls_attr = el.get("class")
    try:
        node_class = NodeClass(cls_attr)
    except ValueError:
        raise SchemaError(f"node {label}: unknown class {cls_attr!r}")
    parents_el = el.find("parents")
    parents: tuple[str, ...] = ()
    if parents_el is not None and parents_el.text and parents_el.text.strip():
        parents = tuple(p.strip() for p in parents_el.text.split(","))
    cpt: dict[tuple[bool, ...], float] = {}
    cpt_el = el.find("cpt")
    if cpt_el is None:
        raise IncompleteCPT(f"node {label}: missing cpt element")
    for row in cpt_el.findall("row"):
        key = _parse_pattern(row.get("pattern", ""), parents, label)
        try:
            p = float(row.get("p"))
        except (TypeError, ValueError):
            raise SchemaError(f"node {label}: bad probability {row.get('p')!r}")
        if key in cpt:
            raise SchemaError(f"node {label}: duplicate row {row.get('pattern')!r}")
        cpt[key] = p
    constraints = []
    for cel in el.findall("constraint"):
        try:
            op = ConstraintOp(cel.get("op"))
        except ValueError:
            raise SchemaError(f"node {label}: unknown constraint op {cel.get('op')!r}")
        constraints.append(NodeConstraint(op, cel.get("subject") or label,
                                          int(cel.get("x", "0"))))
    return EBNNode(label=label, node_class=node_class, parents=parents,
                   cpt=cpt, constraints=tuple(constraints), subject=el.get("subject"))


def _parse_pattern(pattern: str, parents: tuple[str, ...], label: str) -> tuple[bool, ...]:
    """'gob,!gt,!tb' → (True, False, False) in the parents' order."""
    entries = [p.strip() for p in pattern.split(",") if p.strip()]
    if len(entries) != len(parents):
        raise IncompleteCPT(
            f"node {label}: pattern {pattern!r} does not cover parents {parents}")
    values: dict[str, bool] = {}
    for e in entries:
        neg = e.startswith("!")
        name = e[1:] if neg else e
        if name not in parents or name in values:
            raise SchemaError(f"node {label}: bad pattern entry {e!r}")
        values[name] = not neg
    return tuple(values[p] for p in parents)


def load_repository(path: str) -> dict[str, ActivityNetwork]:
    """All .xml files of a directory, keyed by activity name."""
    out: dict[str, ActivityNetwork] = {}
    for name in sorted(os.listdir(path)):
        if not name.endswith(".xml"):
            continue
        with open(os.path.join(path, name), encoding="utf-8") as fh:
            an = load_ebn(fh.read())
        if an.activity in out:
            raise SchemaError(f"duplicate activity {an.activity} in repository")
        out[an.activity] = an
    return out
