import itertools
import math
import random

import pytest

from conftest import fixture_path, read_fixture
from eventcalc.ebn import (
    EBN, ConstraintOp, ConstraintStatus, EBNKind, EBNNode, NodeClass,
    NodeConstraint, build_observation_vector, enumerate_terms,
    evaluate_constraints, infer, infer_traced, joint, load_ebn,
    load_repository, monitor,
)
from eventcalc.errors import (
    CycleError, IncompleteCPT, PhaseNotEntered, SchemaError, ZeroEvidence,
)


@pytest.fixture(scope="module")
def shower():
    return load_ebn(read_fixture("networks", "take_shower.xml"))


# -- loading and validation --------------------------------------------------


def test_fixture_structure(shower):
    ebn = shower.recognition
    assert shower.activity == "TakeShower"
    assert ebn.kind is EBNKind.RECOGNITION
    assert ebn.target == "tsh"
    assert set(ebn.nodes) == {"gob", "gt", "tb", "g1", "tsh"}
    assert ebn.nodes["g1"].parents == ("gob", "gt", "tb")
    assert ebn.nodes["g1"].cpt[(True, False, False)] == 0.6
    assert ebn.nodes["gob"].constraints[0].op is ConstraintOp.FOR_AT_LEAST_X_SEC
    assert ebn.nodes["gob"].world_subject == "InBathroom(Ned)"


def test_load_repository():
    repo = load_repository(fixture_path("networks"))
    assert set(repo) == {"TakeShower", "BrushTeeth"}


def _net(extra="", g1_rows=8):
    rows = "\n".join(
        f'<row pattern="{"" if a else "!"}a,{"" if b else "!"}b" p="0.5"/>'
        for a, b in itertools.product((True, False), repeat=2))
    return f"""
    <network activity="X" kind="Recognition" target="t">
      <node label="a" class="StateFluent"><parents/><cpt><row pattern="" p="0.4"/></cpt></node>
      <node label="b" class="StateFluent"><parents/><cpt><row pattern="" p="0.6"/></cpt></node>
      <node label="t" class="Activity"><parents>a,b</parents><cpt>{rows}</cpt></node>
      {extra}
    </network>
    """


def test_schema_errors():
    with pytest.raises(SchemaError):
        load_ebn("<graph/>")
    with pytest.raises(SchemaError):
        load_ebn('<network kind="Recognition" target="t"/>')
    with pytest.raises(SchemaError):
        load_ebn(_net().replace('target="t"', 'target="missing"'))
    with pytest.raises(SchemaError):
        load_ebn(_net().replace('p="0.4"', 'p="1.4"'))
    with pytest.raises(SchemaError):
        load_ebn(_net().replace("<parents>a,b</parents>", "<parents>a,zz</parents>"))


def test_incomplete_cpt_rejected():
    broken = _net().replace('<row pattern="a,b" p="0.5"/>', "")
    with pytest.raises(IncompleteCPT):
        load_ebn(broken)


def test_cycle_rejected():
    looped = _net().replace(
        '<node label="a" class="StateFluent"><parents/><cpt><row pattern="" p="0.4"/></cpt></node>',
        '<node label="a" class="StateFluent"><parents>t</parents>'
        '<cpt><row pattern="t" p="0.4"/><row pattern="!t" p="0.3"/></cpt></node>')
    with pytest.raises(CycleError):
        load_ebn(looped)


def test_grouping_must_feed_target_only():
    bad = _net(extra='<node label="g" class="Grouping"><parents/>'
                     '<cpt><row pattern="" p="0.5"/></cpt></node>')
    with pytest.raises(SchemaError):
        load_ebn(bad)


def test_duplicate_cpt_row_rejected():
    dup = _net().replace('<row pattern="" p="0.4"/>',
                         '<row pattern="" p="0.4"/><row pattern="" p="0.4"/>')
    with pytest.raises(SchemaError):
        load_ebn(dup)


# -- inference ----------------------------------------------------------------


def test_worked_example_value(shower):
    ebn = shower.recognition
    p = infer(ebn, "tsh", {"gob": True, "gt": False, "tb": False})
    assert abs(p - 0.62) < 1e-12
    p2 = infer(ebn, "tsh", {"gob": True, "tb": False})
    assert abs(p2 - 0.5465) < 1e-12
    p3 = infer(ebn, "tsh", {"gob": True, "gt": False})
    assert abs(p3 - 0.634) < 1e-9


def test_worked_example_denominator_structure(shower):
    # gt stays latent: the denominator enumerates gt x g1 x tsh = 8 full
    # assignments, each a product of one CPT factor per node
    ebn = shower.recognition
    tr = infer_traced(ebn, "tsh", {"gob": True, "tb": False})
    assert len(tr.denominator_terms) == 8
    assert len(tr.numerator_terms) == 4
    for term in tr.denominator_terms:
        assert len(term.factors) == 5
        assert [l for l, _, _ in term.factors] == list(ebn.order)
        world = dict(term.assignment)
        assert world["gob"] is True and world["tb"] is False
        recomputed = math.prod(p if world[l] else 1.0 - p
                               for l, _, p in term.factors)
        assert abs(recomputed - term.product) < 1e-15
    assert abs(tr.numerator / tr.denominator - 0.5465) < 1e-12


def _random_ebn(rng, max_nodes=12):
    n = rng.randint(2, max_nodes)
    labels = [f"n{i}" for i in range(n)]
    nodes = {}
    for i, lab in enumerate(labels):
        parents = tuple(rng.sample(labels[:i], min(i, rng.randint(0, 3))))
        cpt = {combo: rng.random()
               for combo in itertools.product((True, False), repeat=len(parents))}
        nodes[lab] = EBNNode(label=lab, node_class=NodeClass.STATE_FLUENT,
                             parents=parents, cpt=cpt)
    return EBN(nodes=nodes, kind=EBNKind.RECOGNITION, target=labels[-1]).validate()


def _joint_table_conditional(ebn, target, obs):
    labels = list(ebn.order)
    num = den = 0.0
    for combo in itertools.product((True, False), repeat=len(labels)):
        world = dict(zip(labels, combo))
        if any(world[l] != v for l, v in obs.items()):
            continue
        p = joint(ebn, world)
        den += p
        if world[target]:
            num += p
    return num / den


def test_inference_matches_joint_table_oracle_200_networks():
    rng = random.Random(20260824)
    done = 0
    while done < 200:
        ebn = _random_ebn(rng)
        labels = [l for l in ebn.order if l != ebn.target]
        obs = {l: rng.random() < 0.5
               for l in rng.sample(labels, rng.randint(0, min(4, len(labels))))}
        try:
            got = infer(ebn, ebn.target, obs)
        except ZeroEvidence:
            continue
        want = _joint_table_conditional(ebn, ebn.target, obs)
        assert abs(got - want) < 1e-9
        done += 1


def test_inference_normalizes():
    rng = random.Random(7)
    for _ in range(50):
        ebn = _random_ebn(rng, max_nodes=8)
        tr = infer_traced(ebn, ebn.target, {})
        p_true = tr.numerator / tr.denominator
        p_false = sum(t.product for t in enumerate_terms(
            ebn, {ebn.target: False})) / tr.denominator
        assert abs(p_true + p_false - 1.0) < 1e-12


def test_local_markov_property(shower):
    # gt is independent of the non-descendants gob and tb
    ebn = shower.recognition
    base = _joint_table_conditional(ebn, "gt", {})
    for gob, tb in itertools.product((True, False), repeat=2):
        cond = _joint_table_conditional(ebn, "gt", {"gob": gob, "tb": tb})
        assert abs(cond - base) < 1e-12


def test_zero_evidence_raises():
    xml = """
    <network activity="Z" kind="Recognition" target="t">
      <node label="a" class="StateFluent"><parents/><cpt><row pattern="" p="1.0"/></cpt></node>
      <node label="t" class="Activity"><parents>a</parents>
        <cpt><row pattern="a" p="0.5"/><row pattern="!a" p="0.5"/></cpt></node>
    </network>
    """
    ebn = load_ebn(xml).recognition
    with pytest.raises(ZeroEvidence):
        infer(ebn, "t", {"a": False})


def test_observed_target_rejected(shower):
    with pytest.raises(SchemaError):
        infer(shower.recognition, "tsh", {"tsh": True})
    with pytest.raises(SchemaError):
        infer(shower.recognition, "tsh", {"nope": True})


# -- temporal constraints -----------------------------------------------------


class FakeView:
    def __init__(self, fluents=None, durations=None, events=None):
        self.fluents = fluents or {}
        self.durations = durations or {}
        self.events = events or {}

    def fluent_value(self, subject):
        return self.fluents.get(subject)

    def fluent_true_for_s(self, subject, now_s):
        return self.durations.get(subject)

    def event_times_s(self, subject):
        return self.events.get(subject)


def node_with(*constraints):
    return EBNNode(label="n", node_class=NodeClass.ACTION, cpt={(): 0.5},
                   constraints=tuple(constraints))


def test_for_at_least_x_sec():
    n = node_with(NodeConstraint(ConstraintOp.FOR_AT_LEAST_X_SEC, "F", 60))
    assert evaluate_constraints(n, FakeView(durations={"F": 30.0}), 100.0) \
        is ConstraintStatus.VIOLATED
    assert evaluate_constraints(n, FakeView(durations={"F": 61.0}), 100.0) \
        is ConstraintStatus.SATISFIED
    assert evaluate_constraints(n, FakeView(), 100.0) is ConstraintStatus.NO_DATA


def test_fluent_holds_and_not_holds():
    holds = node_with(NodeConstraint(ConstraintOp.FLUENT_HOLDS, "F"))
    not_holds = node_with(NodeConstraint(ConstraintOp.FLUENT_NOT_HOLDS, "F"))
    v_true = FakeView(fluents={"F": True})
    v_false = FakeView(fluents={"F": False})
    assert evaluate_constraints(holds, v_true, 0) is ConstraintStatus.SATISFIED
    assert evaluate_constraints(holds, v_false, 0) is ConstraintStatus.VIOLATED
    assert evaluate_constraints(not_holds, v_false, 0) is ConstraintStatus.SATISFIED
    assert evaluate_constraints(not_holds, v_true, 0) is ConstraintStatus.VIOLATED
    assert evaluate_constraints(holds, FakeView(), 0) is ConstraintStatus.NO_DATA


def test_count_operators_respect_window():
    n = node_with(NodeConstraint(ConstraintOp.MORE_THAN_X_TIMES, "E", 1),
                  NodeConstraint(ConstraintOp.IN_THE_LAST_X_SEC, "E", 10))
    view = FakeView(events={"E": [1.0, 95.0, 99.0]})
    # only the two events inside [90, 100] count: 2 > 1
    assert evaluate_constraints(n, view, 100.0) is ConstraintStatus.SATISFIED
    n2 = node_with(NodeConstraint(ConstraintOp.MORE_THAN_X_TIMES, "E", 2),
                   NodeConstraint(ConstraintOp.IN_THE_LAST_X_SEC, "E", 10))
    assert evaluate_constraints(n2, view, 100.0) is ConstraintStatus.VIOLATED
    # without a window the whole history counts
    n3 = node_with(NodeConstraint(ConstraintOp.MORE_THAN_X_TIMES, "E", 2))
    assert evaluate_constraints(n3, view, 100.0) is ConstraintStatus.SATISFIED


def test_less_than_x_times():
    n = node_with(NodeConstraint(ConstraintOp.LESS_THAN_X_TIMES, "E", 2))
    assert evaluate_constraints(n, FakeView(events={"E": [1.0]}), 10.0) \
        is ConstraintStatus.SATISFIED
    assert evaluate_constraints(n, FakeView(events={"E": [1.0, 2.0]}), 10.0) \
        is ConstraintStatus.VIOLATED


def test_bare_window_requires_an_occurrence():
    n = node_with(NodeConstraint(ConstraintOp.IN_THE_LAST_X_SEC, "E", 10))
    assert evaluate_constraints(n, FakeView(events={"E": [95.0]}), 100.0) \
        is ConstraintStatus.SATISFIED
    assert evaluate_constraints(n, FakeView(events={"E": [5.0]}), 100.0) \
        is ConstraintStatus.VIOLATED
    # a window makes silence meaningful: no record reads as zero events
    assert evaluate_constraints(n, FakeView(), 100.0) is ConstraintStatus.VIOLATED


def test_violated_beats_no_data():
    n = node_with(NodeConstraint(ConstraintOp.FLUENT_HOLDS, "F"),
                  NodeConstraint(ConstraintOp.FLUENT_HOLDS, "G"))
    view = FakeView(fluents={"F": False})   # G has no data
    assert evaluate_constraints(n, view, 0) is ConstraintStatus.VIOLATED


# -- observation-vector routing ----------------------------------------------


def test_build_observation_vector_routing(shower):
    view = FakeView(
        fluents={"InBathroom(Ned)": True, "GoneToToilet(Ned)": False},
        durations={"InBathroom(Ned)": 5.0},
        events={})   # no basin-tap data
    obs = build_observation_vector(shower, view, 100.0)
    assert obs == {"gob": True, "gt": False}
    # violated constraint forces False despite a true sentence
    view2 = FakeView(fluents={"InBathroom(Ned)": True},
                     durations={"InBathroom(Ned)": -1.0})
    obs2 = build_observation_vector(shower, view2, 100.0)
    assert obs2["gob"] is False
    # the target and the grouping node are never observed
    assert "tsh" not in obs and "g1" not in obs


# -- monitoring ---------------------------------------------------------------

MONITORED = """
<network activity="M" kind="Recognition" target="t">
  <node label="a" class="Action"><parents/><cpt><row pattern="" p="0.4"/></cpt></node>
  <node label="t" class="Activity"><parents>a</parents>
    <cpt><row pattern="a" p="0.8"/><row pattern="!a" p="0.1"/></cpt></node>
  <network kind="Monitoring" entry="p1" exits="done">
    <node label="p1" class="StateFluent" subject="Started">
      <parents/><cpt><row pattern="" p="0.5"/></cpt>
      <constraint op="FluentHolds" subject="Started"/>
    </node>
    <node label="done" class="Action"><parents>p1</parents>
      <cpt><row pattern="p1" p="0.7"/><row pattern="!p1" p="0.1"/></cpt></node>
  </network>
</network>
"""


def test_monitoring_phase_probabilities():
    an = load_ebn(MONITORED)
    assert len(an.monitoring) == 1
    view = FakeView(fluents={"Started": True})
    out = monitor(an, 0, {"p1": True}, view, 0.0)
    assert abs(out["done"] - 0.7) < 1e-12


def test_monitoring_phase_not_entered():
    an = load_ebn(MONITORED)
    with pytest.raises(PhaseNotEntered):
        monitor(an, 3, {}, FakeView(), 0.0)
    with pytest.raises(PhaseNotEntered):
        monitor(an, 0, {}, FakeView(fluents={"Started": False}), 0.0)
