import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from eventcalc.core import Compound, Constant
from eventcalc.engine import (
    ClosureState, EffectSet, KBMode, Snapshot, StateView, Value,
    WorkingMemory, apply_inertia, close_constraints, derive_effects,
    fire_triggers, semi_destructive_update, snapshot_value,
)
from eventcalc.errors import (
    ConstraintContradiction, HistoryUnavailable, Inconsistency, ModeUnavailable,
)
from eventcalc.parser import parse_domain
from genutil import make_ground_domain

def f(name):
    return Compound(name, ())


def parse_ok(src):
    r = parse_domain(src)
    assert r.ok, [str(d) for d in r.diagnostics]
    return r.domain


FLUENTS = [f(f"F{i}") for i in range(6)]

fluent_sets = st.sets(st.sampled_from(FLUENTS)).map(frozenset)


@given(fluent_sets, fluent_sets, fluent_sets, fluent_sets)
def test_inertia_properties(true, released, initiated, terminated):
    # a snapshot plus a conflict-free effect set
    terminated = terminated - initiated
    src = "\n".join(f"fluent: F{i}()." for i in range(6)) + "\nevent: E()."
    domain = parse_ok(src + "\nInitiates(E(),F0(),?t).")
    wm = WorkingMemory(domain)
    wm.current = Snapshot(true, released, frozenset())
    wm.history[0] = wm.current
    eff = EffectSet(initiated, terminated, frozenset())
    new = apply_inertia(wm, eff, 0)
    # initiated fluents hold; terminated do not; released fluents never carry
    assert initiated <= new.true
    assert not (terminated & new.true)
    assert not ((released - initiated) & new.true - initiated)
    # untouched inertial fluents persist
    untouched = true - released - initiated - terminated
    assert untouched <= new.true
    # release flags are re-captured by initiation/termination
    assert not (new.released & (initiated | terminated))
    assert new.assigned == frozenset()


def test_effect_derivation_and_conflict():
    domain = parse_ok("""
    sort: s(A,B).
    fluent: P(s).
    event: E(s). event: K(s).
    Initiates(E(?x),P(?x),?t).
    Terminates(K(?x),P(?x),?t).
    """)
    wm = WorkingMemory(domain)
    wm.add_events(0, [Compound("E", (Constant("A"),))])
    eff = derive_effects(wm, domain, 0)
    assert eff.initiated == {Compound("P", (Constant("A"),))}
    wm.add_events(0, [Compound("K", (Constant("A"),))])
    with pytest.raises(Inconsistency):
        derive_effects(wm, domain, 0)


def test_conditional_effect_reads_state():
    domain = parse_ok("""
    fluent: P(). fluent: Q().
    event: E().
    HoldsAt(Q(),?t) => Initiates(E(),P(),?t).
    HoldsAt(Q(),0).
    """)
    wm = WorkingMemory(domain)
    wm.add_events(0, [f("E")])
    assert derive_effects(wm, domain, 0).initiated == {f("P")}
    # without the condition nothing fires
    domain2 = parse_ok("""
    fluent: P(). fluent: Q().
    event: E().
    HoldsAt(Q(),?t) => Initiates(E(),P(),?t).
    """)
    wm2 = WorkingMemory(domain2)
    wm2.add_events(0, [f("E")])
    assert not derive_effects(wm2, domain2, 0)


def _closure_domain(constraint_lines):
    src = "\n".join(f"fluent: F{i}()." for i in range(4)) + "\nevent: E().\n"
    src += "Initiates(E(),F0(),?t).\n" + "\n".join(constraint_lines)
    return parse_ok(src)


def _closed(domain, true, released):
    snap = Snapshot(frozenset(true), frozenset(released), frozenset())
    wm = WorkingMemory(domain)
    wm.current = snap
    wm.history[0] = snap
    cs = ClosureState(snap, domain)
    close_constraints(cs, domain.psi, 0, StateView.of(wm))
    return cs


def test_constraint_pins_released_fluent():
    d = _closure_domain(["HoldsAt(F0(),?t) => HoldsAt(F1(),?t)."])
    cs = _closed(d, {f("F0")}, {f("F1")})
    assert cs.value(f("F1")) is Value.TRUE
    # negative head pins false
    d2 = _closure_domain(["HoldsAt(F0(),?t) => ~HoldsAt(F1(),?t)."])
    cs2 = _closed(d2, {f("F0")}, {f("F1")})
    assert cs2.value(f("F1")) is Value.FALSE
    assert f("F1") not in cs2.undetermined()


def test_constraint_contradiction_on_determined_conflict():
    # F1 is not released: determined false, but the constraint forces true
    d = _closure_domain(["HoldsAt(F0(),?t) => HoldsAt(F1(),?t)."])
    snap = Snapshot(frozenset({f("F0")}), frozenset(), frozenset())
    wm = WorkingMemory(d)
    wm.current = snap
    wm.history[0] = snap
    cs = ClosureState(snap, d)
    with pytest.raises(ConstraintContradiction):
        close_constraints(cs, d.psi, 0, StateView.of(wm))


def test_constraint_chain_reaches_fixpoint():
    d = _closure_domain([
        "HoldsAt(F0(),?t) => HoldsAt(F1(),?t).",
        "HoldsAt(F1(),?t) => HoldsAt(F2(),?t).",
        "HoldsAt(F2(),?t) => HoldsAt(F3(),?t).",
    ])
    cs = _closed(d, {f("F0")}, {f("F1"), f("F2"), f("F3")})
    for name in ("F1", "F2", "F3"):
        assert cs.value(f(name)) is Value.TRUE


def test_closure_confluent_under_axiom_permutation():
    rng = random.Random(7)
    lines = [
        "HoldsAt(F0(),?t) => HoldsAt(F1(),?t).",
        "HoldsAt(F1(),?t) => HoldsAt(F2(),?t).",
        "~HoldsAt(F3(),?t) => HoldsAt(F0(),?t).",
        "HoldsAt(F2(),?t) => ~HoldsAt(F3(),?t).",
    ]
    results = set()
    for _ in range(8):
        rng.shuffle(lines)
        d = _closure_domain(lines)
        cs = _closed(d, set(), {f("F0"), f("F1"), f("F2"), f("F3")})
        results.add((frozenset(cs.true), frozenset(cs.pinned)))
    assert len(results) == 1


def test_dormant_body_does_not_fire():
    # F0 undetermined: neither the positive nor the negated body fires
    d = _closure_domain([
        "HoldsAt(F0(),?t) => HoldsAt(F1(),?t).",
        "~HoldsAt(F0(),?t) => HoldsAt(F2(),?t).",
    ])
    cs = _closed(d, set(), {f("F0"), f("F1"), f("F2")})
    assert cs.value(f("F1")) is None
    assert cs.value(f("F2")) is None
    assert set(cs.undetermined()) == {f("F0"), f("F1"), f("F2")}


def test_derived_template_completion():
    d = parse_ok("""
    sort: s(A,B).
    fluent: P(s).
    fluent: D(s).
    released: D.
    event: E(s).
    Initiates(E(?x),P(?x),?t).
    HoldsAt(P(?x),?t) => HoldsAt(D(?x),?t).
    """)
    snap = Snapshot(frozenset({Compound("P", (Constant("A"),))}), frozenset(), frozenset())
    wm = WorkingMemory(d)
    wm.current = snap
    wm.history[0] = snap
    cs = ClosureState(snap, d)
    close_constraints(cs, d.psi, 0, StateView.of(wm))
    final = cs.freeze()
    assert Compound("D", (Constant("A"),)) in final.true
    # the underived instance is completed to false, never undetermined
    assert snapshot_value(final, Compound("D", (Constant("B"),)), d) is Value.FALSE
    assert not cs.undetermined()


def test_derived_fluents_do_not_persist():
    d = parse_ok("""
    fluent: P(). fluent: D().
    released: D.
    event: E().
    Terminates(E(),P(),?t).
    HoldsAt(P(),?t) => HoldsAt(D(),?t).
    HoldsAt(P(),0).
    """)
    from eventcalc.pool import ModelPool
    pool = ModelPool(d)
    assert pool.holds_summary(f("D"), 0) == "True"
    pool._pending_events.setdefault(0, set()).add(f("E"))
    pool.tick()
    assert pool.holds_summary(f("P"), 1) == "False"
    assert pool.holds_summary(f("D"), 1) == "False"


def test_trigger_firing():
    d = parse_ok("""
    fluent: P().
    event: E().
    HoldsAt(P(),?t) => Happens(E(),?t).
    HoldsAt(P(),0).
    """)
    wm = WorkingMemory(d)
    assert fire_triggers(d, 0, StateView.of(wm)) == {f("E")}


def test_semi_destructive_storage_discipline():
    d = parse_ok("fluent: P().\nevent: E().\nInitiates(E(),P(),?t).\nHoldsAt(P(),0).")
    wm = WorkingMemory(d, KBMode.SEMI_DESTRUCTIVE)
    eff = EffectSet()
    snap = semi_destructive_update(wm, eff, 0)
    wm.commit(snap, eff)
    assert wm.holds(f("P"), 1) is Value.TRUE
    with pytest.raises(HistoryUnavailable):
        wm.holds(f("P"), 0)
    # non-destructive memories reject the semi-only entry point
    wm2 = WorkingMemory(d)
    with pytest.raises(ModeUnavailable):
        semi_destructive_update(wm2, eff, 0)


def test_semi_destructive_rejected_for_past_time_domains():
    d = parse_ok("fluent: P(). fluent: Q().\nevent: E().\n"
                 "HoldsAt(Q(),?t-1) => Initiates(E(),P(),?t).")
    assert d.uses_past_time
    with pytest.raises(ModeUnavailable):
        WorkingMemory(d, KBMode.SEMI_DESTRUCTIVE)


def test_mode_equivalence_random_domains():
    # the full 100-domain run lives in the acceptance suite
    from eventcalc.parser import parse_statement, parse_term_text
    from eventcalc.pool import ModelPool
    rng = random.Random(42)
    for _ in range(15):
        src, externals = make_ground_domain(rng, n_fluents=5, n_events=3, horizon=6)
        p_nd = ModelPool(parse_ok(src), KBMode.NON_DESTRUCTIVE)
        p_sd = ModelPool(parse_ok(src), KBMode.SEMI_DESTRUCTIVE)
        for t in range(6):
            for pool in (p_nd, p_sd):
                for ev in externals.get(t, []):
                    # t == clock events go straight onto the queue; later
                    # ticks arrive through the public submit path
                    if t > pool.clock:
                        pool.submit(parse_statement(f"Happens({ev},{t}).", pool.clock))
                    else:
                        pool._pending_events.setdefault(t, set()).add(parse_term_text(ev))
            from eventcalc.errors import GlobalInconsistency
            dead_nd = dead_sd = False
            try:
                p_nd.tick()
            except GlobalInconsistency:
                dead_nd = True
            try:
                p_sd.tick()
            except GlobalInconsistency:
                dead_sd = True
            # both storage modes agree on extinction as well as on states
            assert dead_nd == dead_sd, (src, t)
            if dead_nd:
                break
            assert p_nd.state_set() == p_sd.state_set(), (src, t)
