import pytest
from hypothesis import given, strategies as st

from eventcalc.core import (
    Compound, Constant, DomainDescription, IntConst, SortDecl, TemplateDecl,
    TemplateKind, Variable, apply_term, compare_terms, ground_instances,
    is_ground, term_variables, unify,
)
from eventcalc.errors import UnknownSort

constants = st.sampled_from([Constant(n) for n in ("A", "B", "C")])
ints = st.integers(-5, 5).map(IntConst)
variables = st.sampled_from([Variable(n) for n in ("x", "y", "z")])


def terms(max_depth=2):
    leaf = st.one_of(constants, ints, variables)
    return st.recursive(
        leaf,
        lambda inner: st.builds(
            Compound,
            st.sampled_from(["F", "G"]),
            st.lists(inner, min_size=0, max_size=3).map(tuple)),
        max_leaves=6)


ground_terms = terms().filter(is_ground)


@given(terms())
def test_variables_iff_not_ground(t):
    assert bool(term_variables(t)) == (not is_ground(t))


@given(terms(), ground_terms)
def test_unify_produces_matching_substitution(pattern, fact):
    sub = unify(pattern, fact)
    if sub is not None:
        assert apply_term(sub, pattern) == fact


@given(ground_terms)
def test_unify_ground_reflexive(t):
    assert unify(t, t) == {}


def test_unify_binds_consistently():
    p = Compound("F", (Variable("x"), Variable("x")))
    assert unify(p, Compound("F", (Constant("A"), Constant("A")))) == {"x": Constant("A")}
    assert unify(p, Compound("F", (Constant("A"), Constant("B")))) is None


def test_unify_respects_existing_bindings():
    p = Compound("F", (Variable("x"),))
    assert unify(p, Compound("F", (Constant("B"),)), {"x": Constant("A")}) is None
    assert unify(p, Compound("F", (Constant("A"),)), {"x": Constant("A")}) is not None


def _domain():
    d = DomainDescription()
    d.sorts["room"] = SortDecl("room", (Constant("Kitchen"), Constant("Hall"), Constant("Bath")))
    d.sorts["n"] = SortDecl("n", (IntConst(1), IntConst(2)))
    d.templates["At"] = TemplateDecl(TemplateKind.FLUENT, "At", ("room",))
    return d


def test_ground_instances_cartesian_in_declaration_order():
    d = _domain()
    d.templates["Pair"] = TemplateDecl(TemplateKind.FLUENT, "Pair", ("room", "n"))
    inst = ground_instances(d.templates["Pair"], d.sorts)
    assert len(inst) == 6
    assert inst[0] == Compound("Pair", (Constant("Kitchen"), IntConst(1)))
    assert inst[-1] == Compound("Pair", (Constant("Bath"), IntConst(2)))


def test_ground_instances_integer_sort_rejected():
    d = _domain()
    d.templates["Tick"] = TemplateDecl(TemplateKind.FLUENT, "Tick", ("integer",))
    with pytest.raises(UnknownSort):
        ground_instances(d.templates["Tick"], d.sorts)


def test_compare_integers_numeric():
    d = _domain()
    assert compare_terms("<", IntConst(2), IntConst(10), d)
    assert not compare_terms(">=", IntConst(2), IntConst(10), d)
    assert compare_terms("=", IntConst(3), IntConst(3), d)


def test_compare_constants_declaration_order():
    d = _domain()
    assert compare_terms("<", Constant("Kitchen"), Constant("Bath"), d)
    assert compare_terms("<>", Constant("Kitchen"), Constant("Hall"), d)


def test_compare_cross_sort_is_error():
    d = _domain()
    with pytest.raises(ValueError):
        compare_terms("<", Constant("Kitchen"), IntConst(1), d)
