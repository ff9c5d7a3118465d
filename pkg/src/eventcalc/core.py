"""Domain model for discrete Event Calculus theories.

Terms, literals, axioms and the six-part domain description, plus
unification, substitution application and on-demand grounding of
fluent/event templates.  All values here are immutable and hashable so
they can be shared freely between concurrently advancing models.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional, Union

from .errors import UnknownSort

INTEGER_SORT = "integer"


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True, slots=True)
class Constant:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Variable:
    name: str  # without the leading '?'

    def __repr__(self):
        return "?" + self.name


@dataclass(frozen=True, slots=True)
class IntConst:
    value: int

    def __repr__(self):
        return str(self.value)


@dataclass(frozen=True, slots=True)
class Compound:
    functor: str
    args: tuple["Term", ...]

    def __repr__(self):
        if not self.args:
            return self.functor
        return f"{self.functor}({','.join(map(repr, self.args))})"


Term = Union[Constant, Variable, IntConst, Compound]
Substitution = Mapping[str, Term]


def is_ground(term: Term) -> bool:
    if isinstance(term, Variable):
        return False
    if isinstance(term, Compound):
        return all(is_ground(a) for a in term.args)
    return True


def term_variables(term: Term) -> set[str]:
    if isinstance(term, Variable):
        return {term.name}
    if isinstance(term, Compound):
        out: set[str] = set()
        for a in term.args:
            out |= term_variables(a)
        return out
    return set()


def unify(pattern: Term, fact: Term, bindings: Optional[Substitution] = None) -> Optional[dict[str, Term]]:
    """Most general substitution s with s(pattern) == fact, or None.

    `fact` must be ground.  Pre-existing bindings must match consistently.
    """
    sub: dict[str, Term] = dict(bindings) if bindings else {}

    def walk(p: Term, f: Term) -> bool:
        if isinstance(p, Variable):
            bound = sub.get(p.name)
            if bound is None:
                sub[p.name] = f
                return True
            return bound == f
        if isinstance(p, Compound):
            if not isinstance(f, Compound) or p.functor != f.functor or len(p.args) != len(f.args):
                return False
            return all(walk(pa, fa) for pa, fa in zip(p.args, f.args))
        return p == f

    return sub if walk(pattern, fact) else None


def apply_term(sub: Substitution, term: Term) -> Term:
    if isinstance(term, Variable):
        return sub.get(term.name, term)
    if isinstance(term, Compound):
        return Compound(term.functor, tuple(apply_term(sub, a) for a in term.args))
    return term


# ---------------------------------------------------------------------------
# Time expressions

@dataclass(frozen=True, slots=True)
class TimeRef:
    """Either an absolute timepoint or a time variable with an offset.

    var=None, offset holds the absolute value.  var='t', offset=-1 means
    the expression `?t-1` (only negative offsets are generated by the
    grammar).
    """

    var: Optional[str]
    offset: int = 0

    def resolve(self, t: int) -> int:
        if self.var is None:
            return self.offset
        return t + self.offset

    @property
    def is_plain_var(self) -> bool:
        return self.var is not None and self.offset == 0

    def __repr__(self):
        if self.var is None:
            return str(self.offset)
        if self.offset == 0:
            return "?" + self.var
        return f"?{self.var}{self.offset:+d}"


# ---------------------------------------------------------------------------
# Literals

class AtomKind(Enum):
    HOLDS_AT = "HoldsAt"
    HAPPENS = "Happens"
    RELEASED_AT = "ReleasedAt"
    COMPARISON = "Comparison"


COMPARISON_OPS = ("=", "<>", "<", "<=", ">", ">=")


@dataclass(frozen=True, slots=True)
class Literal:
    positive: bool
    kind: AtomKind
    term: Optional[Term] = None        # fluent or event term
    time: Optional[TimeRef] = None
    op: Optional[str] = None           # comparison only
    lhs: Optional[Term] = None
    rhs: Optional[Term] = None

    def __repr__(self):
        neg = "" if self.positive else "~"
        if self.kind is AtomKind.COMPARISON:
            return f"{{{self.lhs!r} {self.op} {self.rhs!r}}}"
        return f"{neg}{self.kind.value}({self.term!r},{self.time!r})"


def holds_lit(term: Term, time: TimeRef, positive: bool = True) -> Literal:
    return Literal(positive, AtomKind.HOLDS_AT, term=term, time=time)


def happens_lit(term: Term, time: TimeRef, positive: bool = True) -> Literal:
    return Literal(positive, AtomKind.HAPPENS, term=term, time=time)


def released_lit(term: Term, time: TimeRef, positive: bool = True) -> Literal:
    return Literal(positive, AtomKind.RELEASED_AT, term=term, time=time)


def comparison_lit(op: str, lhs: Term, rhs: Term) -> Literal:
    return Literal(True, AtomKind.COMPARISON, op=op, lhs=lhs, rhs=rhs)


def apply_literal(sub: Substitution, lit: Literal) -> Literal:
    """Replace every bound variable; unbound variables survive."""
    if lit.kind is AtomKind.COMPARISON:
        return Literal(lit.positive, lit.kind, op=lit.op,
                       lhs=apply_term(sub, lit.lhs), rhs=apply_term(sub, lit.rhs))
    return Literal(lit.positive, lit.kind, term=apply_term(sub, lit.term), time=lit.time)


def literal_variables(lit: Literal) -> set[str]:
    if lit.kind is AtomKind.COMPARISON:
        return term_variables(lit.lhs) | term_variables(lit.rhs)
    return term_variables(lit.term)


# ---------------------------------------------------------------------------
# Declarations and axioms


@dataclass(frozen=True, slots=True)
class SortDecl:
    name: str
    constants: tuple[Term, ...]  # Constant or IntConst members, declaration order

    def index_of(self, c: Term) -> int:
        return self.constants.index(c)


class TemplateKind(Enum):
    FLUENT = "fluent"
    EVENT = "event"


@dataclass(frozen=True, slots=True)
class TemplateDecl:
    kind: TemplateKind
    name: str
    arg_sorts: tuple[str, ...]


class AxiomClass(Enum):
    POSITIVE_EFFECT = "Initiates"
    NEGATIVE_EFFECT = "Terminates"
    RELEASE = "Releases"
    STATE_CONSTRAINT = "StateConstraint"
    TRIGGER = "Trigger"


EFFECT_CLASSES = (AxiomClass.POSITIVE_EFFECT, AxiomClass.NEGATIVE_EFFECT, AxiomClass.RELEASE)


@dataclass(frozen=True, slots=True)
class SourceSpan:
    line: int = 0
    col: int = 0
    end_line: int = 0
    end_col: int = 0


@dataclass(frozen=True, slots=True)
class Axiom:
    cls: AxiomClass
    body: tuple[Literal, ...]
    time_var: str
    # effect axioms:
    event: Optional[Term] = None
    fluent: Optional[Term] = None
    # constraint / trigger axioms:
    head: Optional[Literal] = None
    span: SourceSpan = field(default=SourceSpan(), compare=False)

    def head_variables(self) -> set[str]:
        if self.cls in EFFECT_CLASSES:
            return term_variables(self.event) | term_variables(self.fluent)
        return literal_variables(self.head)


# ---------------------------------------------------------------------------
# Ground facts


@dataclass(frozen=True, slots=True)
class HappensFact:
    event: Term
    t: int


@dataclass(frozen=True, slots=True)
class HoldsObs:
    fluent: Term
    value: bool
    t: int


@dataclass(frozen=True, slots=True)
class ReleasedObs:
    fluent: Term
    t: int


GroundFact = Union[HappensFact, HoldsObs, ReleasedObs]


# ---------------------------------------------------------------------------
# Domain description


@dataclass
class DomainDescription:
    """The compiled theory: sorts, templates and the axiom/fact sets."""

    sorts: dict[str, SortDecl] = field(default_factory=dict)
    templates: dict[str, TemplateDecl] = field(default_factory=dict)
    sigma: tuple[Axiom, ...] = ()      # effect and release axioms
    psi: tuple[Axiom, ...] = ()        # state constraints
    delta2: tuple[Axiom, ...] = ()     # trigger axioms
    gamma: dict[int, tuple[GroundFact, ...]] = field(default_factory=dict)
    delta1: dict[int, tuple[HappensFact, ...]] = field(default_factory=dict)
    # fluent templates whose every instance is permanently released from
    # inertia (derived predicates pinned by state constraints)
    released_templates: frozenset[str] = frozenset()
    uses_past_time: bool = False

    def __eq__(self, other):
        if not isinstance(other, DomainDescription):
            return NotImplemented
        return (self.sorts == other.sorts and self.templates == other.templates
                and self.sigma == other.sigma and self.psi == other.psi
                and self.delta2 == other.delta2 and self.gamma == other.gamma
                and self.delta1 == other.delta1
                and self.released_templates == other.released_templates)

    def sort_of_constant(self, c: Term) -> Optional[str]:
        for s in self.sorts.values():
            if c in s.constants:
                return s.name
        return None

    def template(self, functor: str) -> Optional[TemplateDecl]:
        return self.templates.get(functor)

    def axioms(self) -> Iterator[Axiom]:
        return itertools.chain(self.sigma, self.psi, self.delta2)


def ground_instances(tpl: TemplateDecl, sorts: Mapping[str, SortDecl]) -> list[Term]:
    """All ground terms of a template, Cartesian product in declaration order.

    Never called eagerly over a whole domain; callers instantiate on demand.
    """
    pools = []
    for s in tpl.arg_sorts:
        if s == INTEGER_SORT:
            raise UnknownSort(f"cannot enumerate the integer sort (template {tpl.name})")
        decl = sorts.get(s)
        if decl is None:
            raise UnknownSort(s)
        pools.append(decl.constants)
    return [Compound(tpl.name, combo) for combo in itertools.product(*pools)]


def compare_terms(op: str, lhs: Term, rhs: Term, domain: DomainDescription) -> bool:
    """Total comparison semantics: numeric for integers, declaration order
    for constants of the same sort.  Equality/inequality is structural."""
    if op == "=":
        return lhs == rhs
    if op == "<>":
        return lhs != rhs
    if isinstance(lhs, IntConst) and isinstance(rhs, IntConst):
        a, b = lhs.value, rhs.value
    else:
        ls = domain.sort_of_constant(lhs)
        rs = domain.sort_of_constant(rhs)
        if ls is None or rs is None or ls != rs:
            raise ValueError(f"cannot order {lhs!r} against {rhs!r}")
        decl = domain.sorts[ls]
        a, b = decl.index_of(lhs), decl.index_of(rhs)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown comparison operator {op!r}")


def variable_sorts(axiom: Axiom, domain: DomainDescription) -> dict[str, str]:
    """Map each variable of an axiom to a sort, inferred from the template
    argument positions where it appears."""
    out: dict[str, str] = {}

    def visit(term: Term):
        if isinstance(term, Compound):
            tpl = domain.template(term.functor)
            if tpl is None:
                return
            for arg, sort in zip(term.args, tpl.arg_sorts):
                if isinstance(arg, Variable):
                    out.setdefault(arg.name, sort)
                elif isinstance(arg, Compound):
                    visit(arg)

    for lit in axiom.body:
        if lit.kind is not AtomKind.COMPARISON:
            visit(lit.term)
    if axiom.cls in EFFECT_CLASSES:
        visit(axiom.event)
        visit(axiom.fluent)
    else:
        visit(axiom.head.term)
    return out
