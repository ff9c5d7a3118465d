"""Parser and pretty-printer for the ".ec" surface syntax.

Statements are "."-terminated clauses:

    sort: object(O1,O2).
    fluent: F1(object,object).
    event: E1(object).
    released: PossActivity.
    HoldsAt(F1(?o1,?o2),?t) ^ {?o1 <> ?o2} ^ ~Happens(E2(O1),?t) =>
        Initiates(E1(?o2), F1(?o2,?o1), ?t).
    Happens(Close(S1), -1).

Axioms are classified by their head (Initiates/Terminates/Releases into
the effect set, HoldsAt into the constraint set, Happens into the
trigger set); ground statements with integer times are classified as
observations or narrative facts.  `released:` marks a fluent template
whose instances are permanently exempt from inertia (derived predicates
pinned by state constraints).  Comments run from `//` to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import core
from .core import (
    AtomKind, Axiom, AxiomClass, Compound, Constant, DomainDescription,
    EFFECT_CLASSES, GroundFact, HappensFact, HoldsObs, IntConst, Literal,
    ReleasedObs, SortDecl, SourceSpan, TemplateDecl, TemplateKind, TimeRef,
    Variable, INTEGER_SORT,
)
from .errors import FormatError, RejectPast

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|=>|[=<>])
  | (?P<punct>[(){},.^~:\-])
""", re.VERBOSE)

_ATOM_NAMES = {"HoldsAt", "Happens", "ReleasedAt"}
_EFFECT_NAMES = {"Initiates": AxiomClass.POSITIVE_EFFECT,
                 "Terminates": AxiomClass.NEGATIVE_EFFECT,
                 "Releases": AxiomClass.RELEASE}
_DECL_KEYWORDS = {"sort", "fluent", "event", "released"}


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: Severity
    message: str
    span: SourceSpan

    def __str__(self):
        return f"{self.span.line}:{self.span.col}: {self.severity.value}: {self.message}"


@dataclass
class ParseResult:
    domain: Optional[DomainDescription]
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)
    uses_past_time: bool = False

    @property
    def errors(self) -> list[ParseDiagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.ERROR]

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            toks.append(_Tok("bad", source[pos], line, col))
            pos += 1
            col += 1
            continue
        text = m.group(0)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok("punct" if kind == "op" else kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    return toks


class _SyntaxError(FormatError):
    def __init__(self, message, tok: Optional[_Tok]):
        self.message = message
        self.tok = tok
        super().__init__(message)


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self, ahead: int = 0) -> Optional[_Tok]:
        j = self.i + ahead
        return self.toks[j] if j < len(self.toks) else None

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def next(self) -> _Tok:
        if self.at_end():
            raise _SyntaxError("unexpected end of input", None)
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise _SyntaxError(f"expected {text!r}, found {tok.text!r}", tok)
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    def span_here(self) -> SourceSpan:
        tok = self.peek()
        if tok is None:
            tok = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
        return SourceSpan(tok.line, tok.col, tok.line, tok.col + len(tok.text))

    # -- terms -------------------------------------------------------------

    def _ident_with_colons(self) -> str:
        tok = self.next()
        if tok.kind != "ident":
            raise _SyntaxError(f"expected identifier, found {tok.text!r}", tok)
        name = tok.text
        # explanation-style constants such as TS2:Morning
        while True:
            a, b = self.peek(), self.peek(1)
            if a is not None and a.text == ":" and b is not None and b.kind in ("ident", "int"):
                self.i += 2
                name += ":" + b.text
            else:
                break
        return name

    def parse_term(self) -> core.Term:
        tok = self.peek()
        if tok is None:
            raise _SyntaxError("expected term", None)
        if tok.kind == "var":
            self.i += 1
            return Variable(tok.text[1:])
        if tok.kind == "int":
            self.i += 1
            return IntConst(int(tok.text))
        if tok.text == "-":
            self.i += 1
            num = self.next()
            if num.kind != "int":
                raise _SyntaxError("expected integer after '-'", num)
            return IntConst(-int(num.text))
        name = self._ident_with_colons()
        if self.accept("("):
            args = []
            if not self.accept(")"):
                args.append(self.parse_term())
                while self.accept(","):
                    args.append(self.parse_term())
                self.expect(")")
            return Compound(name, tuple(args))
        return Constant(name)

    def parse_time(self) -> TimeRef:
        tok = self.peek()
        if tok is None:
            raise _SyntaxError("expected time expression", None)
        if tok.kind == "var":
            self.i += 1
            if self.accept("-"):
                num = self.next()
                if num.kind != "int":
                    raise _SyntaxError("expected integer offset", num)
                return TimeRef(tok.text[1:], -int(num.text))
            return TimeRef(tok.text[1:], 0)
        neg = self.accept("-")
        num = self.next()
        if num.kind != "int":
            raise _SyntaxError(f"expected timepoint, found {num.text!r}", num)
        val = -int(num.text) if neg else int(num.text)
        return TimeRef(None, val)

    # -- conditions --------------------------------------------------------

    def parse_cond(self) -> Literal:
        if self.accept("{"):
            lhs = self.parse_term()
            op = self.next()
            if op.text not in core.COMPARISON_OPS:
                raise _SyntaxError(f"expected comparison operator, found {op.text!r}", op)
            rhs = self.parse_term()
            self.expect("}")
            return core.comparison_lit(op.text, lhs, rhs)
        positive = not self.accept("~")
        name_tok = self.peek()
        name = self._ident_with_colons()
        if name not in _ATOM_NAMES and name not in _EFFECT_NAMES:
            raise _SyntaxError(f"unknown predicate {name!r}", name_tok)
        self.expect("(")
        term = self.parse_term()
        if name in _EFFECT_NAMES:
            self.expect(",")
            fluent = self.parse_term()
            self.expect(",")
            time = self.parse_time()
            self.expect(")")
            # effect predicates are only legal as heads; the statement
            # parser rejects them when they show up in a body
            return _EffectAtom(name, term, fluent, time, positive)  # type: ignore
        self.expect(",")
        time = self.parse_time()
        self.expect(")")
        kind = {"HoldsAt": AtomKind.HOLDS_AT, "Happens": AtomKind.HAPPENS,
                "ReleasedAt": AtomKind.RELEASED_AT}[name]
        return Literal(positive, kind, term=term, time=time)


@dataclass(frozen=True)
class _EffectAtom:
    name: str
    event: core.Term
    fluent: core.Term
    time: TimeRef
    positive: bool


def _normalize_functor(term: core.Term, templates: dict[str, TemplateDecl]) -> core.Term:
    """A bare constant naming a 0-ary template is that template's instance."""
    if isinstance(term, Constant) and term.name in templates:
        return Compound(term.name, ())
    return term


class _DomainBuilder:
    def __init__(self):
        self.diags: list[ParseDiagnostic] = []
        self.sorts: dict[str, SortDecl] = {}
        self.templates: dict[str, TemplateDecl] = {}
        self.sigma: list[Axiom] = []
        self.psi: list[Axiom] = []
        self.delta2: list[Axiom] = []
        self.gamma: dict[int, list[GroundFact]] = {}
        self.delta1: dict[int, list[HappensFact]] = {}
        self.released: set[str] = set()
        self.uses_past_time = False

    def error(self, message: str, span: SourceSpan):
        self.diags.append(ParseDiagnostic(Severity.ERROR, message, span))

    def warning(self, message: str, span: SourceSpan):
        self.diags.append(ParseDiagnostic(Severity.WARNING, message, span))

    # -- statements --------------------------------------------------------

    def statement(self, p: _Parser):
        span = p.span_here()
        first = p.peek()
        if first is not None and first.kind == "ident" and first.text in _DECL_KEYWORDS \
                and p.peek(1) is not None and p.peek(1).text == ":":
            p.i += 2
            self.declaration(first.text, p, span)
        else:
            self.axiom_or_fact(p, span)
        p.expect(".")

    def declaration(self, keyword: str, p: _Parser, span: SourceSpan):
        name = p._ident_with_colons()
        if keyword == "released":
            self.released.add(name)
            return
        if keyword == "sort":
            p.expect("(")
            members: list[core.Term] = []
            if not p.accept(")"):
                members.append(self._sort_member(p))
                while p.accept(","):
                    members.append(self._sort_member(p))
                p.expect(")")
            if name in self.sorts:
                self.error(f"duplicate sort {name!r}", span)
                return
            if len(set(members)) != len(members):
                self.error(f"sort {name!r} repeats a constant", span)
            self.sorts[name] = SortDecl(name, tuple(members))
            return
        # fluent / event template
        p.expect("(")
        arg_sorts: list[str] = []
        if not p.accept(")"):
            arg_sorts.append(p._ident_with_colons())
            while p.accept(","):
                arg_sorts.append(p._ident_with_colons())
            p.expect(")")
        if name in self.templates:
            self.error(f"duplicate template {name!r}", span)
            return
        kind = TemplateKind.FLUENT if keyword == "fluent" else TemplateKind.EVENT
        self.templates[name] = TemplateDecl(kind, name, tuple(arg_sorts))

    def _sort_member(self, p: _Parser) -> core.Term:
        tok = p.peek()
        if tok is not None and tok.kind == "int":
            p.i += 1
            return IntConst(int(tok.text))
        if tok is not None and tok.text == "-":
            p.i += 1
            num = p.next()
            return IntConst(-int(num.text))
        return Constant(p._ident_with_colons())

    def axiom_or_fact(self, p: _Parser, span: SourceSpan):
        conds = [p.parse_cond()]
        while p.accept("^"):
            conds.append(p.parse_cond())
        if p.accept("=>"):
            head = p.parse_cond()
            self.add_axiom(conds, head, span)
            return
        if len(conds) != 1:
            raise _SyntaxError("conjunction without a head", p.peek())
        head = conds[0]
        is_fact = (not isinstance(head, _EffectAtom)
                   and head.time is not None and head.time.var is None)
        if is_fact:
            self.add_fact(head, span)
        else:
            self.add_axiom([], head, span)

    # -- axioms ------------------------------------------------------------

    def add_axiom(self, body, head, span: SourceSpan):
        for lit in body:
            if isinstance(lit, _EffectAtom):
                self.error("effect predicates cannot appear in axiom bodies", span)
                return
        if isinstance(head, _EffectAtom):
            if not head.positive:
                self.error("negated effect head", span)
                return
            if not head.time.is_plain_var:
                self.error("effect head time must be a plain variable", span)
                return
            event = _normalize_functor(head.event, self.templates)
            fluent = _normalize_functor(head.fluent, self.templates)
            ax = Axiom(_EFFECT_NAMES[head.name], tuple(self._norm_body(body)),
                       head.time.var, event=event, fluent=fluent, span=span)
            self.validate_axiom(ax, span)
            self.sigma.append(ax)
            return
        if head.kind is AtomKind.HOLDS_AT:
            if head.time is None or not head.time.is_plain_var:
                self.error("constraint head time must be a plain variable", span)
                return
            lit = Literal(head.positive, head.kind,
                          term=_normalize_functor(head.term, self.templates), time=head.time)
            ax = Axiom(AxiomClass.STATE_CONSTRAINT, tuple(self._norm_body(body)),
                       head.time.var, head=lit, span=span)
            self.validate_axiom(ax, span)
            self.psi.append(ax)
            return
        if head.kind is AtomKind.HAPPENS and head.positive:
            if not head.time.is_plain_var:
                self.error("trigger head time must be a plain variable", span)
                return
            lit = Literal(True, head.kind,
                          term=_normalize_functor(head.term, self.templates), time=head.time)
            ax = Axiom(AxiomClass.TRIGGER, tuple(self._norm_body(body)),
                       head.time.var, head=lit, span=span)
            self.validate_axiom(ax, span)
            self.delta2.append(ax)
            return
        self.error("axiom head must be Initiates/Terminates/Releases, HoldsAt or Happens", span)

    def _norm_body(self, body):
        out = []
        for lit in body:
            if lit.kind is AtomKind.COMPARISON:
                out.append(lit)
            else:
                out.append(Literal(lit.positive, lit.kind,
                                   term=_normalize_functor(lit.term, self.templates),
                                   time=lit.time))
        return out

    def validate_axiom(self, ax: Axiom, span: SourceSpan):
        body_vars: set[str] = set()
        for lit in ax.body:
            body_vars |= core.literal_variables(lit)
            if lit.kind is not AtomKind.COMPARISON:
                self.check_term(lit.term, lit.kind, span)
                if lit.time.var is not None and (lit.time.var != ax.time_var or lit.time.offset != 0):
                    self.uses_past_time = True
                if lit.time.var is None:
                    self.uses_past_time = True
        allowed = set(body_vars)
        if ax.cls in EFFECT_CLASSES:
            self.check_term(ax.event, AtomKind.HAPPENS, span)
            self.check_term(ax.fluent, AtomKind.HOLDS_AT, span)
            allowed |= core.term_variables(ax.event)
            missing = core.term_variables(ax.fluent) - allowed
        else:
            self.check_term(ax.head.term, ax.head.kind, span)
            missing = core.literal_variables(ax.head) - allowed
        if missing:
            self.error(f"head variables {sorted(missing)} unbound by body or event term "
                       "(range restriction)", span)

    def check_term(self, term: core.Term, kind: AtomKind, span: SourceSpan):
        """Arity and sort checking for a fluent/event position."""
        if isinstance(term, Variable):
            self.error("fluent/event position cannot be a bare variable", span)
            return
        if not isinstance(term, Compound):
            self.error(f"{term!r} does not name a declared template", span)
            return
        tpl = self.templates.get(term.functor)
        if tpl is None:
            self.error(f"undeclared fluent/event {term.functor!r}", span)
            return
        want = TemplateKind.EVENT if kind is AtomKind.HAPPENS else TemplateKind.FLUENT
        if tpl.kind is not want:
            self.error(f"{term.functor!r} is a {tpl.kind.value}, used as a {want.value}", span)
        if len(term.args) != len(tpl.arg_sorts):
            self.error(f"{term.functor!r} expects {len(tpl.arg_sorts)} arguments, "
                       f"got {len(term.args)}", span)
            return
        for arg, sort_name in zip(term.args, tpl.arg_sorts):
            if isinstance(arg, Variable):
                continue
            if sort_name == INTEGER_SORT:
                if not isinstance(arg, IntConst):
                    self.error(f"{arg!r} is not an integer", span)
                continue
            decl = self.sorts.get(sort_name)
            if decl is None:
                self.error(f"undeclared sort {sort_name!r} on {term.functor!r}", span)
            elif arg not in decl.constants:
                self.error(f"{arg!r} is not a constant of sort {sort_name!r}", span)

    # -- facts -------------------------------------------------------------

    def add_fact(self, lit: Literal, span: SourceSpan):
        t = lit.time.offset
        if t < -1:
            self.error(f"illegal timepoint {t}", span)
            return
        term = _normalize_functor(lit.term, self.templates)
        if not core.is_ground(term):
            self.error("facts must be ground", span)
            return
        self.check_term(term, lit.kind, span)
        if lit.kind is AtomKind.HAPPENS:
            if not lit.positive:
                self.error("negated event occurrence fact", span)
                return
            self.delta1.setdefault(t, []).append(HappensFact(term, t))
        elif lit.kind is AtomKind.HOLDS_AT:
            self.gamma.setdefault(t, []).append(HoldsObs(term, lit.positive, t))
        else:
            if not lit.positive:
                self.error("negated ReleasedAt fact", span)
                return
            self.gamma.setdefault(t, []).append(ReleasedObs(term, t))

    # -- finish ------------------------------------------------------------

    def finish(self) -> ParseResult:
        # cross-sort unique names
        seen: dict[core.Term, str] = {}
        for s in self.sorts.values():
            for c in s.constants:
                if c in seen and seen[c] != s.name:
                    self.error(f"constant {c!r} declared in sorts {seen[c]!r} and {s.name!r}",
                               SourceSpan())
                seen[c] = s.name
        for tpl in self.templates.values():
            for sort_name in tpl.arg_sorts:
                if sort_name != INTEGER_SORT and sort_name not in self.sorts:
                    self.error(f"template {tpl.name!r} references undeclared sort {sort_name!r}",
                               SourceSpan())
        for name in self.released:
            tpl = self.templates.get(name)
            if tpl is None or tpl.kind is not TemplateKind.FLUENT:
                self.error(f"released: {name!r} is not a declared fluent", SourceSpan())
        errors = [d for d in self.diags if d.severity is Severity.ERROR]
        if errors:
            return ParseResult(None, self.diags, self.uses_past_time)
        domain = DomainDescription(
            sorts=self.sorts,
            templates=self.templates,
            sigma=tuple(self.sigma),
            psi=tuple(self.psi),
            delta2=tuple(self.delta2),
            gamma={t: tuple(fs) for t, fs in self.gamma.items()},
            delta1={t: tuple(fs) for t, fs in self.delta1.items()},
            released_templates=frozenset(self.released),
            uses_past_time=self.uses_past_time,
        )
        return ParseResult(domain, self.diags, self.uses_past_time)


def parse_domain(source: str) -> ParseResult:
    toks = _tokenize(source)
    p = _Parser(toks)
    b = _DomainBuilder()
    while not p.at_end():
        start = p.i
        try:
            b.statement(p)
        except _SyntaxError as exc:
            tok = exc.tok
            span = SourceSpan(tok.line, tok.col, tok.line, tok.col + len(tok.text)) \
                if tok else SourceSpan()
            b.error(exc.message, span)
            # resynchronize after the next '.'
            p.i = max(p.i, start + 1)
            while not p.at_end() and p.next().text != ".":
                pass
    return b.finish()


def parse_statement(line: str, clock: int) -> GroundFact:
    """Parse one runtime Happens/HoldsAt/ReleasedAt injection.

    The sentinel time -1 resolves to clock+1 (the next reasoning tick).
    Facts for a tick at or before the clock are rejected: events must
    arrive in chronological order.
    """
    toks = _tokenize(line)
    p = _Parser(toks)
    lit = p.parse_cond()
    p.accept(".")
    if not p.at_end():
        raise _SyntaxError("trailing input after statement", p.peek())
    if isinstance(lit, _EffectAtom) or lit.time is None or lit.time.var is not None:
        raise _SyntaxError("expected a ground Happens/HoldsAt/ReleasedAt statement", None)
    t = lit.time.offset
    if t == -1:
        t = clock + 1
    elif t <= clock:
        raise RejectPast(f"timepoint {t} is not after the clock ({clock})")
    if not core.is_ground(lit.term):
        raise _SyntaxError("runtime statements must be ground", None)
    if lit.kind is AtomKind.HAPPENS:
        return HappensFact(lit.term, t)
    if lit.kind is AtomKind.HOLDS_AT:
        return HoldsObs(lit.term, lit.positive, t)
    return ReleasedObs(lit.term, t)


def parse_term_text(text: str) -> core.Term:
    """Parse a single ground term, e.g. 'DoorOpens(Ned,HallBathroom)'."""
    p = _Parser(_tokenize(text))
    term = p.parse_term()
    if not p.at_end():
        raise _SyntaxError("trailing input after term", p.peek())
    return term


# ---------------------------------------------------------------------------
# Pretty printing


def _print_term(term: core.Term) -> str:
    return repr(term)


def _print_literal(lit: Literal) -> str:
    if lit.kind is AtomKind.COMPARISON:
        return f"{{{_print_term(lit.lhs)} {lit.op} {_print_term(lit.rhs)}}}"
    neg = "" if lit.positive else "~"
    return f"{neg}{lit.kind.value}({_print_term(lit.term)},{lit.time!r})"


def _print_axiom(ax: Axiom) -> str:
    if ax.cls in EFFECT_CLASSES:
        head = f"{ax.cls.value}({_print_term(ax.event)},{_print_term(ax.fluent)},?{ax.time_var})"
    else:
        head = _print_literal(ax.head)
    if not ax.body:
        return head + "."
    return " ^ ".join(_print_literal(l) for l in ax.body) + " => " + head + "."


def _print_fact(fact: GroundFact) -> str:
    if isinstance(fact, HappensFact):
        return f"Happens({_print_term(fact.event)},{fact.t})."
    if isinstance(fact, HoldsObs):
        neg = "" if fact.value else "~"
        return f"{neg}HoldsAt({_print_term(fact.fluent)},{fact.t})."
    return f"ReleasedAt({_print_term(fact.fluent)},{fact.t})."


def pretty_print(domain: DomainDescription) -> str:
    """Canonical text; parse_domain(pretty_print(d)) is structurally d."""
    lines: list[str] = []
    for s in domain.sorts.values():
        members = ",".join(_print_term(c) for c in s.constants)
        lines.append(f"sort: {s.name}({members}).")
    for kind in (TemplateKind.FLUENT, TemplateKind.EVENT):
        for tpl in domain.templates.values():
            if tpl.kind is kind:
                lines.append(f"{kind.value}: {tpl.name}({','.join(tpl.arg_sorts)}).")
    for name in sorted(domain.released_templates):
        lines.append(f"released: {name}.")
    for ax in domain.axioms():
        lines.append(_print_axiom(ax))
    for t in sorted(domain.gamma):
        for fact in domain.gamma[t]:
            lines.append(_print_fact(fact))
    for t in sorted(domain.delta1):
        for fact in domain.delta1[t]:
            lines.append(_print_fact(fact))
    return "\n".join(lines)
