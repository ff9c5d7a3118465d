"""Online discrete event-calculus reasoning with multi-model branching,
knowledge-level (epistemic) projection and probabilistic activity
recognition over sensor event streams."""

from .core import (
    Compound, Constant, DomainDescription, HappensFact, HoldsObs, IntConst,
    ReleasedObs, Term, Variable,
)
from .engine import KBMode, Value, WorkingMemory
from .errors import EventCalcError
from .parser import parse_domain, parse_statement, pretty_print
from .pool import ModelPool, TickReport

__version__ = "0.1.0"

__all__ = [
    "Compound", "Constant", "DomainDescription", "HappensFact", "HoldsObs",
    "IntConst", "ReleasedObs", "Term", "Variable", "KBMode", "Value",
    "WorkingMemory", "EventCalcError", "parse_domain", "parse_statement",
    "pretty_print", "ModelPool", "TickReport", "__version__",
]
