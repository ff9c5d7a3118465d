"""Exception types shared across the reasoner."""


class EventCalcError(Exception):
    """Base class for all reasoner errors."""


class UnknownSort(EventCalcError):
    pass


class ValidationError(EventCalcError):
    """Domain failed static validation; diagnostics carry the details."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class RejectPast(EventCalcError):
    """A fact arrived for a timepoint at or before the committed clock."""


class HistoryUnavailable(EventCalcError):
    """Queried a timepoint whose record was flushed or never kept."""


class Inconsistency(EventCalcError):
    """The same ground fluent was initiated and terminated at one tick."""


class ConstraintContradiction(EventCalcError):
    """A state constraint forced a value against an already determined one."""


class ModeUnavailable(EventCalcError):
    """Semi-destructive storage requested for a past-time domain."""


class GlobalInconsistency(EventCalcError):
    """Every model in the pool was eliminated."""


class BranchCapExceeded(EventCalcError):
    """Branching over released fluents would exceed the configured cap."""


class KnowledgeInconsistency(EventCalcError):
    """Epistemic propagation derived both a literal and its negation."""


class SchemaError(EventCalcError):
    pass


class IncompleteCPT(SchemaError):
    pass


class CycleError(SchemaError):
    pass


class ZeroEvidence(EventCalcError):
    """Observed evidence has probability zero under the network."""


class PhaseNotEntered(EventCalcError):
    pass


class MissingNetwork(EventCalcError):
    pass


class UnknownExplanation(EventCalcError):
    pass


class FormatError(EventCalcError):
    pass
