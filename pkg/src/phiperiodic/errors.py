"""Exception types raised by the solver."""


class SolverError(Exception):
    """Base class for all solver errors."""


class EvaluationError(SolverError):
    """A user-supplied map returned a non-finite value."""


class ScanDivergence(SolverError):
    """The two tails of F disagree; the strong resonance limit looks violated."""


class DimensionMismatch(SolverError, ValueError):
    pass


class BisectionFailure(SolverError):
    pass


class SingularEvaluation(SolverError):
    """phi was requested at (or beyond) the singular boundary of its domain."""


class EndpointSearchFailure(SolverError):
    pass


class CollapseDetected(SolverError):
    """The path family has no barrier above its endpoints."""


class PreconditionError(SolverError, ValueError):
    pass


class MissingK(SolverError):
    """The quadratic lower-bound coefficient of Phi is not available."""


class ConfigError(SolverError, ValueError):
    pass
