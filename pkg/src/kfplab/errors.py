"""Exception taxonomy shared by all modules.

Two families matter for the CLI exit codes: configuration/validation problems
(exit 1) and numerical failures (exit 2). Everything else is I/O (exit 3).
"""


class ValidationError(ValueError):
    """Bad arguments, bad config, or violated preconditions."""


class GridMismatchError(ValidationError):
    pass


class InvalidEquilibriumError(ValidationError):
    pass


class TruncationError(ValidationError):
    """Boundary mass above threshold: the box does not resolve the state."""


class NumericalError(RuntimeError):
    """Solver / eigensolver / quadrature failure, or NaN detected."""


class FittingError(NumericalError):
    pass


class InfeasibleError(NumericalError):
    """No admissible root: inconsistent constants."""
