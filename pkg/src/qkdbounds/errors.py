"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ZeroWeightError(ValueError):
    """A filtered or sifted state has zero weight (the branch is always discarded)."""


class NoSignChange(ValueError):
    """A bracket handed to a root finder does not straddle a sign change."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap before reaching tolerance."""


class InfeasibleObservations(ValueError):
    """Observed sifting rate / QBER pair cannot come from any physical channel."""
