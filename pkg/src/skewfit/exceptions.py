"""Exception types shared across the package."""


class SkewfitError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(SkewfitError, ValueError):
    """Parameter vector dimension does not match the model."""


class UnsupportedModelError(SkewfitError):
    """Requested operation needs model features that are not available."""


class NonConvergenceError(SkewfitError):
    """An iterative fit did not converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class IndefiniteCurvatureError(SkewfitError):
    """Negative log-posterior Hessian is not positive definite at the terminal point."""


class StepSizeError(SkewfitError):
    """Stochastic optimization diverged (NaN objective)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class DomainTooSmallError(SkewfitError):
    """Quadrature grid does not capture enough probability mass."""

    def __init__(self, message, deficit=None):
        super().__init__(message)
        self.deficit = deficit


class SupportMismatchError(SkewfitError):
    """q vanishes on a region where p carries mass; KL undefined."""


class UnreliableEstimateError(SkewfitError):
    """Monte Carlo estimate rejected (effective sample size too small)."""


class StuckChainError(SkewfitError):
    """MCMC chain accepted no proposals during warmup."""


class StaleCacheError(SkewfitError):
    """Precomputed linear predictors do not match the current center."""


class ConfigError(SkewfitError):
    """Run configuration failed validation."""
