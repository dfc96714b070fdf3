"""Exception hierarchy shared across the package.

Every error raised on a contract violation derives from :class:`CongestoError`
so callers can catch the package's failures with a single except clause while
still being able to distinguish the cause.
"""


class CongestoError(Exception):
    """Base class for all package-specific errors."""


class DomainError(CongestoError):
    """Input outside the mathematical domain of a constitutive law."""


class OverflowDomainError(DomainError):
    """Exponent of the singular law exceeds the floating-point safe bound."""


class QuadratureError(CongestoError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class VacuumError(CongestoError):
    """Density fell below the vacuum floor where velocity is undefined."""


class ConstraintBreachError(CongestoError):
    """A hard state constraint (e.g. density below close packing) was violated."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class StallError(CongestoError):
    """Time step collapsed below the minimum step (singularity approach)."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class LinearSolveError(CongestoError):
    """Iterative linear solve failed to converge to tolerance."""


class GridError(CongestoError):
    """Invalid grid construction arguments."""


class MeanZeroError(CongestoError):
    """Field violates the mean-zero precondition of the spectral inverse."""


class ScenarioError(CongestoError):
    """Scenario construction arguments violate a scenario precondition."""


class ConfigError(CongestoError):
    """Malformed run configuration (syntax, unknown key, bad value)."""


class SnapshotFormatError(CongestoError):
    """Malformed or unsupported binary snapshot file."""


class RateFitError(CongestoError):
    """Rate fit prerequisites violated (too few points, non-monotone ladder)."""


class SweepError(CongestoError):
    """A sweep member run failed; partial results are preserved on disk."""
