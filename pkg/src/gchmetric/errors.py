"""Exception types shared across the package."""


class GchMetricError(Exception):
    """Base class for all package-specific failures."""


class NonSymmetric(GchMetricError):
    """A covariance matrix is not symmetric within tolerance."""


class NonPhysicalCovariance(GchMetricError):
    """A covariance matrix violates the uncertainty relation."""


class BadModeIndex(GchMetricError):
    """A mode index is out of range or repeated."""


class DimensionMismatch(GchMetricError):
    """Array shapes are inconsistent with the declared mode count."""


class InvalidChannel(GchMetricError):
    """Channel parameters violate positivity/complete-positivity bounds."""


class ModeMismatch(GchMetricError):
    """State and channel disagree on the number of modes."""


class SingularPureMode(GchMetricError):
    """A pure (or numerically pure) mode makes a tensor inverse singular."""


class IllConditioned(GchMetricError):
    """A linear solve exceeded the allowed condition number."""


class CutoffTooSmall(GchMetricError):
    """Truncated Fock representation lost too much trace."""


class StiffnessFailure(GchMetricError):
    """The master-equation integrator failed to meet its tolerance."""


class SolverStalled(GchMetricError):
    """The interior-point solver could not make progress."""


class InvalidSplit(GchMetricError):
    """A resource split is not a point on the probability simplex."""


class ConfigError(GchMetricError):
    """A run configuration file is malformed or inconsistent."""


class CacheMismatch(GchMetricError):
    """An existing sample cache does not match the current run header."""
