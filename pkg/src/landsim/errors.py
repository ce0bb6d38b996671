"""Exception types shared across the landing-simulation package."""


class LandSimError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(LandSimError):
    """Descriptor dimensions of two feature sets differ."""


class EmptyInput(LandSimError):
    """An operation received an empty feature or point set."""


class InsufficientMatches(LandSimError):
    """Fewer point correspondences than the estimator needs."""


class DegenerateConfiguration(LandSimError):
    """Point configuration is rank-deficient (collinear or coincident)."""


class NoConsensus(LandSimError):
    """RANSAC failed to find a consensus set of at least 4 inliers."""


class ProjectiveDegeneracy(LandSimError):
    """A projected point fell on (or too close to) the plane at infinity."""


class DegenerateQuad(LandSimError):
    """Two corners of a quadrilateral coincide."""


class NonPositiveDt(LandSimError):
    """A time step must be strictly positive."""


class SingularInnovation(LandSimError):
    """Innovation covariance is numerically singular; check the R matrix."""


class EmptyLog(LandSimError):
    """A trial log with no steps cannot be summarized."""


class IoFailure(LandSimError):
    """A file could not be written or read."""


class ConfigError(LandSimError):
    """A configuration file is missing, unparsable, or inconsistent."""
