"""Exception types shared across the package.

Every error raised on purpose derives from SpikeManifoldError so callers
can catch the package's failures without catching programming mistakes.
"""


class SpikeManifoldError(Exception):
    """Base class for all errors raised deliberately by this package."""


class DomainError(SpikeManifoldError):
    """An input value lies outside the mathematical domain of an operation.

    Examples: a probability outside [0, 1], a zero vector where a
    direction is required, a tangent vector long enough to wrap around
    a sphere.
    """


class ShapeError(SpikeManifoldError):
    """Array shapes or component counts are inconsistent."""


class NumericError(SpikeManifoldError):
    """A computation produced a non-finite value or drifted past the
    tolerance that clamping is allowed to absorb."""


class SingularityError(SpikeManifoldError):
    """The requested map is undefined at this configuration, e.g. the
    logarithm between antipodal points on a sphere."""


class ConfigError(SpikeManifoldError):
    """An invalid configuration value: unknown geometry token, unknown
    gradient rule, nonsensical hyperparameter."""


class DataFormatError(SpikeManifoldError):
    """A dataset file could not be parsed; the message names the file
    and the offending line."""


class CheckInvalidError(SpikeManifoldError):
    """A verification run could not be trusted, e.g. the function under
    a finite-difference check was not deterministic."""
