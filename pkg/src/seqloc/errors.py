"""Exception types shared across the package."""


class SeqlocError(Exception):
    """Base class for all seqloc errors."""


class DegenerateGeometry(SeqlocError):
    """UD (displaced by its velocity) coincides with a base station."""


class DimensionMismatch(SeqlocError):
    """Inconsistent dimensions between batch, constellation and parameters."""


class RankDeficient(SeqlocError):
    """Design/normal matrix is singular or too ill-conditioned to solve."""


class Diverged(SeqlocError):
    """Gauss-Newton step exceeded the divergence guard."""


class EmptyInput(SeqlocError):
    """A statistic was requested over an empty collection."""


class ConfigError(SeqlocError):
    """Invalid scenario or experiment configuration."""
