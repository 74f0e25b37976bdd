"""Exception types shared across the package.

Everything derives from :class:`CondsynthError` so callers can catch the
package's failures with one except clause. The value-like errors also
subclass :class:`ValueError` to stay friendly to generic sklearn-style
handling.
"""


class CondsynthError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(CondsynthError, ValueError):
    """Dimension mismatch between arrays/tensors; message names both shapes."""


class DomainError(CondsynthError, ValueError):
    """Numeric domain violation (log of a non-positive entry, non-finite values)."""


class ContractError(CondsynthError, ValueError):
    """A documented precondition was violated (frozen model retrained, dim_z >= d_in, ...)."""


class DataError(CondsynthError, ValueError):
    """Ingestion or encoding failure; message carries row/column coordinates."""


class CheckpointError(CondsynthError):
    """Corrupt, mismatched or incompatible checkpoint file."""


class ConfigError(CondsynthError, ValueError):
    """Invalid or incomplete run configuration."""


class UndefinedMetricError(CondsynthError, ValueError):
    """A metric was requested on inputs where it is not defined (e.g. empty matrix)."""
