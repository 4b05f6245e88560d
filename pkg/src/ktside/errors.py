"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation/parse/usage problems exit
with 1, numeric failures with 2.
"""


class KtError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(KtError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(KtError):
    """An operation produced a NaN or Inf."""


class GraphStateError(KtError):
    """A computation graph was used out of order (e.g. backward before forward)."""


class ValidationError(KtError):
    """Input data or configuration violates a documented precondition."""


class ParseError(KtError):
    """A text input file is malformed; message carries the line number."""


class MetricError(KtError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
