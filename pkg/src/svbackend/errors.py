"""Exception types shared across the toolkit.

The CLI maps ToolkitError (and subclasses) to a data-error exit, distinct
from argparse usage errors.
"""


class ToolkitError(Exception):
    """Base class for all errors raised on invalid data or state."""


class FormatError(ToolkitError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class EmptyTableError(ToolkitError):
    """Operation requires a non-empty table."""


class DegenerateCohortError(ToolkitError):
    """Cohort score spread below the configured sigma floor (constant cohort)."""


class ConvergenceError(ToolkitError):
    """Iterative fit did not reach the gradient tolerance."""


class QuotaError(ToolkitError):
    """Requested trial counts cannot be met by the available candidates."""


class MissingFeatureError(ToolkitError):
    """A named quality feature is absent from a trial record."""
