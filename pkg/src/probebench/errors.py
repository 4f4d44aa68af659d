"""Exception hierarchy shared across the package.

Every error raised on a documented failure path derives from
:class:`ProbeBenchError`, so callers (and the CLI) can distinguish
"this input is bad" from genuine bugs.
"""

from __future__ import annotations


class ProbeBenchError(Exception):
    """Base class for all errors raised on documented failure paths."""


class FormatError(ProbeBenchError):
    """A file does not follow its declared container format (magic, version)."""


class TruncatedFileError(FormatError):
    """A file's payload is shorter than its header declares."""


class ParseError(ProbeBenchError):
    """Text input (CSV) could not be parsed; message names the offending row."""


class ConsistencyError(ProbeBenchError):
    """Values are individually valid but mutually contradictory
    (label out of range, catalog mismatch, checksum failure)."""


class DegenerateInputError(ProbeBenchError):
    """Input is structurally valid but unusable (zero-norm row, empty class)."""


class ShapeError(ProbeBenchError):
    """Array dimensions do not match what an operation requires."""


class NumericalError(ProbeBenchError):
    """A computation produced or received non-finite values."""
