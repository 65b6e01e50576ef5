"""Exception hierarchy shared across the toolkit.

Two broad categories matter for scripting: input/validation problems
(CLI exit code 2) and numerical/training failures (CLI exit code 3).
File-format errors carry a stable ``code`` string so corrupted files can
be told apart programmatically.
"""

from __future__ import annotations


class SteerError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class InputError(SteerError):
    """Invalid input data or arguments (CLI exit code 2)."""

    code = "input"


class DegenerateVectorError(InputError):
    """A vector with zero norm where a direction is required."""

    code = "degenerate-vector"


class DimensionMismatchError(InputError):
    """Operands disagree on embedding dimensionality."""

    code = "dimension-mismatch"


class IdMismatchError(InputError):
    """Two sets that must share ids (and order) do not."""

    code = "id-mismatch"


class PairValidationError(InputError):
    """Alignment pairs failed validation; carries the diagnostics."""

    code = "invalid-pairs"

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"alignment pairs failed validation: {lines}")


class NumericalError(SteerError):
    """Numerical or training failure (CLI exit code 3)."""

    code = "numerical"


class RankDeficiencyError(NumericalError):
    """Normal matrix is singular; a ridge term would regularize it."""

    code = "rank-deficient"


class TrainingDivergedError(NumericalError):
    """Non-finite loss encountered during training."""

    code = "training-diverged"

    def __init__(self, epoch: int, batch: int, detail: str = ""):
        self.epoch = epoch
        self.batch = batch
        msg = f"non-finite loss at epoch {epoch}, batch {batch}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class TargetUnreachableError(NumericalError):
    """A search for a matching parameter could not hit its target."""

    code = "target-unreachable"


class FileFormatError(InputError):
    """Malformed or inconsistent on-disk artifact."""

    code = "file-format"


class BadMagicError(FileFormatError):
    code = "bad-magic"


class VersionMismatchError(FileFormatError):
    code = "version-mismatch"


class TruncatedPayloadError(FileFormatError):
    code = "truncated-payload"


class IdCountMismatchError(FileFormatError):
    code = "id-count-mismatch"


class HeaderError(FileFormatError):
    code = "bad-header"


class UnknownKindError(FileFormatError):
    code = "unknown-kind"


class ParamCountMismatchError(FileFormatError):
    code = "param-count-mismatch"


class QrelsParseError(FileFormatError):
    code = "qrels-parse"

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class ConfigError(InputError):
    """Bad or unknown configuration keys/values."""

    code = "config"


class UnderdeterminedWarning(UserWarning):
    """Fewer samples than source dimensions; the fit is underdetermined."""
