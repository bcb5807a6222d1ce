"""Exception hierarchy shared across the engine."""


class TrialGridError(Exception):
    """Base class for all engine errors."""


class IngestError(TrialGridError):
    """Raised when an input file fails validation.

    Carries enough location information (file, line) to point at the
    offending row.
    """

    def __init__(self, message, file=None, line=None):
        self.file = file
        self.line = line
        loc = ""
        if file is not None:
            loc = f" [{file}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)


class DslError(TrialGridError):
    """Parse or validation error in criteria text, with source position."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(message + loc)


class EvaluationError(TrialGridError):
    """Predicate evaluation failed (unbound parameter, type mismatch)."""


class SingularDesignError(TrialGridError):
    """Design matrix is rank-deficient; names the collinear columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "singular design matrix; collinear columns: " + ", ".join(self.columns)
        )


class EmptyArmError(TrialGridError):
    """An operation requiring both arms got an empty one."""


class SessionError(TrialGridError):
    """Session persistence or mutation failure."""
