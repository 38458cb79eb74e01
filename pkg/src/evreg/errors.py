"""Exception hierarchy shared across the package."""


class EvregError(Exception):
    """Base class for all package errors."""


class DataError(EvregError):
    """Invalid or inconsistent input data (missing columns, NaNs, rank deficiency)."""


class FormulaError(EvregError):
    """Predictor formula syntax or semantic error.

    ``offset`` is the byte offset of the offending token within the source text.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class EvaluationError(EvregError):
    """Model evaluation failed at a parameter value (e.g. sigma <= 0)."""


class UnsupportedModelError(EvregError):
    """Operation requires a model shape the given model does not have."""


class ConvergenceError(EvregError):
    """An optimization did not reach the requested tolerance."""


class InconsistentFitsError(EvregError):
    """Restricted fit exceeds the unrestricted maximum beyond tolerance."""


class AdjustmentError(EvregError):
    """A signed-root adjustment is undefined (correction factor is zero)."""


class ConditioningError(EvregError):
    """A determinant or linear solve needed by a statistic is singular.

    ``diagnostics`` carries the offending determinant signs/magnitudes.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
