"""Exception hierarchy shared by every doeopt module."""


class DoeOptError(Exception):
    """Base class for all doeopt errors."""


class ContractViolation(DoeOptError):
    """An operation was called with arguments violating its precondition."""


class ValidationError(DoeOptError):
    """A user-supplied document (config, rule, descriptor) is invalid."""


class DegenerateColumnError(DoeOptError):
    """A column has zero width / zero variance where spread is required."""

    def __init__(self, column: str, detail: str = ""):
        self.column = column
        super().__init__(f"degenerate column {column!r}" + (f": {detail}" if detail else ""))


class DegenerateDegreesOfFreedom(DoeOptError):
    """adjusted R2 requested with n <= p + 1."""


class SchemaConflictError(DoeOptError):
    """Two sources disagree about a canonical parameter."""


class RuleConflictError(DoeOptError):
    """Two constraint rules cannot hold simultaneously."""


class InsufficientDataError(DoeOptError):
    """Too few rows survive for the requested operation."""


class BudgetExceededError(DoeOptError):
    """Exhaustive search would exceed the configured fit budget."""

    def __init__(self, required: int, allowed: int):
        self.required = required
        self.allowed = allowed
        super().__init__(
            f"exhaustive search needs {required} model fits, budget allows {allowed}; "
            "run rank_importance first to shrink the candidate pool"
        )


class TrainingDivergedError(DoeOptError):
    """Non-finite loss encountered while fitting a surrogate."""

    def __init__(self, epoch: int, output: str = ""):
        self.epoch = epoch
        self.output = output
        msg = f"training diverged at epoch {epoch}"
        if output:
            msg += f" (output {output!r})"
        super().__init__(msg)


class ExtrapolationError(DoeOptError):
    """Prediction requested too far outside the normalized input box."""


class InvalidMeritError(DoeOptError):
    """Merit function has no usable weights."""


class ReferenceViolationError(DoeOptError):
    """A front point is not strictly better than the hypervolume reference."""


class UnsupportedDimensionError(DoeOptError):
    """Metric requested for more objectives than supported."""


class UndefinedMetricError(DoeOptError):
    """Metric undefined for the given front (e.g. spacing of one point)."""


class StageError(DoeOptError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
