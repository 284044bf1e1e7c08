"""Custom exceptions for linkcurv."""


class AppError(Exception):
    """Base exception for linkcurv errors."""

    def __init__(self, message: str, code: str = "APP_ERROR"):
        self.message = message
        self.code = code
        super().__init__(self.message)


class NotFoundError(AppError):
    """Input file not found."""

    def __init__(self, message: str = "Resource not found"):
        super().__init__(message, code="NOT_FOUND")


class AppValidationError(AppError):
    """Validation failed."""

    def __init__(self, message: str = "Validation failed", code: str = "VALIDATION_ERROR"):
        super().__init__(message, code=code)


class SceneParseError(AppValidationError):
    """Scene or connection file could not be parsed or failed an invariant."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" if column is None else f"line {line}, column {column}"
            message = f"{where}: {message}"
        super().__init__(message, code="PARSE_ERROR")


class DegenerateIndexError(AppValidationError):
    """Basis element requested with equal indices."""

    def __init__(self, message: str = "Degenerate index pair"):
        super().__init__(message, code="DEGENERATE_INDEX")


class InvalidSpinError(AppValidationError):
    """Spin is not a non-negative half-integer in the supported range."""

    def __init__(self, message: str = "Invalid spin"):
        super().__init__(message, code="INVALID_SPIN")


class UnknownKernelError(AppValidationError):
    """Kernel kind is not one of A, B, C, W."""

    def __init__(self, message: str = "Unknown kernel kind"):
        super().__init__(message, code="UNKNOWN_KERNEL")


class UncoloredMatterError(AppValidationError):
    """A matter loop carries no representation."""

    def __init__(self, message: str = "Matter loop has no color"):
        super().__init__(message, code="UNCOLORED_MATTER")


class DuplicateIdentifierError(AppValidationError):
    """Two loops or surfaces share a name."""

    def __init__(self, message: str = "Duplicate identifier"):
        super().__init__(message, code="DUPLICATE_IDENTIFIER")


class TimelikeViolationError(AppValidationError):
    """Hyperlink is not time-like on the validation grid."""

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message, code="TIMELIKE_VIOLATION")


class InvalidStateError(AppError):
    """Geometry is in a state the computation cannot resolve."""

    def __init__(self, message: str = "Invalid geometric state", code: str = "INVALID_STATE"):
        super().__init__(message, code=code)


class AmbiguousPiercingError(InvalidStateError):
    """A piercing sits on a patch boundary."""

    def __init__(self, message: str = "Piercing on patch boundary"):
        super().__init__(message, code="AMBIGUOUS_PIERCING")


class NonConvergenceError(AppError):
    """Numerical limit or quadrature did not converge."""

    def __init__(self, message: str = "No convergence", code: str = "NON_CONVERGENCE"):
        super().__init__(message, code=code)


class InsufficientResolutionError(NonConvergenceError):
    """Rounding residual too large for an integer invariant."""

    def __init__(self, message: str = "Insufficient resolution"):
        super().__init__(message, code="INSUFFICIENT_RESOLUTION")
