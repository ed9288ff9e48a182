"""Exception taxonomy. The CLI maps CapacityError to exit code 2 and every
other NPuzzleError to exit code 1."""


class NPuzzleError(Exception):
    """Base class for all package errors."""


class InputError(NPuzzleError):
    """Malformed or inconsistent caller input."""


class CapacityError(NPuzzleError):
    """A configured size cap or compute budget was exceeded."""


class InvalidDimensionError(InputError):
    pass


class InvalidStateError(InputError):
    pass


class IllegalActionError(InputError):
    pass


class DimensionMismatchError(InputError):
    pass


class CorruptModelError(InputError):
    pass


class CorruptOracleError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class UndefinedVarianceError(InputError):
    pass


class TrainingDivergedError(NPuzzleError):
    """Raised when a training loss turns non-finite. Carries the last good
    checkpoint (may be None if divergence hit before the first one)."""

    def __init__(self, message, checkpoint=None, report=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.report = report


class StateSpaceCapError(CapacityError):
    pass


class BudgetExceededError(CapacityError):
    pass
