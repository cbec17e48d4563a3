"""Exception types shared across the package."""


class InputError(ValueError):
    """Caller supplied data or parameters that violate a precondition."""


class InvariantError(RuntimeError):
    """An internal consistency check failed."""


class SearchBudgetExceeded(RuntimeError):
    """A search hit its expansion or wall-time limit before completing."""

    def __init__(self, message, enqueued=0, dequeued=0, elapsed=0.0):
        super().__init__(message)
        self.enqueued = enqueued
        self.dequeued = dequeued
        self.elapsed = elapsed
