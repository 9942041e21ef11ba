"""Exception types shared across loopcast."""


class LoopcastError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1
    reason = "error"


class InvalidInput(LoopcastError, ValueError):
    reason = "invalid-input"


class DegenerateGeometry(LoopcastError):
    """A measure-zero configuration the predicates refuse to guess about."""

    exit_code = 2
    reason = "degenerate"

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class SamplingFailure(LoopcastError):
    exit_code = 3
    reason = "sampling-failure"

    def __init__(self, message, attempts):
        super().__init__(message)
        self.attempts = attempts


class NotCertified(LoopcastError):
    exit_code = 2
    reason = "not-certified"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class IntegrityError(LoopcastError):
    """An internal invariant was violated (kernel or oracle bug)."""

    exit_code = 3
    reason = "integrity"
