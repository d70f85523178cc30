class RRGPercError(Exception):
    """Base class; ``kind`` is the machine-readable error category."""

    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class InvalidInput(RRGPercError, ValueError):
    kind = "invalid-input"


class SamplingFailure(RRGPercError, RuntimeError):
    kind = "sampling-failure"

    def __init__(self, message, attempts):
        super().__init__(message)
        self.attempts = attempts

    def to_dict(self):
        return {**super().to_dict(), "attempts": self.attempts}


class ProcessComplete(RRGPercError, RuntimeError):
    """Raised by ``exploration.step`` once every half-edge is matched."""

    kind = "process-complete"


class NoRoot(RRGPercError, ValueError):
    kind = "no-root"


class PreconditionError(RRGPercError, ValueError):
    kind = "precondition"


class ResourceError(RRGPercError, MemoryError):
    kind = "resource"


class OutOfRegime(RRGPercError, ValueError):
    kind = "out-of-regime"


class OutOfRange(RRGPercError, IndexError):
    kind = "out-of-range"


class PersistenceError(RRGPercError, OSError):
    """Writing results failed; ``partial_path`` holds whatever was saved."""

    kind = "io"

    def __init__(self, message, partial_path=None):
        super().__init__(message)
        self.partial_path = partial_path

    def to_dict(self):
        return {**super().to_dict(), "partial_path": None if self.partial_path is None else str(self.partial_path)}
