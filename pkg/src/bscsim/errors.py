"""Exception hierarchy shared by the simulator modules."""


class BscError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigError(BscError, ValueError):
    """Invalid construction parameters or scenario configuration."""


class InvalidRateError(BscError, ValueError):
    """A bitrate that is not a rung of the ladder."""


class InconsistentPlanError(BscError, ValueError):
    """A block plan whose enhancement target sits below the lower layer."""


class MisuseError(BscError, ValueError):
    """An operation called outside its precondition."""


class TraceParseError(BscError, ValueError):
    """A trace file row that cannot be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceValidationError(BscError, ValueError):
    """A trace whose samples violate the trace invariants."""


class NeverCompletesError(BscError, RuntimeError):
    """A download that cannot finish because bandwidth stays at zero."""


class SessionAbortError(BscError, RuntimeError):
    """A session that cannot be completed; carries the block in flight."""

    def __init__(self, message, block=None, time=None):
        self.block = block
        self.time = time
        super().__init__(message)
