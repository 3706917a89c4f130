"""Exception types shared across the package."""


class BoundsViolation(ValueError):
    """A control input or plan leaves the admissible box."""


class HorizonMismatch(ValueError):
    """Two trajectory distributions cover different numbers of steps."""


class ProtocolError(RuntimeError):
    """A fusion or planning round was invoked with inconsistent participants."""


class RoutingError(ProtocolError):
    """A direct message was attempted between non-adjacent sensors."""


class GramFactorizationError(RuntimeError):
    """Kernel matrix could not be factorized even after jitter escalation."""


class ConfigError(ValueError):
    """Scenario configuration failed validation.

    The offending field path is kept on the exception so callers can report
    exactly which entry to fix.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
