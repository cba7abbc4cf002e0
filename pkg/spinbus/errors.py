"""Exception hierarchy shared by every spinbus module."""


class SpinBusError(Exception):
    """Base class for all simulator errors."""


class DomainError(SpinBusError, ValueError):
    """Arguments outside the domain of an operation (bad layout, sector, index)."""


class ConfigError(SpinBusError, ValueError):
    """Experiment config failed schema validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(SpinBusError, RuntimeError):
    """A numerical routine failed; `context` names the module/sector involved."""

    def __init__(self, message: str, context: str = ""):
        self.context = context
        super().__init__(f"[{context}] {message}" if context else message)


class CalibrationError(NumericalError):
    """Transfer amplitudes too small to read gate phases from a channel."""


class IntegratorError(NumericalError):
    """Lindblad integration drifted even after shrinking the step."""
