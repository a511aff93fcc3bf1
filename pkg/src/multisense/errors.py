"""Exception hierarchy shared across the package."""


class MultisenseError(Exception):
    """Base class for all package errors."""


class ValidationError(MultisenseError):
    """A domain object violates one of its invariants."""


class StorageError(MultisenseError):
    """A dataset directory is missing files or contains malformed metadata."""


class CalibrationError(MultisenseError):
    """Calibration inputs are non-physical."""


class TransitionError(MultisenseError):
    """An event is not legal in the current session phase."""

    def __init__(self, phase, event, reason: str):
        self.phase = phase
        self.event = event
        self.reason = reason
        super().__init__(f"event {event} rejected in phase {phase.value}: {reason}")
