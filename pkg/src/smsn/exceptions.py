"""Exception hierarchy for the smsn package."""


class SMSNError(Exception):
    """Base class for all library errors."""


class ValidationError(SMSNError, ValueError):
    """Invalid parameters or inputs (dimension mismatch, non-SPD matrix, ...)."""


class MomentNotExistError(SMSNError, ValueError):
    """A requested moment of the mixing variable is infinite.

    ``condition`` holds the minimal condition under which it would exist,
    e.g. ``"requires nu > 4"``.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class UnsupportedOperationError(SMSNError, TypeError):
    """The mixing distribution lacks what the operation needs (e.g. a density)."""


class DegeneratePairError(SMSNError, ValueError):
    """Scatter pair is proportional, so ICS cannot isolate the skew direction."""


class ConvergenceError(SMSNError, RuntimeError):
    """A root bracket or quadrature failed to converge."""
