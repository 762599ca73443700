"""Exception types raised across the package."""


class JumpcalError(Exception):
    """Base class for every error raised by jumpcal."""


class ValidationError(JumpcalError, ValueError):
    """Bad user input (configs, arguments, data files)."""


class ParseError(ValidationError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class MissingColumn(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class BadSpec(ValidationError):
    pass


class BadInput(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class NegativeIntensity(ValidationError):
    pass


class NegativeDt(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class DegenerateProbabilities(ValidationError):
    pass


class EmptyTape(JumpcalError):
    pass


class NonFinite(JumpcalError, FloatingPointError):
    pass


class Diverged(JumpcalError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class QuadratureFailed(JumpcalError):
    def __init__(self, achieved, requested):
        self.achieved = achieved
        self.requested = requested
        super().__init__(
            f"quadrature error estimate {achieved:.3e} exceeds tolerance {requested:.1e}")


class CalibrationFailed(JumpcalError):
    pass
