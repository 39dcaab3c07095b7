"""Exception types raised by the calibration library."""


class CalibrationError(Exception):
    """Base class for all library errors."""


class DegenerateEndpoints(CalibrationError, ValueError):
    """Two endpoints coincide, so they do not define a line."""


class ZeroNormal(CalibrationError, ValueError):
    """The line passes through the camera centre and cannot be projected."""


class ProjectionDegenerate(CalibrationError, ValueError):
    """The projected image line lies at infinity, (l1, l2) == (0, 0)."""


class InsufficientLines(CalibrationError, ValueError):
    """Fewer line correspondences than the minimal set of three."""


class BehindCamera(CalibrationError, ValueError):
    """A point has non-positive depth in the camera frame."""


class DegenerateConfiguration(CalibrationError):
    """The line arrangement leaves part of the pose unconstrained.

    ``diagnostics`` holds the numbers that triggered the flag and
    ``partial`` whatever estimate was computed before giving up.
    """

    def __init__(self, message, diagnostics=None, partial=None):
        super().__init__(message)
        self.diagnostics = diagnostics if diagnostics is not None else {}
        self.partial = partial
