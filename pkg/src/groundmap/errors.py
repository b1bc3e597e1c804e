"""Exception hierarchy shared by all modules.

Each exception carries an ``exit_code`` so the CLI can map failures onto
its documented exit statuses (2 config, 3 data, 4 numeric degeneracy).
"""


class GroundmapError(Exception):
    exit_code = 3


class ConfigError(GroundmapError, ValueError):
    exit_code = 2


class DataError(GroundmapError):
    exit_code = 3


class NumericError(GroundmapError):
    exit_code = 4


class DegenerateQuad(NumericError, ValueError):
    """Three or more quad vertices are (nearly) collinear."""


class SingularSystem(NumericError):
    """Linear solve failed or the matrix is not invertible."""


class AtHorizon(NumericError):
    """A point maps to (or beyond) the line at infinity."""


class AffineColumn(NumericError):
    """Column has no finite horizon, so the error law does not apply."""


class BehindCamera(NumericError):
    pass


class OutOfFrustum(DataError):
    """Point projects outside the image. ``pixel`` holds the projection."""

    def __init__(self, message, pixel=None):
        super().__init__(message)
        self.pixel = pixel


class AboveHorizon(NumericError):
    pass


class OutOfRange(DataError, ValueError):
    pass


class DegenerateAfterRetries(NumericError):
    pass


class AtOrigin(NumericError):
    pass


class InsufficientData(DataError):
    pass
