"""Exception hierarchy shared by every stage of the gauge."""


class FilagaugeError(Exception):
    """Base class for all errors raised by filagauge."""


class ConfigError(FilagaugeError, ValueError):
    """Malformed rig configuration, calibration file or scene description."""


# acquisition

class FileUnreadable(FilagaugeError, OSError):
    pass


class UnsupportedFormat(FilagaugeError, ValueError):
    pass


class EmptySequence(FilagaugeError):
    pass


class RoiOutOfBounds(FilagaugeError, ValueError):
    pass


# segmentation

class NoFilament(FilagaugeError):
    pass


class AmbiguousBand(FilagaugeError):
    """More than one candidate band in a slice and nothing to pick one by."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class MaskTooSparse(FilagaugeError):
    pass


class ShiftOutOfRange(FilagaugeError, ValueError):
    pass


# calibration

class NonPositiveDistance(FilagaugeError, ValueError):
    pass


class NonPositiveScale(FilagaugeError, ValueError):
    pass


class EmptyCenterline(FilagaugeError, ValueError):
    pass


class TooFewSamples(FilagaugeError, ValueError):
    pass


class DegenerateSamples(FilagaugeError, ValueError):
    pass


# measurement

class InvalidOrder(FilagaugeError, ValueError):
    pass


class NonMonotonicIndex(FilagaugeError, ValueError):
    pass


# texture

class AbsentColumn(FilagaugeError, ValueError):
    pass


class MismatchedWidths(FilagaugeError, ValueError):
    pass


class InsufficientBaseline(FilagaugeError):
    pass


# spool

class LayerOutOfRange(FilagaugeError, ValueError):
    pass


# synthetic renderer

class SceneOutOfFrame(FilagaugeError, ValueError):
    pass


class IoFailure(FilagaugeError, OSError):
    pass
