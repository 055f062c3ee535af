"""Exception types raised across the package."""


class LateReverbError(Exception):
    """Base class for all errors raised by latereverb."""


class InvalidArgumentError(LateReverbError, ValueError):
    pass


class PairMismatchError(LateReverbError, ValueError):
    """Two signals that must be compared differ in length or sample rate."""


class DegenerateSignalError(LateReverbError, ValueError):
    """A signal (or band of a signal) carries no energy where energy is required."""


class BandOutOfRangeError(LateReverbError, ValueError):
    """A band edge lies above the Nyquist frequency of the signal."""


class DegenerateDistributionError(LateReverbError, ValueError):
    """A set of values has zero spread and cannot be rescaled."""


class ManifestFormatError(LateReverbError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class UnsupportedFormatError(LateReverbError, ValueError):
    pass


class InsufficientDataError(LateReverbError, ValueError):
    pass


class ConfigError(LateReverbError, ValueError):
    pass
