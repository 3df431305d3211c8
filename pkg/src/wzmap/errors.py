"""Exception hierarchy.

Three families matter to callers: ConfigError (bad configuration, CLI exit
code 2), DataError (bad or degenerate input data, exit code 3), and anything
else (internal, exit code 4).
"""


class WzmapError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WzmapError):
    """Invalid or unusable configuration."""


class UnreadableFile(ConfigError):
    """A referenced file does not exist or cannot be read."""


class DataError(WzmapError):
    """User-supplied data violates a documented precondition."""


# --- ingestion ---------------------------------------------------------------

class MissingColumn(DataError):
    """A required column is absent from an input CSV."""


class NonMonotonicTime(DataError):
    """Timestamps are not strictly increasing, or sample spacing is broken."""


class EmptyFile(DataError):
    """An input file contains no data rows."""


class OutOfRangeValue(DataError):
    """A field value is unparseable or outside its sanity bounds."""


# --- endpoint detection ------------------------------------------------------

class SignalTooShort(DataError):
    """Signal shorter than one analysis frame."""


class AllZeroEnergy(DataError):
    """Every energy frame is zero; the axis carries no activity."""


# --- features / classification ----------------------------------------------

class IntervalTooShort(DataError):
    """Feature extraction needs at least two samples."""


class DegenerateFeatureRange(DataError):
    """A feature is constant across the training data; min-max scaling fails."""


class SingleClassData(DataError):
    """Training data contains fewer than two distinct labels."""


class SolverNonConvergence(DataError):
    """The dual solver hit its iteration cap; data or parameters are pathological."""


class InsufficientClassSamples(DataError):
    """Some class has fewer samples than the number of CV folds."""


# --- density mapping ---------------------------------------------------------

class EmptyCalibrationSet(DataError):
    """Calibration points are missing or produce zero density."""


class MixedLabels(DataError):
    """Calibration points must all carry a single behavior label."""


# --- synthetic generation ----------------------------------------------------

class SpeedUnderflow(DataError):
    """A maneuver script decelerates the vehicle below zero speed."""
