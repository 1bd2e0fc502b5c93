"""
Exception hierarchy for the shock calibration toolkit.

Every error carries the process exit code the command-line front end uses
when the error escapes a command.
"""


class ShockCalError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 1


# ============================================================================
# VALIDATION ERRORS (exit code 2)
# ============================================================================

class ValidationError(ShockCalError):
    """Input violates an operation's preconditions."""
    exit_code = 2


class DegenerateSignal(ValidationError):
    """Signal is all-zero, empty or non-finite."""


class NonPositivePeak(ValidationError):
    """A peak magnitude that must be strictly positive is not."""


class NonPositiveReferencePeak(ValidationError):
    """A reference signal used by a metric has a non-positive maximum."""


class MismatchedSets(ValidationError):
    """Prediction and reference collections differ in count or length."""


class InvalidPulseParams(ValidationError):
    """Shock pulse amplitude or width is out of range."""


class InvalidConfig(ValidationError):
    """Rig, model or training configuration is inconsistent."""


class InvalidRange(ValidationError):
    """Numeric range or parameter outside its admissible interval."""


class FrequencyAboveNyquist(ValidationError):
    """Requested natural frequency is at or above the Nyquist frequency."""


class DimensionMismatch(ValidationError):
    """Vector length does not match the layer or model width."""


class ShapeMismatch(ValidationError):
    """Parameter and gradient containers have different structure."""


class StaleTape(ValidationError):
    """Backward pass requested with a tape from outdated parameters."""


class DegenerateDecode(ValidationError):
    """Decoder output is too close to zero to renormalize."""


class EmptyDataset(ValidationError):
    """Training was requested on an empty dataset."""


class InvalidCutoff(ValidationError):
    """Low-pass cutoff is not between 0 and Nyquist."""


class FilterTooLong(ValidationError):
    """Filter has at least as many taps as the signal has samples."""


class SingularSystem(ValidationError):
    """Normal equations are not positive definite."""


class IndexOutOfRange(ValidationError):
    """Requested pair index does not exist in the dataset."""


class MissingModelForMethod(ValidationError):
    """An evaluation method needs a model or training file that was not given."""


# ============================================================================
# STORAGE ERRORS (exit code 3)
# ============================================================================

class StorageError(ShockCalError):
    """Reading or writing a file failed."""
    exit_code = 3


class FormatError(StorageError):
    """File has a wrong magic, version or size."""


class ChecksumMismatch(StorageError):
    """Stored CRC-64 does not match the payload."""


# ============================================================================
# ACCEPTANCE FAILURES (exit code 4)
# ============================================================================

class AcceptanceFailure(ShockCalError):
    """A gradient check or directional reproduction check failed."""
    exit_code = 4
