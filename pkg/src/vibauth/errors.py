"""Exception types raised by the vibauth pipeline."""


class VibauthError(Exception):
    """Base class for all vibauth errors."""


class RecordingTooShort(VibauthError):
    """Recording cannot fit the minimum number of analysis windows."""


class NoBurstFound(VibauthError):
    """No window variance exceeded the detection threshold."""


class SegmentTooShort(VibauthError):
    """Detected burst segment is shorter than the requested clip length."""


class EmptyInput(VibauthError):
    """Input has no usable samples."""


class InputTooShort(VibauthError):
    """Signal is shorter than one analysis frame."""


class BadRange(VibauthError):
    """Invalid frequency range for the mel filterbank."""


class ShapeMismatch(VibauthError):
    """Tensor or feature shapes are inconsistent with the operation."""


class DegenerateBatch(VibauthError):
    """Batch statistics cannot be computed (fewer than 2 values per channel)."""


class KernelTooLarge(VibauthError):
    """Pooling kernel exceeds the input's spatial dimensions."""


class LabelOutOfRange(VibauthError):
    """Class label outside [0, K)."""


class EmptyClass(VibauthError):
    """A declared label has no training samples."""


class StratumTooSmall(VibauthError):
    """A (user, gesture) stratum has too few samples to split."""


class TooFewUsers(VibauthError):
    """Fewer users than the scheme requires."""


class UnknownCandidate(VibauthError):
    """Step-two candidate is not a registered user."""


class InsufficientUsers(VibauthError):
    """Corpus does not support the requested user count."""


class ArchiveError(VibauthError):
    """Model archive is malformed or fails its checksum."""


class ConfigError(VibauthError):
    """Malformed configuration file or unknown key."""
