"""Exception types raised across the toolkit."""


class VoiceConversionError(Exception):
    """Base class for all toolkit errors."""


# audio I/O and framing

class UnsupportedFormatError(VoiceConversionError):
    """WAV file is not 16-bit PCM mono; message names the offending header field."""


class EmptyInputError(VoiceConversionError):
    """Operation received a zero-length signal."""


class TooShortError(VoiceConversionError):
    """Waveform shorter than a single analysis frame."""


class BadFrameSpecError(VoiceConversionError):
    """Frame/overlap durations do not satisfy frame > overlap > 0."""


class BadWindowSpecError(VoiceConversionError):
    """Window length < 2 or non-positive shape parameter."""


class ShapeMismatchError(VoiceConversionError):
    """Array arguments disagree in length or shape."""


# LPC analysis / synthesis

class LagTooLargeError(VoiceConversionError):
    """Requested autocorrelation lag reaches past the frame."""


class SingularInputError(VoiceConversionError):
    """Degenerate autocorrelation: R(0) <= 0 or prediction error collapsed."""


class UnstableModelError(VoiceConversionError):
    """Synthesis filter output diverged (unstabilized frame leaked through)."""


# prosody

class BadFactorError(VoiceConversionError):
    """PSOLA pitch factor outside [0.25, 4]."""


class TrackMismatchError(VoiceConversionError):
    """Source and target pitch tracks have different frame counts."""


# spectral mapping

class TooFewPairsError(VoiceConversionError):
    """Fewer than 50 training pairs after silence exclusion."""


class NonFiniteInputError(VoiceConversionError):
    """Training data contains NaN or infinity."""


class RootFindingFailureError(VoiceConversionError):
    """Polynomial root finding did not converge for a frame."""


class ModelMismatchError(VoiceConversionError):
    """Model order does not match the configured analysis order."""


# evaluation

class UnstableFrameError(VoiceConversionError):
    """Cepstrum requested for a frame with poles on or outside the unit circle."""


class LengthMismatchError(VoiceConversionError):
    """Frame sequences to compare have different lengths."""


class NoValidFramesError(VoiceConversionError):
    """Every aligned frame pair had a silent side; mean distance undefined."""


class DegenerateBaselineError(VoiceConversionError):
    """Source and target are identical; success rate undefined."""


class EmptySegmentError(VoiceConversionError):
    """Phoneme label narrower than one frame hop."""


# datasets and CLI

class ManifestError(VoiceConversionError):
    """Manifest is malformed, inconsistent, or references missing files."""


class BadSpecError(VoiceConversionError):
    """Synthetic speaker specification violates its bounds."""
