"""Audio file I/O, pre/de-emphasis, framing, Gaussian windowing, overlap-add."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import (
    BadFrameSpecError,
    BadWindowSpecError,
    EmptyInputError,
    ShapeMismatchError,
    TooShortError,
    UnsupportedFormatError,
)

FULL_SCALE = 32768.0
PREEMPHASIS = 0.95
OLA_EPS = 1e-12


@dataclass
class Waveform:
    """Mono audio with samples normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform samples must be finite")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FrameGrid:
    """Overlapping analysis frames cut from a single waveform."""

    frames: np.ndarray  # n_frames x frame_len
    hop: int
    sample_rate: int

    @property
    def frame_len(self) -> int:
        return self.frames.shape[1]

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def covered(self) -> int:
        """Number of input samples spanned by the grid."""
        return (self.n_frames - 1) * self.hop + self.frame_len

    def frame_center(self, i: int) -> float:
        return i * self.hop + (self.frame_len - 1) / 2.0

    def frame_of_sample(self, s: float) -> int:
        """Index of the frame whose center is nearest to sample position s."""
        i = int(round((s - (self.frame_len - 1) / 2.0) / self.hop))
        return min(max(i, 0), self.n_frames - 1)


def load_wav(path) -> Waveform:
    """Read a 16-bit PCM mono RIFF/WAVE file, scaling samples by 1/32768.

    Raises FileNotFoundError for a missing file and UnsupportedFormatError
    (naming the offending header field) for stereo, compressed, or
    non-16-bit input.
    """
    try:
        reader = wave.open(str(path), "rb")
    except wave.Error as exc:
        raise UnsupportedFormatError(f"{path}: not a RIFF/WAVE PCM file ({exc})") from exc
    with reader:
        if reader.getcomptype() != "NONE":
            raise UnsupportedFormatError(
                f"{path}: compression type {reader.getcomptype()!r}, expected uncompressed PCM"
            )
        if reader.getnchannels() != 1:
            raise UnsupportedFormatError(
                f"{path}: {reader.getnchannels()} channels, expected mono"
            )
        if reader.getsampwidth() != 2:
            raise UnsupportedFormatError(
                f"{path}: sample width {8 * reader.getsampwidth()} bits, expected 16"
            )
        rate = reader.getframerate()
        raw = reader.readframes(reader.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / FULL_SCALE
    return Waveform(samples, rate)


def save_wav(w: Waveform, path) -> None:
    """Write a waveform as 16-bit PCM mono, clamping samples to [-1, 1]."""
    if not np.all(np.isfinite(w.samples)):
        raise ValueError("cannot write non-finite samples")
    scaled = np.clip(np.rint(w.samples * FULL_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as writer:
        writer.setnchannels(1)
        writer.setsampwidth(2)
        writer.setframerate(w.sample_rate)
        writer.writeframes(scaled.tobytes())


def pre_emphasize(w: Waveform, coefficient: float = PREEMPHASIS) -> Waveform:
    """Apply the first-difference emphasis y[n] = x[n] - c*x[n-1]."""
    if len(w) == 0:
        raise EmptyInputError("cannot pre-emphasize an empty waveform")
    y = lfilter([1.0, -coefficient], [1.0], w.samples)
    return Waveform(y, w.sample_rate)


def de_emphasize(w: Waveform, coefficient: float = PREEMPHASIS) -> Waveform:
    """Invert pre_emphasize: y[n] = x[n] + c*y[n-1]."""
    if len(w) == 0:
        raise EmptyInputError("cannot de-emphasize an empty waveform")
    y = lfilter([1.0], [1.0, -coefficient], w.samples)
    return Waveform(y, w.sample_rate)


def frame_signal(w: Waveform, frame_ms: float = 25.0, overlap_ms: float = 20.0) -> FrameGrid:
    """Slice a waveform into overlapping frames.

    Frame and hop lengths are rounded to the nearest sample; trailing
    samples that do not fill a complete frame are dropped.
    """
    if not frame_ms > overlap_ms > 0:
        raise BadFrameSpecError(
            f"need frame_ms > overlap_ms > 0, got {frame_ms} and {overlap_ms}"
        )
    fs = w.sample_rate
    frame_len = int(round(frame_ms * fs / 1000.0))
    hop = int(round((frame_ms - overlap_ms) * fs / 1000.0))
    if hop < 1 or frame_len <= hop:
        raise BadFrameSpecError(
            f"degenerate frame geometry: frame_len={frame_len}, hop={hop}"
        )
    if len(w) < frame_len:
        raise TooShortError(
            f"waveform of {len(w)} samples is shorter than one {frame_len}-sample frame"
        )
    windows = np.lib.stride_tricks.sliding_window_view(w.samples, frame_len)
    return FrameGrid(windows[::hop].copy(), hop, fs)


def gaussian_window(length: int, sigma: float = 0.2) -> np.ndarray:
    """Gaussian taper W(n) = exp(-(n-m)^2 / (2*(sigma*N)^2)), m = (N-1)/2."""
    if length < 2:
        raise BadWindowSpecError(f"window length must be >= 2, got {length}")
    if sigma <= 0:
        raise BadWindowSpecError(f"sigma must be positive, got {sigma}")
    n = np.arange(length, dtype=np.float64)
    m = (length - 1) / 2.0
    return np.exp(-((n - m) ** 2) / (2.0 * (sigma * length) ** 2))


def overlap_add(grid: FrameGrid, window: np.ndarray) -> Waveform:
    """Resynthesize once-windowed frames with squared-window normalization.

    Each frame is weighted by the window a second time and the sum is
    divided by the accumulated squared window, so framing followed by a
    single windowing reconstructs the covered samples exactly.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1 or len(window) != grid.frame_len:
        raise ShapeMismatchError(
            f"window length {window.shape} does not match frame length {grid.frame_len}"
        )
    total = grid.covered
    num = np.zeros(total)
    den = np.zeros(total)
    wsq = window * window
    for i in range(grid.n_frames):
        s = i * grid.hop
        num[s : s + grid.frame_len] += grid.frames[i] * window
        den[s : s + grid.frame_len] += wsq
    return Waveform(num / np.maximum(den, OLA_EPS), grid.sample_rate)
