"""Pitch estimation, pitch-mark placement, and TD-PSOLA pitch transfer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadFactorError, TrackMismatchError
from .signal_io import FrameGrid, Waveform

F0_MIN = 50.0
F0_MAX = 500.0
VOICING_THRESHOLD = 0.3
ENERGY_FLOOR_RATIO = 0.02
FACTOR_MIN = 0.25
FACTOR_MAX = 4.0
UNVOICED_MARK_SPACING_S = 0.010


@dataclass
class PitchTrack:
    """Per-frame fundamental frequency (Hz, 0 when unvoiced) on a frame grid."""

    f0: np.ndarray
    voiced: np.ndarray
    hop: int
    frame_len: int
    sample_rate: int

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.voiced = np.asarray(self.voiced, dtype=bool)
        if self.f0.shape != self.voiced.shape:
            raise ValueError("f0 and voiced must have equal length")

    @property
    def n_frames(self) -> int:
        return len(self.f0)

    def mean_voiced_f0(self) -> float:
        """Mean f0 over voiced frames; 0.0 for an all-unvoiced track."""
        if not self.voiced.any():
            return 0.0
        return float(self.f0[self.voiced].mean())

    def frame_of_sample(self, s: float) -> int:
        i = int(round((s - (self.frame_len - 1) / 2.0) / self.hop))
        return min(max(i, 0), self.n_frames - 1)

    def scaled_to_mean(self, target_mean_f0: float) -> "PitchTrack":
        """Shift the voiced contour so its mean matches a target speaker mean."""
        mean = self.mean_voiced_f0()
        if mean <= 0:
            return PitchTrack(self.f0.copy(), self.voiced.copy(), self.hop,
                              self.frame_len, self.sample_rate)
        f0 = np.where(self.voiced, self.f0 * (target_mean_f0 / mean), 0.0)
        return PitchTrack(f0, self.voiced.copy(), self.hop, self.frame_len, self.sample_rate)


def estimate_pitch(w: Waveform, grid: FrameGrid) -> PitchTrack:
    """Autocorrelation pitch detector over lags [fs/500, fs/50].

    A frame is voiced when the normalized autocorrelation peak reaches 0.3
    and its energy is at least 2% of the loudest frame. Peak lags are
    refined by parabolic interpolation; silence yields an all-unvoiced track.
    """
    fs = grid.sample_rate
    n_frames = grid.n_frames
    frame_len = grid.frame_len
    lag_lo = max(2, int(np.ceil(fs / F0_MAX)))
    lag_hi = min(int(np.floor(fs / F0_MIN)), frame_len - 2)
    energies = np.mean(grid.frames**2, axis=1)
    max_energy = energies.max() if n_frames else 0.0
    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    if lag_hi <= lag_lo or max_energy <= 0:
        return PitchTrack(f0, voiced, grid.hop, frame_len, fs)
    for i in range(n_frames):
        if energies[i] < ENERGY_FLOOR_RATIO * max_energy:
            continue
        frame = grid.frames[i] - grid.frames[i].mean()
        r = np.correlate(frame, frame, mode="full")[frame_len - 1 :]
        if r[0] <= 0:
            continue
        nr = r / r[0]
        band = nr[lag_lo : lag_hi + 1]
        peak_rel = int(np.argmax(band))
        tau = lag_lo + peak_rel
        if nr[tau] < VOICING_THRESHOLD:
            continue
        # parabolic refinement of the peak lag
        y0, y1, y2 = nr[tau - 1], nr[tau], nr[tau + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
        shift = min(max(shift, -0.5), 0.5)
        f0[i] = min(max(fs / (tau + shift), F0_MIN), F0_MAX)
        voiced[i] = True
    return PitchTrack(f0, voiced, grid.hop, frame_len, fs)


@dataclass
class PitchMarks:
    """Strictly increasing sample indices at estimated glottal-cycle peaks."""

    positions: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if len(self.positions) and np.any(np.diff(self.positions) <= 0):
            raise ValueError("pitch marks must be strictly increasing")

    def __len__(self):
        return len(self.positions)


def place_pitch_marks(w: Waveform, track: PitchTrack) -> PitchMarks:
    """Place glottal-cycle marks, seeding from the loudest voiced frame.

    Voiced regions get marks on local waveform maxima about one period
    apart (search window +-30% of the local period); unvoiced regions get
    uniform marks every 10 ms.
    """
    x = w.samples
    n = len(x)
    fs = w.sample_rate
    uv_step = max(1, int(round(UNVOICED_MARK_SPACING_S * fs)))
    if n == 0:
        return PitchMarks(np.empty(0, dtype=np.int64))
    if not track.voiced.any():
        return PitchMarks(np.arange(0, n, uv_step, dtype=np.int64))

    frame_energy = np.mean(np.square(
        np.lib.stride_tricks.sliding_window_view(x, track.frame_len)[:: track.hop]
    ), axis=1) if n >= track.frame_len else np.zeros(1)
    n_usable = min(len(frame_energy), track.n_frames)
    voiced_idx = np.flatnonzero(track.voiced[:n_usable])
    if len(voiced_idx) == 0:
        return PitchMarks(np.arange(0, n, uv_step, dtype=np.int64))
    seed_frame = voiced_idx[np.argmax(frame_energy[voiced_idx])]
    period = fs / track.f0[seed_frame]
    center = int(round(seed_frame * track.hop + (track.frame_len - 1) / 2.0))
    lo = max(0, int(center - period / 2))
    hi = min(n, int(center + period / 2) + 1)
    seed = lo + int(np.argmax(x[lo:hi]))

    def local_step(pos):
        fi = track.frame_of_sample(pos)
        if track.voiced[fi]:
            return fs / track.f0[fi], True
        return float(uv_step), False

    marks = [seed]
    pos = seed
    while True:
        step, is_voiced = local_step(pos)
        if is_voiced:
            lo = pos + int(round(0.7 * step))
            hi = min(n, pos + int(round(1.3 * step)) + 1)
            if lo >= n or lo >= hi:
                break
            nxt = lo + int(np.argmax(x[lo:hi]))
        else:
            nxt = pos + int(round(step))
            if nxt >= n:
                break
        if nxt <= pos:
            break
        marks.append(nxt)
        pos = nxt
    pos = seed
    while True:
        step, is_voiced = local_step(pos)
        if is_voiced:
            hi = pos - int(round(0.7 * step))
            lo = max(0, pos - int(round(1.3 * step)))
            if hi <= 0 or lo >= hi:
                break
            nxt = lo + int(np.argmax(x[lo:hi]))
        else:
            nxt = pos - int(round(step))
            if nxt < 0:
                break
        if nxt >= pos:
            break
        marks.append(nxt)
        pos = nxt
    return PitchMarks(np.array(sorted(marks), dtype=np.int64))


def _mark_periods(positions: np.ndarray, fallback: int) -> tuple[np.ndarray, np.ndarray]:
    """Left/right period of every mark, in samples."""
    m = len(positions)
    if m == 1:
        return np.array([fallback]), np.array([fallback])
    gaps = np.diff(positions)
    left = np.concatenate([[gaps[0]], gaps])
    right = np.concatenate([gaps, [gaps[-1]]])
    return left, right


def _two_period_window(pl: int, pr: int) -> np.ndarray:
    """Asymmetric Hann: rises over pl samples, peaks at 1, falls over pr."""
    rise = 0.5 - 0.5 * np.cos(np.pi * np.arange(pl) / pl)
    fall = 0.5 + 0.5 * np.cos(np.pi * np.arange(1, pr + 1) / pr)
    return np.concatenate([rise, [1.0], fall])


def psola_modify(w: Waveform, marks: PitchMarks, factor_track: np.ndarray) -> Waveform:
    """Classic TD-PSOLA pitch modification with per-mark factors.

    Two-period Hann segments centered on the analysis marks are re-laid at
    the original spacing divided by the local factor; the time axis (and
    thus the duration) is unchanged, segments being duplicated or skipped
    as needed. The overlap-added output is rescaled to the input RMS, which
    leaves the spectral envelope untouched.
    """
    factors = np.asarray(factor_track, dtype=np.float64)
    if len(factors) != len(marks):
        raise BadFactorError(
            f"{len(factors)} factors for {len(marks)} marks"
        )
    if len(factors) and (factors.min() < FACTOR_MIN or factors.max() > FACTOR_MAX):
        raise BadFactorError(
            f"factors must lie in [{FACTOR_MIN}, {FACTOR_MAX}]"
        )
    x = w.samples
    n = len(x)
    if len(marks) == 0 or n == 0:
        return Waveform(x.copy(), w.sample_rate)
    positions = marks.positions
    fallback = max(1, int(round(UNVOICED_MARK_SPACING_S * w.sample_rate)))
    pl, pr = _mark_periods(positions, fallback)

    out = np.zeros(n)
    s = float(positions[0])
    while s < n:
        j = int(np.argmin(np.abs(positions - s)))
        win = _two_period_window(int(pl[j]), int(pr[j]))
        src0 = positions[j] - int(pl[j])
        dst0 = int(round(s)) - int(pl[j])
        w0 = max(0, -src0, -dst0)
        w1 = min(len(win), n - src0, n - dst0)
        if w1 > w0:
            out[dst0 + w0 : dst0 + w1] += x[src0 + w0 : src0 + w1] * win[w0:w1]
        s += max(1.0, pr[j] / factors[j])
    rms_in = np.sqrt(np.mean(x * x))
    rms_out = np.sqrt(np.mean(out * out))
    if rms_out > 0:
        out *= rms_in / rms_out
    return Waveform(out, w.sample_rate)


def transfer_prosody(source: Waveform, src_track: PitchTrack, tgt_track: PitchTrack) -> Waveform:
    """Replace the source pitch contour with the target's via PSOLA.

    Per frame, the factor is target_f0/source_f0 clamped to [0.25, 4] when
    both frames are voiced, and 1 otherwise; factors are looked up at each
    pitch mark.
    """
    if src_track.n_frames != tgt_track.n_frames:
        raise TrackMismatchError(
            f"source track has {src_track.n_frames} frames, target {tgt_track.n_frames}"
        )
    both = src_track.voiced & tgt_track.voiced & (src_track.f0 > 0)
    frame_factor = np.ones(src_track.n_frames)
    frame_factor[both] = np.clip(
        tgt_track.f0[both] / src_track.f0[both], FACTOR_MIN, FACTOR_MAX
    )
    marks = place_pitch_marks(source, src_track)
    if len(marks) == 0:
        return Waveform(source.samples.copy(), source.sample_rate)
    mark_frames = np.array([src_track.frame_of_sample(p) for p in marks.positions])
    return psola_modify(source, marks, frame_factor[mark_frames])
