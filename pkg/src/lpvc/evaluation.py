"""Objective conversion metrics: LPC cepstra, MCD, success rate, noise tools."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateBaselineError,
    EmptySegmentError,
    LengthMismatchError,
    NoValidFramesError,
    ShapeMismatchError,
    UnstableFrameError,
)
from .lpc import LpcFrame
from .prosody import PitchTrack
from .signal_io import FrameGrid, Waveform

N_CEPS = 24
MCD_CONST = 10.0 / np.log(10.0)
NOISE_FLOOR_RMS = 1e-4  # declared noise floor, fraction of full scale
SILENCE_RATIO = 0.02
ROOT_TOLERANCE = 1e-8

VOICED = "voiced"
UNVOICED = "unvoiced"
SILENCE = "silence"


@dataclass
class PhonemeLabel:
    """Labeled segment [start, end) in samples within one utterance."""

    symbol: str
    start: int
    end: int
    voiced: bool

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"label {self.symbol!r}: start must precede end")


@dataclass
class EvalReport:
    """Aggregated conversion metrics for one source/target comparison."""

    mcd_source_target: float
    mcd_converted_target: float
    success_pct: float
    per_phoneme: dict = field(default_factory=dict)
    per_class: dict = field(default_factory=dict)
    n_frames: int = 0


def lpc_to_cepstrum(frame: LpcFrame, n_ceps: int = N_CEPS) -> np.ndarray:
    """Cepstral coefficients c_1..c_n of 1/A(z) via the standard recursion.

    Requires a minimum-phase frame; raises UnstableFrameError otherwise.
    """
    a = frame.coeffs
    p = frame.order
    if p > 0 and not frame.silent:
        mags = np.abs(np.roots(a))
        if len(mags) and mags.max() >= 1.0 + ROOT_TOLERANCE:
            raise UnstableFrameError(
                f"pole magnitude {mags.max():.6f} >= 1; cepstrum undefined"
            )
    c = np.zeros(n_ceps + 1)
    for n in range(1, n_ceps + 1):
        acc = -a[n] if n <= p else 0.0
        for k in range(max(1, n - p), n):
            acc -= (k / n) * c[k] * a[n - k]
        c[n] = acc
    return c[1:]


def mcd(t: np.ndarray, p: np.ndarray) -> float:
    """Mel-cepstral distortion (10/ln 10) * sqrt(2 * sum (t_i - p_i)^2), in dB."""
    t = np.asarray(t, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if t.shape != p.shape:
        raise ShapeMismatchError(f"cepstra shapes differ: {t.shape} vs {p.shape}")
    diff = t - p
    return float(MCD_CONST * np.sqrt(2.0 * np.dot(diff, diff)))


def cepstra_matrix(frames, n_ceps: int = N_CEPS) -> tuple[np.ndarray, np.ndarray]:
    """Stack per-frame cepstra; returns (n x n_ceps array, non-silent mask)."""
    frames = list(frames)
    out = np.zeros((len(frames), n_ceps))
    valid = np.zeros(len(frames), dtype=bool)
    for i, f in enumerate(frames):
        if f.silent:
            continue
        out[i] = lpc_to_cepstrum(f, n_ceps)
        valid[i] = True
    return out, valid


def utterance_mcd(a, b, n_ceps: int = N_CEPS) -> float:
    """Mean per-frame MCD over index-aligned frames, skipping silent sides."""
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise LengthMismatchError(f"{len(a)} frames vs {len(b)} frames")
    ca, va = cepstra_matrix(a, n_ceps)
    cb, vb = cepstra_matrix(b, n_ceps)
    mask = va & vb
    if not mask.any():
        raise NoValidFramesError("no frame pair has both sides non-silent")
    diff = ca[mask] - cb[mask]
    return float(np.mean(MCD_CONST * np.sqrt(2.0 * np.sum(diff * diff, axis=1))))


def success_rate(src, conv, tgt, n_ceps: int = N_CEPS) -> EvalReport:
    """Relative MCD reduction toward the target, as a percentage.

    100 means the converted frames coincide with the target; 0 means no
    movement from the source.
    """
    mcd_st = utterance_mcd(src, tgt, n_ceps)
    mcd_ct = utterance_mcd(conv, tgt, n_ceps)
    if mcd_st == 0.0:
        raise DegenerateBaselineError("source and target are spectrally identical")
    pct = 100.0 * (mcd_st - mcd_ct) / mcd_st
    n = sum(1 for f, g in zip(src, tgt) if not (f.silent or g.silent))
    return EvalReport(mcd_st, mcd_ct, pct, n_frames=n)


def classify_vuv(w: Waveform, grid: FrameGrid, track: PitchTrack) -> list[str]:
    """Per-frame class: silence below the energy floor, else voiced/unvoiced."""
    energies = np.mean(grid.frames**2, axis=1)
    floor = SILENCE_RATIO * energies.max() if grid.n_frames else 0.0
    labels = []
    for i in range(grid.n_frames):
        if energies[i] < floor or energies[i] == 0.0:
            labels.append(SILENCE)
        elif i < track.n_frames and track.voiced[i]:
            labels.append(VOICED)
        else:
            labels.append(UNVOICED)
    return labels


def frames_in_segment(label: PhonemeLabel, grid_hop: int, frame_len: int, n_frames: int) -> np.ndarray:
    """Indices of frames whose centers fall inside [start, end)."""
    if label.end - label.start < grid_hop:
        raise EmptySegmentError(
            f"label {label.symbol!r} narrower than one hop ({grid_hop} samples)"
        )
    centers = np.arange(n_frames) * grid_hop + (frame_len - 1) / 2.0
    return np.flatnonzero((centers >= label.start) & (centers < label.end))


def phoneme_frame_distances(labels, src, tgt, hop: int, frame_len: int,
                            n_ceps: int = N_CEPS) -> dict:
    """Per-symbol arrays of frame MCDs between source and target cepstra."""
    src = list(src)
    tgt = list(tgt)
    if len(src) != len(tgt):
        raise LengthMismatchError(f"{len(src)} frames vs {len(tgt)} frames")
    cs, vs = cepstra_matrix(src, n_ceps)
    ct, vt = cepstra_matrix(tgt, n_ceps)
    ok = vs & vt
    out: dict[str, list] = {}
    for label in labels:
        idx = frames_in_segment(label, hop, frame_len, len(src))
        idx = idx[ok[idx]]
        if len(idx) == 0:
            continue
        diff = cs[idx] - ct[idx]
        dists = MCD_CONST * np.sqrt(2.0 * np.sum(diff * diff, axis=1))
        out.setdefault(label.symbol, []).extend(dists.tolist())
    return {k: np.asarray(v) for k, v in out.items()}


def phoneme_distances(labels, src, tgt, hop: int, frame_len: int,
                      n_ceps: int = N_CEPS) -> dict:
    """Mean source-target distance (dB) per phoneme symbol."""
    per_frame = phoneme_frame_distances(labels, src, tgt, hop, frame_len, n_ceps)
    return {sym: float(d.mean()) for sym, d in per_frame.items()}


def inject_noise(w: Waveform, level_db_above_floor: float, seed: int) -> Waveform:
    """Add seeded white Gaussian noise at the given level above the floor.

    The declared noise floor is an RMS of 1e-4 of full scale, so a level of
    40 dB yields noise with RMS 1e-2. Output is clipped to [-1, 1].
    """
    if level_db_above_floor < 0:
        raise ValueError("noise level must be >= 0 dB above the floor")
    rng = np.random.default_rng(seed)
    rms = NOISE_FLOOR_RMS * 10.0 ** (level_db_above_floor / 20.0)
    noisy = w.samples + rng.normal(0.0, rms, len(w.samples))
    return Waveform(np.clip(noisy, -1.0, 1.0), w.sample_rate)
