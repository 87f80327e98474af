"""End-to-end analysis, conversion, and evaluation pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation
from .corpus import Manifest
from .errors import ModelMismatchError, SingularInputError, TooFewPairsError
from .evaluation import EvalReport
from .lpc import (
    LpcFrame,
    autocorrelation,
    inverse_filter,
    levinson_durbin,
    lpc_order,
    silent_frame,
    synthesis_filter,
)
from .mapping import SpeakerMap, TrainConfig, convert_utterance, train
from .prosody import PitchTrack, estimate_pitch, transfer_prosody
from .signal_io import (
    FrameGrid,
    Waveform,
    de_emphasize,
    frame_signal,
    gaussian_window,
    load_wav,
    pre_emphasize,
)

SILENT_R0 = 1e-10
EVAL_FRACTION = 0.2


@dataclass
class PipelineConfig:
    """Analysis settings shared by every command."""

    sample_rate: int = 11025
    order: int = 24
    frame_ms: float = 25.0
    overlap_ms: float = 20.0
    window_sigma: float = 0.2
    preemphasis: float = 0.95

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {k: doc[k] for k in cls.__dataclass_fields__ if k in doc}
        return cls(**known)


@dataclass
class UtteranceAnalysis:
    """LPC analysis of one utterance in the pre-emphasized domain."""

    grid: FrameGrid
    frames: list
    residual: np.ndarray
    emphasized: np.ndarray
    sample_rate: int

    @property
    def covered(self) -> int:
        return self.grid.covered


def _block_bounds(grid: FrameGrid):
    """Contiguous synthesis blocks assigning each frame's model to its fresh span."""
    for i in range(grid.n_frames):
        start = i * grid.hop
        stop = (i + 1) * grid.hop if i < grid.n_frames - 1 else grid.covered
        yield i, start, stop


def analyze_utterance(wave: Waveform, cfg: PipelineConfig) -> UtteranceAnalysis:
    """Pre-emphasize, frame, window, and fit a per-frame all-pole model.

    Frames too quiet to solve become flat silent frames. The residual is
    computed blockwise against the true signal history, so chained
    synthesis through the same models reconstructs the signal exactly.
    """
    emphasized = pre_emphasize(wave, cfg.preemphasis)
    grid = frame_signal(emphasized, cfg.frame_ms, cfg.overlap_ms)
    window = gaussian_window(grid.frame_len, cfg.window_sigma)
    order = lpc_order(wave.sample_rate, cfg.order)
    frames = []
    for i in range(grid.n_frames):
        windowed = grid.frames[i] * window
        R = autocorrelation(windowed, order)
        if R[0] <= SILENT_R0:
            frames.append(silent_frame(order, R[0]))
            continue
        try:
            frames.append(levinson_durbin(R))
        except SingularInputError:
            frames.append(silent_frame(order, R[0]))
    x = emphasized.samples
    residual = np.empty(grid.covered)
    p = order
    for i, start, stop in _block_bounds(grid):
        history = x[max(0, start - p) : start]
        residual[start:stop] = inverse_filter(x[start:stop], frames[i], history)
    return UtteranceAnalysis(grid, frames, residual, x, wave.sample_rate)


def synthesize_utterance(residual: np.ndarray, frames, grid: FrameGrid) -> np.ndarray:
    """Drive per-frame all-pole filters with the residual, chaining state."""
    out = np.empty(grid.covered)
    state = np.zeros(frames[0].order) if frames else np.zeros(0)
    for i, start, stop in _block_bounds(grid):
        block, state = synthesis_filter(residual[start:stop], frames[i], state)
        out[start:stop] = block
    return out


def pitch_track_of(wave: Waveform, cfg: PipelineConfig) -> PitchTrack:
    """Pitch track of a raw waveform on the standard frame grid."""
    grid = frame_signal(wave, cfg.frame_ms, cfg.overlap_ms)
    return estimate_pitch(wave, grid)


def convert_waveform(
    wave: Waveform,
    smap: SpeakerMap,
    cfg: PipelineConfig,
    prosody: bool = False,
    target_track: PitchTrack | None = None,
    target_mean_f0: float | None = None,
    prosody_domain: str = "waveform",
) -> Waveform:
    """Full conversion: map the spectral envelope, reuse the source residual.

    With prosody enabled the source pitch contour is replaced by the
    target track (or the source contour rescaled to ``target_mean_f0``),
    by PSOLA on the synthesized waveform or, optionally, on the residual.
    """
    ana = analyze_utterance(wave, cfg)
    if ana.frames and ana.frames[0].order != smap.order:
        raise ModelMismatchError(
            f"analysis order {ana.frames[0].order} != model order {smap.order}"
        )
    converted = convert_utterance(smap, ana.frames)
    residual = ana.residual

    src_track = None
    if prosody:
        src_track = pitch_track_of(
            Waveform(wave.samples[: ana.covered], wave.sample_rate), cfg
        )
        if target_track is None:
            if target_mean_f0 is None:
                raise ValueError("prosody transfer needs a target track or mean f0")
            target_track = src_track.scaled_to_mean(target_mean_f0)
        if target_track.n_frames > src_track.n_frames:
            target_track = PitchTrack(
                target_track.f0[: src_track.n_frames],
                target_track.voiced[: src_track.n_frames],
                target_track.hop, target_track.frame_len, target_track.sample_rate,
            )
    if prosody and prosody_domain == "residual":
        shifted = transfer_prosody(
            Waveform(residual, wave.sample_rate), src_track, target_track
        )
        residual = shifted.samples

    synth = synthesize_utterance(residual, converted, ana.grid)
    out = de_emphasize(Waveform(synth, wave.sample_rate), cfg.preemphasis)
    if prosody and prosody_domain == "waveform":
        out = transfer_prosody(out, src_track, target_track)
    return out


# ---------------------------------------------------------------------------
# Corpus-level training and evaluation


def split_words(word_ids) -> tuple[list[str], list[str]]:
    """Deterministic 80/20 split of sorted word ids (train, evaluation)."""
    words = sorted(word_ids)
    n_eval = max(1, int(round(EVAL_FRACTION * len(words))))
    return words[:-n_eval], words[-n_eval:]


def collect_training_pairs(
    manifest: Manifest,
    source_id: str,
    target_id: str,
    cfg: PipelineConfig,
    words=None,
    noise_db: float | None = None,
    noise_seed: int = 0,
):
    """Index-aligned (source, target) coefficient pairs over parallel words.

    Frames where either side is silent are excluded. Optional seeded noise
    is injected into both speakers' recordings before analysis.
    """
    if words is None:
        words, _ = split_words(manifest.shared_words(source_id, target_id))
    pairs = []
    for w_idx, word in enumerate(words):
        src_wave = load_wav(manifest.wav_path(source_id, word))
        tgt_wave = load_wav(manifest.wav_path(target_id, word))
        if noise_db is not None:
            src_wave = evaluation.inject_noise(
                src_wave, noise_db, _derive_seed(noise_seed, 0, w_idx))
            tgt_wave = evaluation.inject_noise(
                tgt_wave, noise_db, _derive_seed(noise_seed, 1, w_idx))
        src = analyze_utterance(src_wave, cfg)
        tgt = analyze_utterance(tgt_wave, cfg)
        n = min(len(src.frames), len(tgt.frames))
        for i in range(n):
            f, g = src.frames[i], tgt.frames[i]
            if f.silent or g.silent:
                continue
            pairs.append((f.coeffs[1:].copy(), g.coeffs[1:].copy()))
    return pairs


def _derive_seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def train_speaker_map(
    manifest: Manifest,
    source_id: str,
    target_id: str,
    cfg: PipelineConfig,
    tcfg: TrainConfig,
    noise_db: float | None = None,
    progress=None,
) -> SpeakerMap:
    """Analyze the training words of a pairing and fit the mapping network."""
    shared = manifest.shared_words(source_id, target_id)
    if not shared:
        raise TooFewPairsError(f"{source_id}->{target_id}: no shared words")
    train_words, _ = split_words(shared)
    pairs = collect_training_pairs(
        manifest, source_id, target_id, cfg, train_words,
        noise_db=noise_db, noise_seed=tcfg.seed,
    )
    return train(pairs, tcfg, progress=progress)


@dataclass
class WordResult:
    word_id: str
    report: EvalReport


@dataclass
class PairEvaluation:
    """Per-word and aggregate metrics for one source->target model."""

    source_id: str
    target_id: str
    words: list = field(default_factory=list)
    aggregate: EvalReport | None = None
    per_class: dict = field(default_factory=dict)
    per_phoneme: dict = field(default_factory=dict)


def _class_masks(labels, src_frames, tgt_frames):
    ok = np.array([not (f.silent or g.silent) for f, g in zip(src_frames, tgt_frames)])
    lab = np.array(labels[: len(ok)])
    return {
        evaluation.VOICED: ok & (lab == evaluation.VOICED),
        evaluation.UNVOICED: ok & (lab == evaluation.UNVOICED),
    }


def evaluate_pair(
    manifest: Manifest,
    smap: SpeakerMap,
    source_id: str,
    target_id: str,
    cfg: PipelineConfig,
    inject: str = "none",
    non_parallel: bool = False,
    n_ceps: int = evaluation.N_CEPS,
) -> PairEvaluation:
    """Convert the held-out words and score them against the target.

    ``inject`` substitutes the converted frames with the target ("target",
    upper bound) or the source ("source", no-op conversion) for harness
    self-checks. ``non_parallel`` scores each source word against the next
    target word instead of its parallel twin, truncating to the common
    frame count (heuristic alignment).
    """
    shared = manifest.shared_words(source_id, target_id)
    _, eval_words = split_words(shared)
    result = PairEvaluation(source_id, target_id)
    dist_sums = {"st": 0.0, "ct": 0.0}
    class_sums: dict = {}
    frame_total = 0

    for k, word in enumerate(eval_words):
        tgt_word = eval_words[(k + 1) % len(eval_words)] if non_parallel else word
        src_wave = load_wav(manifest.wav_path(source_id, word))
        tgt_wave = load_wav(manifest.wav_path(target_id, tgt_word))
        src = analyze_utterance(src_wave, cfg)
        tgt = analyze_utterance(tgt_wave, cfg)
        n = min(len(src.frames), len(tgt.frames))
        src_frames = src.frames[:n]
        tgt_frames = tgt.frames[:n]
        if inject == "target":
            conv_frames = list(tgt_frames)
        elif inject == "source":
            conv_frames = list(src_frames)
        else:
            conv_frames = convert_utterance(smap, src_frames)
        report = evaluation.success_rate(src_frames, conv_frames, tgt_frames, n_ceps)
        result.words.append(WordResult(word, report))

        cs, vs = evaluation.cepstra_matrix(src_frames, n_ceps)
        cc, _ = evaluation.cepstra_matrix(conv_frames, n_ceps)
        ct, vt = evaluation.cepstra_matrix(tgt_frames, n_ceps)
        ok = vs & vt
        d_st = evaluation.MCD_CONST * np.sqrt(2.0 * np.sum((cs - ct) ** 2, axis=1))
        d_ct = evaluation.MCD_CONST * np.sqrt(2.0 * np.sum((cc - ct) ** 2, axis=1))
        dist_sums["st"] += d_st[ok].sum()
        dist_sums["ct"] += d_ct[ok].sum()
        frame_total += int(ok.sum())

        raw_grid = frame_signal(
            Waveform(src_wave.samples[: src.covered], src_wave.sample_rate),
            cfg.frame_ms, cfg.overlap_ms,
        )
        track = estimate_pitch(src_wave, raw_grid)
        labels_vuv = evaluation.classify_vuv(src_wave, raw_grid, track)
        for cls, mask in _class_masks(labels_vuv, src_frames, tgt_frames).items():
            m = mask[:n] & ok
            acc = class_sums.setdefault(cls, {"st": 0.0, "ct": 0.0, "n": 0})
            acc["st"] += d_st[m].sum()
            acc["ct"] += d_ct[m].sum()
            acc["n"] += int(m.sum())

        entry = manifest.utterance(source_id, word)
        if entry.phoneme_labels and not non_parallel:
            per = evaluation.phoneme_frame_distances(
                entry.phoneme_labels, src_frames, tgt_frames,
                src.grid.hop, src.grid.frame_len, n_ceps,
            )
            for sym, dists in per.items():
                acc = result.per_phoneme.setdefault(sym, [0.0, 0])
                acc[0] += float(dists.sum())
                acc[1] += len(dists)

    if frame_total and dist_sums["st"] > 0:
        mcd_st = dist_sums["st"] / frame_total
        mcd_ct = dist_sums["ct"] / frame_total
        result.aggregate = EvalReport(
            mcd_st, mcd_ct, 100.0 * (mcd_st - mcd_ct) / mcd_st, n_frames=frame_total
        )
    for cls, acc in class_sums.items():
        if acc["n"] and acc["st"] > 0:
            mcd_st = acc["st"] / acc["n"]
            mcd_ct = acc["ct"] / acc["n"]
            result.per_class[cls] = EvalReport(
                mcd_st, mcd_ct, 100.0 * (mcd_st - mcd_ct) / mcd_st, n_frames=acc["n"]
            )
    result.per_phoneme = {
        sym: (total / count, count)
        for sym, (total, count) in sorted(result.per_phoneme.items())
        if count
    }
    return result
