"""Command-line driver: gen-corpus, train, convert, evaluate, experiment."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, svgplot
from .corpus import Manifest, default_speaker_specs, generate_synthetic_corpus
from .errors import (
    BadFactorError,
    BadSpecError,
    DegenerateBaselineError,
    EmptySegmentError,
    LengthMismatchError,
    ManifestError,
    ModelMismatchError,
    NonFiniteInputError,
    NoValidFramesError,
    RootFindingFailureError,
    ShapeMismatchError,
    SingularInputError,
    TooFewPairsError,
    TrackMismatchError,
    UnstableFrameError,
    UnstableModelError,
    UnsupportedFormatError,
)
from .mapping import SpeakerMap, TrainConfig
from .pipeline import (
    PipelineConfig,
    analyze_utterance,
    convert_waveform,
    evaluate_pair,
    pitch_track_of,
    split_words,
    train_speaker_map,
)
from .prosody import estimate_pitch
from .signal_io import Waveform, frame_signal, load_wav, save_wav

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# Harness defaults for corpus-scale training; TrainConfig() keeps the
# library defaults, these are just the CLI's flag defaults.
CLI_MAX_EPOCHS = 40
CLI_LM_INIT = 1e-2
CLI_LM_FACTOR = 4.0

DATA_ERRORS = (
    ManifestError,
    UnsupportedFormatError,
    FileNotFoundError,
    BadSpecError,
    ModelMismatchError,
    TooFewPairsError,
    EmptySegmentError,
    LengthMismatchError,
    TrackMismatchError,
    ShapeMismatchError,
    OSError,
)
NUMERIC_ERRORS = (
    SingularInputError,
    UnstableModelError,
    RootFindingFailureError,
    NonFiniteInputError,
    NoValidFramesError,
    DegenerateBaselineError,
    BadFactorError,
    UnstableFrameError,
)

NOISE_LEVELS = (0.0, 20.0, 40.0)


def _pipeline_config(args) -> PipelineConfig:
    doc = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    cfg = PipelineConfig.from_dict(doc)
    if getattr(args, "order", None) is not None:
        cfg.order = args.order
    return cfg


def _train_config(args, seed=None) -> TrainConfig:
    return TrainConfig(
        max_epochs=args.max_epochs,
        lm_lambda_init=args.lm_init,
        lm_lambda_factor=args.lm_factor,
        max_pairs=args.max_pairs,
        seed=args.seed if seed is None else seed,
    )


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _f(x: float) -> str:
    return f"{x:.6f}"


def cmd_gen_corpus(args) -> int:
    manifest = generate_synthetic_corpus(
        default_speaker_specs(),
        words=args.words,
        seed=args.seed,
        out_dir=args.out,
        sample_rate=args.sample_rate,
        order=args.order if args.order is not None else 24,
    )
    n_files = sum(len(s.utterances) for s in manifest.speakers)
    print(f"wrote {n_files} files for {len(manifest.speakers)} speakers to {args.out}")
    print(f"pairings: {', '.join(f'{a}->{b}' for a, b in manifest.pairing)}")
    return EXIT_OK


def cmd_train(args) -> int:
    manifest = Manifest.load(args.manifest)
    cfg = _pipeline_config(args)
    cfg.sample_rate = manifest.sample_rate
    if args.order is None:
        cfg.order = manifest.order
    tcfg = _train_config(args)

    def progress(epoch, mse, val):
        val_s = f" val {val:.6f}" if val is not None else ""
        print(f"epoch {epoch:3d}  mse {mse:.6f}{val_s}")

    smap = train_speaker_map(
        manifest, args.source, args.target, cfg, tcfg,
        noise_db=args.noise_db, progress=progress,
    )
    smap.save(args.model)
    print(f"saved model {args.source}->{args.target} to {args.model} "
          f"(final mse {smap.train_log[-1]:.6f}, {len(smap.train_log) - 1} epochs)")
    return EXIT_OK


def cmd_convert(args) -> int:
    smap = SpeakerMap.load(args.model)
    wave = load_wav(args.input)
    cfg = _pipeline_config(args)
    cfg.sample_rate = wave.sample_rate
    if args.order is None:
        cfg.order = smap.order
    prosody = args.prosody == "on"
    target_track = None
    if prosody and args.target_wav:
        tgt_wave = load_wav(args.target_wav)
        target_track = pitch_track_of(tgt_wave, cfg)
    out = convert_waveform(
        wave, smap, cfg,
        prosody=prosody,
        target_track=target_track,
        target_mean_f0=args.target_f0,
        prosody_domain=args.prosody_domain,
    )
    save_wav(out, args.out)
    print(f"wrote {args.out} ({out.duration:.3f} s)")
    return EXIT_OK


def _emit_evaluation(res, out_dir: Path, prefix: str = "") -> None:
    rows = [
        (w.word_id, _f(w.report.mcd_source_target), _f(w.report.mcd_converted_target),
         _f(w.report.success_pct))
        for w in res.words
    ]
    _write_csv(out_dir / f"{prefix}report.csv",
               ("word_id", "mcd_source_target", "mcd_converted_target", "success_pct"),
               rows)
    lines = [f"pairing {res.source_id}->{res.target_id}",
             f"evaluation words: {len(res.words)}"]
    if res.aggregate:
        a = res.aggregate
        lines += [
            f"aggregate mcd source-target: {a.mcd_source_target:.4f} dB",
            f"aggregate mcd converted-target: {a.mcd_converted_target:.4f} dB",
            f"aggregate success: {a.success_pct:.2f} % over {a.n_frames} frames",
        ]
    for cls, rep in sorted(res.per_class.items()):
        lines.append(
            f"class {cls}: success {rep.success_pct:.2f} % "
            f"({rep.mcd_source_target:.4f} -> {rep.mcd_converted_target:.4f} dB, "
            f"{rep.n_frames} frames)"
        )
    (out_dir / f"{prefix}summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if res.per_class:
        _write_csv(out_dir / f"{prefix}classes.csv",
                   ("class", "mcd_source_target", "mcd_converted_target",
                    "success_pct", "n_frames"),
                   [(cls, _f(r.mcd_source_target), _f(r.mcd_converted_target),
                     _f(r.success_pct), r.n_frames)
                    for cls, r in sorted(res.per_class.items())])
    if res.per_phoneme:
        _write_csv(out_dir / f"{prefix}phonemes.csv",
                   ("symbol", "mean_db", "n_frames"),
                   [(sym, _f(mean), n) for sym, (mean, n) in res.per_phoneme.items()])


def cmd_evaluate(args) -> int:
    manifest = Manifest.load(args.manifest)
    smap = SpeakerMap.load(args.model)
    cfg = _pipeline_config(args)
    cfg.sample_rate = manifest.sample_rate
    if args.order is None:
        cfg.order = manifest.order
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = evaluate_pair(
        manifest, smap, args.source, args.target, cfg,
        inject=args.inject, non_parallel=args.non_parallel,
    )
    _emit_evaluation(res, out_dir)
    if res.aggregate:
        print(f"aggregate success {res.aggregate.success_pct:.2f} % "
              f"({len(res.words)} words); reports in {out_dir}")
    return EXIT_OK


def _experiment_noise_sweep(manifest, cfg, args, out_dir: Path) -> None:
    source_id, target_id = manifest.pairing[0]
    rows = []
    series = {evaluation.VOICED: [], evaluation.UNVOICED: [], "overall": []}
    for level in NOISE_LEVELS:
        tcfg = _train_config(args)
        smap = train_speaker_map(manifest, source_id, target_id, cfg, tcfg,
                                 noise_db=level)
        res = evaluate_pair(manifest, smap, source_id, target_id, cfg)
        overall = res.aggregate.success_pct if res.aggregate else float("nan")
        per = {cls: rep.success_pct for cls, rep in res.per_class.items()}
        rows.append((
            _f(level), _f(overall),
            _f(per.get(evaluation.VOICED, float("nan"))),
            _f(per.get(evaluation.UNVOICED, float("nan"))),
        ))
        series["overall"].append(overall)
        series[evaluation.VOICED].append(per.get(evaluation.VOICED, float("nan")))
        series[evaluation.UNVOICED].append(per.get(evaluation.UNVOICED, float("nan")))
        print(f"noise {level:.0f} dB: overall {overall:.2f} %, "
              f"voiced {per.get(evaluation.VOICED, float('nan')):.2f} %, "
              f"unvoiced {per.get(evaluation.UNVOICED, float('nan')):.2f} %")
    _write_csv(out_dir / "noise_sweep.csv",
               ("noise_db", "success_pct", "voiced_success_pct", "unvoiced_success_pct"),
               rows)
    svgplot.line_chart(
        out_dir / "noise_sweep.svg", list(NOISE_LEVELS), series,
        f"Training-noise sweep {source_id}->{target_id}",
        "noise level above floor (dB)", "conversion success (%)",
    )


def _experiment_prosody_ablation(manifest, cfg, args, out_dir: Path) -> None:
    rows = []
    labels, values = [], []
    for source_id, target_id in manifest.pairing:
        tcfg = _train_config(args)
        smap = train_speaker_map(manifest, source_id, target_id, cfg, tcfg)
        _, eval_words = split_words(manifest.shared_words(source_id, target_id))
        for prosody in (False, True):
            err_sq, err_n = 0.0, 0
            f0_out, f0_tgt = [], []
            for word in eval_words:
                src_wave = load_wav(manifest.wav_path(source_id, word))
                tgt_wave = load_wav(manifest.wav_path(target_id, word))
                tgt_track = pitch_track_of(tgt_wave, cfg)
                out = convert_waveform(
                    src_wave, smap, cfg, prosody=prosody,
                    target_track=tgt_track if prosody else None,
                )
                out_track = pitch_track_of(out, cfg)
                n = min(out_track.n_frames, tgt_track.n_frames)
                both = out_track.voiced[:n] & tgt_track.voiced[:n]
                if both.any():
                    diff = out_track.f0[:n][both] - tgt_track.f0[:n][both]
                    err_sq += float(np.sum(diff**2))
                    err_n += int(both.sum())
                if out_track.voiced.any():
                    f0_out.append(out_track.mean_voiced_f0())
                f0_tgt.append(tgt_track.mean_voiced_f0())
            rmse = float(np.sqrt(err_sq / err_n)) if err_n else float("nan")
            mean_out = float(np.mean(f0_out)) if f0_out else float("nan")
            mean_tgt = float(np.mean([f for f in f0_tgt if f > 0]))
            mode = "on" if prosody else "off"
            rows.append((f"{source_id}->{target_id}", mode, _f(rmse),
                         _f(mean_out), _f(mean_tgt)))
            labels.append(f"{source_id[0]}{source_id[-1]}>{target_id[0]}{target_id[-1]} {mode}")
            values.append(rmse)
            print(f"{source_id}->{target_id} prosody {mode}: pitch rmse {rmse:.2f} Hz, "
                  f"mean f0 {mean_out:.2f} (target {mean_tgt:.2f})")
    _write_csv(out_dir / "prosody_ablation.csv",
               ("pairing", "prosody", "pitch_rmse_hz", "mean_f0_hz", "target_mean_f0_hz"),
               rows)
    svgplot.bar_chart(out_dir / "prosody_ablation.svg", labels, values,
                      "Pitch RMS error with and without prosody transfer",
                      "pitch RMS error (Hz)")


def _experiment_phoneme_contribution(manifest, cfg, args, out_dir: Path) -> None:
    sums: dict = {}
    for source_id, target_id in manifest.pairing:
        for word in manifest.shared_words(source_id, target_id):
            entry = manifest.utterance(source_id, word)
            if not entry.phoneme_labels:
                continue
            src = analyze_utterance(load_wav(manifest.wav_path(source_id, word)), cfg)
            tgt = analyze_utterance(load_wav(manifest.wav_path(target_id, word)), cfg)
            n = min(len(src.frames), len(tgt.frames))
            per = evaluation.phoneme_frame_distances(
                entry.phoneme_labels, src.frames[:n], tgt.frames[:n],
                src.grid.hop, src.grid.frame_len,
            )
            for sym, dists in per.items():
                acc = sums.setdefault(sym, [0.0, 0])
                acc[0] += float(dists.sum())
                acc[1] += len(dists)
    symbols = sorted(sums)
    means = [sums[s][0] / sums[s][1] for s in symbols]
    _write_csv(out_dir / "phoneme_contribution.csv",
               ("symbol", "mean_db", "n_frames"),
               [(s, _f(m), sums[s][1]) for s, m in zip(symbols, means)])
    svgplot.bar_chart(out_dir / "phoneme_contribution.svg", symbols, means,
                      "Source-target distance by phoneme", "mean distance (dB)")
    for s, m in zip(symbols, means):
        print(f"{s}: {m:.3f} dB over {sums[s][1]} frames")


def cmd_experiment(args) -> int:
    manifest = Manifest.load(args.manifest)
    cfg = _pipeline_config(args)
    cfg.sample_rate = manifest.sample_rate
    if args.order is None:
        cfg.order = manifest.order
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.scenario == "noise_sweep":
        _experiment_noise_sweep(manifest, cfg, args, out_dir)
    elif args.scenario == "prosody_ablation":
        _experiment_prosody_ablation(manifest, cfg, args, out_dir)
    elif args.scenario == "phoneme_contribution":
        _experiment_phoneme_contribution(manifest, cfg, args, out_dir)
    print(f"experiment outputs in {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpvc",
        description="LPC voice conversion: train, convert, and evaluate speaker maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--order", type=int, default=None,
                       help="LPC order (default: from manifest/model)")
        p.add_argument("--seed", type=int, default=17)
        p.add_argument("--config", default=None,
                       help="JSON file with pipeline settings (flags override)")

    def add_train_flags(p):
        p.add_argument("--max-epochs", type=int, default=CLI_MAX_EPOCHS)
        p.add_argument("--lm-init", type=float, default=CLI_LM_INIT)
        p.add_argument("--lm-factor", type=float, default=CLI_LM_FACTOR)
        p.add_argument("--max-pairs", type=int, default=2500)

    p = sub.add_parser("gen-corpus", help="render the synthetic 4-speaker corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--words", type=int, default=100)
    p.add_argument("--sample-rate", type=int, default=11025)
    add_common(p)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", help="train a source->target speaker map")
    p.add_argument("--manifest", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--noise-db", type=float, default=None,
                   help="inject training noise this many dB above the floor")
    add_train_flags(p)
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("convert", help="convert one utterance through a model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--prosody", choices=("on", "off"), default="off")
    p.add_argument("--target-wav", default=None,
                   help="parallel target utterance supplying the pitch contour")
    p.add_argument("--target-f0", type=float, default=None,
                   help="target mean f0 in Hz when no target wav is available")
    p.add_argument("--prosody-domain", choices=("waveform", "residual"),
                   default="waveform")
    add_common(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("evaluate", help="score a model on the held-out words")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True, help="output report directory")
    p.add_argument("--inject", choices=("none", "source", "target"), default="none",
                   help="replace converted frames for harness self-checks")
    p.add_argument("--non-parallel", action="store_true",
                   help="score against shifted target words (index truncation)")
    add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a predefined experiment scenario")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scenario", required=True,
                   choices=("noise_sweep", "prosody_ablation", "phoneme_contribution"))
    p.add_argument("--out", required=True)
    add_train_flags(p)
    add_common(p)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
