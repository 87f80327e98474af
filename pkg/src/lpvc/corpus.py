"""Dataset manifests and the synthetic parallel-speaker corpus generator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import BadSpecError, ManifestError
from .evaluation import PhonemeLabel
from .lpc import DEFAULT_ORDER
from .signal_io import Waveform, save_wav

MANIFEST_NAME = "manifest.json"
WORD_DURATION_S = 0.62
DEFAULT_SAMPLE_RATE = 11025

VOWELS = ("a", "e", "i", "o", "u")
FRICATIVES = ("s", "f")
STOPS = ("t",)
ALL_SYMBOLS = VOWELS + FRICATIVES + STOPS

# base (male) vowel formants: (center Hz, bandwidth Hz) triples; bandwidths
# kept wide so order-24 fits do not lock onto individual harmonics
_BASE_FORMANTS = {
    "a": ((730, 130), (1090, 160), (2440, 220)),
    "e": ((530, 120), (1840, 170), (2480, 220)),
    "i": ((270, 110), (2290, 170), (3010, 240)),
    "o": ((570, 120), (840, 150), (2410, 220)),
    "u": ((300, 110), (870, 150), (2240, 220)),
}
# noise-shaping resonators for unvoiced symbols
_BASE_NOISE_SHAPE = {
    "s": (4300, 700),
    "f": (2700, 900),
    "t": (3400, 1100),
}
_SYMBOL_RMS = {"a": 0.22, "e": 0.21, "i": 0.20, "o": 0.21, "u": 0.20,
               "s": 0.055, "f": 0.045, "t": 0.08}
_VOICED_NOISE_FLOOR = 0.012  # breathiness mixed into the pulse excitation


@dataclass
class SyntheticSpeakerSpec:
    """Deterministic synthetic speaker: pitch statistics plus formant targets."""

    speaker_id: str
    gender: str
    base_f0: float
    f0_jitter_pct: float = 3.0
    formants: dict = field(default_factory=dict)   # vowel -> ((center, bw), ...)
    noise_shapes: dict = field(default_factory=dict)  # consonant -> (center, bw)
    gain_contour: tuple = (0.008, 0.020)           # attack/release seconds

    def validate(self, sample_rate: int) -> None:
        if not 50.0 <= self.base_f0 <= 500.0:
            raise BadSpecError(f"{self.speaker_id}: base_f0 {self.base_f0} outside [50, 500]")
        nyquist = sample_rate / 2.0
        for sym, fmts in self.formants.items():
            for center, _bw in fmts:
                if center >= nyquist:
                    raise BadSpecError(
                        f"{self.speaker_id}: formant {center} Hz for {sym!r} >= Nyquist"
                    )
        for sym, (center, _bw) in self.noise_shapes.items():
            if center >= nyquist:
                raise BadSpecError(
                    f"{self.speaker_id}: noise center {center} Hz for {sym!r} >= Nyquist"
                )


def default_speaker_specs() -> list[SyntheticSpeakerSpec]:
    """Four speakers whose average pitches mirror the reference recordings."""
    speakers = [
        ("male1", "m", 120.86, 1.00, 1.00),
        ("male2", "m", 102.89, 0.93, 0.90),
        ("female1", "f", 245.68, 1.17, 1.22),
        ("female2", "f", 226.32, 1.11, 1.13),
    ]
    specs = []
    for sid, gender, f0, scale, cons_scale in speakers:
        formants = {
            sym: tuple((c * scale, b) for c, b in fmts)
            for sym, fmts in _BASE_FORMANTS.items()
        }
        shapes = {sym: (c * cons_scale, b) for sym, (c, b) in _BASE_NOISE_SHAPE.items()}
        specs.append(SyntheticSpeakerSpec(sid, gender, f0, formants=formants,
                                          noise_shapes=shapes))
    return specs


# ---------------------------------------------------------------------------
# Manifest


@dataclass
class UtteranceEntry:
    word_id: str
    wav_path: str
    phoneme_labels: list | None = None


@dataclass
class SpeakerEntry:
    speaker_id: str
    gender: str
    utterances: list


@dataclass
class Manifest:
    sample_rate: int
    order: int
    speakers: list
    pairing: list
    root: Path

    def speaker(self, speaker_id: str) -> SpeakerEntry:
        for s in self.speakers:
            if s.speaker_id == speaker_id:
                return s
        raise ManifestError(f"speaker {speaker_id!r} not in manifest")

    def utterance(self, speaker_id: str, word_id: str) -> UtteranceEntry:
        for u in self.speaker(speaker_id).utterances:
            if u.word_id == word_id:
                return u
        raise ManifestError(f"word {word_id!r} missing for speaker {speaker_id!r}")

    def wav_path(self, speaker_id: str, word_id: str) -> Path:
        return self.root / self.utterance(speaker_id, word_id).wav_path

    def shared_words(self, source_id: str, target_id: str) -> list[str]:
        src = {u.word_id for u in self.speaker(source_id).utterances}
        tgt = {u.word_id for u in self.speaker(target_id).utterances}
        return sorted(src & tgt)

    def validate(self) -> None:
        if self.sample_rate <= 0 or self.order <= 0:
            raise ManifestError("sample_rate and order must be positive")
        for src_id, tgt_id in self.pairing:
            src = self.speaker(src_id)
            tgt = self.speaker(tgt_id)
            src_words = {u.word_id for u in src.utterances}
            tgt_words = {u.word_id for u in tgt.utterances}
            if src_words != tgt_words:
                raise ManifestError(
                    f"pairing {src_id}->{tgt_id} is not parallel: word sets differ"
                )
            if not src_words:
                raise ManifestError(f"pairing {src_id}->{tgt_id} shares no words")
        for s in self.speakers:
            for u in s.utterances:
                path = self.root / u.wav_path
                if not path.exists():
                    raise ManifestError(f"missing audio file: {path}")

    def save(self, path=None) -> Path:
        path = Path(path) if path else self.root / MANIFEST_NAME
        doc = {
            "sample_rate": self.sample_rate,
            "order": self.order,
            "speakers": [
                {
                    "id": s.speaker_id,
                    "gender": s.gender,
                    "utterances": [
                        {
                            "word_id": u.word_id,
                            "wav_path": u.wav_path,
                            **(
                                {"phoneme_labels": [
                                    {"symbol": l.symbol, "start": l.start,
                                     "end": l.end, "voiced": l.voiced}
                                    for l in u.phoneme_labels
                                ]}
                                if u.phoneme_labels is not None else {}
                            ),
                        }
                        for u in s.utterances
                    ],
                }
                for s in self.speakers
            ],
            "pairing": [list(p) for p in self.pairing],
        }
        path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        if not path.exists():
            raise ManifestError(f"manifest not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
        try:
            speakers = [
                SpeakerEntry(
                    speaker_id=s["id"],
                    gender=s.get("gender", "?"),
                    utterances=[
                        UtteranceEntry(
                            word_id=u["word_id"],
                            wav_path=u["wav_path"],
                            phoneme_labels=[
                                PhonemeLabel(l["symbol"], int(l["start"]),
                                             int(l["end"]), bool(l["voiced"]))
                                for l in u["phoneme_labels"]
                            ] if "phoneme_labels" in u else None,
                        )
                        for u in s["utterances"]
                    ],
                )
                for s in doc["speakers"]
            ]
            manifest = cls(
                sample_rate=int(doc["sample_rate"]),
                order=int(doc.get("order", DEFAULT_ORDER)),
                speakers=speakers,
                pairing=[tuple(p) for p in doc.get("pairing", [])],
                root=path.parent,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: malformed manifest ({exc})") from exc
        manifest.validate()
        return manifest


# ---------------------------------------------------------------------------
# Synthetic rendering


def _resonator(center: float, bandwidth: float, fs: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2.0 * np.pi * center / fs
    return np.array([1.0, -2.0 * r * np.cos(theta), r * r])


def _apply_ramps(seg: np.ndarray, fs: int, attack_s: float, release_s: float) -> np.ndarray:
    n = len(seg)
    na = min(n // 2, max(1, int(attack_s * fs)))
    nr = min(n // 2, max(1, int(release_s * fs)))
    env = np.ones(n)
    env[:na] = 0.5 - 0.5 * np.cos(np.pi * np.arange(na) / na)
    env[n - nr:] = 0.5 + 0.5 * np.cos(np.pi * np.arange(1, nr + 1) / nr)
    return seg * env


def _scale_rms(seg: np.ndarray, rms: float) -> np.ndarray:
    cur = np.sqrt(np.mean(seg**2))
    return seg * (rms / cur) if cur > 0 else seg


def _render_voiced(rng, n, fs, spec: SyntheticSpeakerSpec, symbol: str,
                   gesture) -> np.ndarray:
    """Pulse-train vowel; the word-shared pitch gesture scales the speaker base f0."""
    rate, phase0, drift, start = gesture
    t = np.arange(n) / fs
    dur = n / fs
    dev = 0.6 * np.sin(2.0 * np.pi * rate * t + phase0) + 0.4 * drift * (2.0 * t / dur - 1.0)
    f0 = spec.base_f0 * (1.0 + spec.f0_jitter_pct / 100.0 * dev)
    phase = np.cumsum(f0) / fs + start
    pulses = np.zeros(n)
    pulses[np.flatnonzero(np.diff(np.floor(phase)) >= 1) + 1] = 1.0
    pulses += _VOICED_NOISE_FLOOR * rng.standard_normal(n)
    glottal = lfilter([1.0], [1.0, -0.96], pulses)
    y = glottal
    for center, bw in spec.formants[symbol]:
        y = lfilter([1.0], _resonator(center, bw, fs), y)
    y = y - y.mean()
    return _scale_rms(y, _SYMBOL_RMS[symbol])


def _render_fricative(rng, n, fs, spec: SyntheticSpeakerSpec, symbol: str) -> np.ndarray:
    center, bw = spec.noise_shapes[symbol]
    y = lfilter([1.0], _resonator(center, bw, fs), rng.standard_normal(n))
    if symbol == "s":
        y = lfilter([1.0, -0.92], [1.0], y)  # extra high-frequency tilt
    return _scale_rms(y, _SYMBOL_RMS[symbol])


def _render_stop(rng, n, fs, spec: SyntheticSpeakerSpec) -> np.ndarray:
    closure = int(0.4 * n)
    center, bw = spec.noise_shapes["t"]
    burst = lfilter([1.0], _resonator(center, bw, fs), rng.standard_normal(n - closure))
    burst *= np.exp(-np.arange(n - closure) / (0.05 * fs))
    y = np.concatenate([rng.standard_normal(closure) * 1e-4, burst])
    return _scale_rms(y, _SYMBOL_RMS["t"])


def _render_segment(rng, n, fs, spec, symbol, gesture):
    if symbol in VOWELS:
        seg = _render_voiced(rng, n, fs, spec, symbol, gesture)
    elif symbol in FRICATIVES:
        seg = _render_fricative(rng, n, fs, spec, symbol)
    else:
        seg = _render_stop(rng, n, fs, spec)
    return _apply_ramps(seg, fs, *spec.gain_contour)


def _word_scripts(n_words: int, seed: int, total: int, rng_tag: int = 0xC0) -> list:
    """Shared segment scripts: symbols plus sample boundaries, per word."""
    rng = np.random.default_rng([seed, rng_tag])
    weights = np.array([0.16, 0.13, 0.15, 0.13, 0.12, 0.12, 0.10, 0.09])
    scripts = []
    for _ in range(n_words):
        k = int(rng.integers(2, 5))
        symbols = list(rng.choice(ALL_SYMBOLS, size=k, p=weights))
        if not any(s in VOWELS for s in symbols):
            symbols[int(rng.integers(0, k))] = str(rng.choice(VOWELS))
        props = rng.uniform(0.7, 1.3, size=k)
        props /= props.sum()
        bounds = np.concatenate([[0], np.round(np.cumsum(props) * total)]).astype(int)
        bounds[-1] = total
        scripts.append([(sym, int(bounds[i]), int(bounds[i + 1]))
                        for i, sym in enumerate(symbols)])
    return scripts


def generate_synthetic_corpus(
    specs: list[SyntheticSpeakerSpec] | None,
    words: int,
    seed: int,
    out_dir,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    order: int = DEFAULT_ORDER,
    pairing: list | None = None,
) -> Manifest:
    """Render a parallel corpus of fixed-duration synthetic words.

    Every word follows the same segment script for every speaker (a
    parallel corpus); pitch and formants are per speaker. Deterministic:
    the same seed yields byte-identical files.
    """
    if words < 2:
        raise BadSpecError(f"need at least 2 words, got {words}")
    specs = specs if specs is not None else default_speaker_specs()
    for spec in specs:
        spec.validate(sample_rate)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    total = int(round(WORD_DURATION_S * sample_rate))
    scripts = _word_scripts(words, seed, total)

    speakers = []
    for s_idx, spec in enumerate(specs):
        spk_dir = out_dir / spec.speaker_id
        spk_dir.mkdir(exist_ok=True)
        utterances = []
        for w_idx, script in enumerate(scripts):
            rng = np.random.default_rng([seed, s_idx + 1, w_idx])
            parts = [
                _render_segment(rng, stop - start, sample_rate, spec, sym)
                for sym, start, stop in script
            ]
            samples = np.concatenate(parts)
            peak = np.max(np.abs(samples))
            if peak > 0.85:
                samples = samples * (0.85 / peak)
            word_id = f"w{w_idx:03d}"
            rel = f"{spec.speaker_id}/{word_id}.wav"
            save_wav(Waveform(samples, sample_rate), out_dir / rel)
            labels = [
                PhonemeLabel(sym, start, stop, voiced=sym in VOWELS)
                for sym, start, stop in script
            ]
            utterances.append(UtteranceEntry(word_id, rel, labels))
        speakers.append(SpeakerEntry(spec.speaker_id, spec.gender, utterances))

    if pairing is None:
        ids = [s.speaker_id for s in speakers]
        males = [s.speaker_id for s in speakers if s.gender == "m"]
        females = [s.speaker_id for s in speakers if s.gender == "f"]
        if len(males) >= 2 and len(females) >= 2:
            pairing = [
                (males[0], females[0]), (males[1], females[1]),
                (females[0], males[0]), (females[1], males[1]),
            ]
        else:
            pairing = [(ids[0], ids[1])]
    manifest = Manifest(sample_rate, order, speakers, list(pairing), out_dir)
    manifest.save()
    manifest.validate()
    return manifest
