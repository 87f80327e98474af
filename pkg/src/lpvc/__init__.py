"""LPC voice conversion toolkit.

Maps a source speaker's all-pole spectral envelopes onto a target speaker
with a small feedforward network trained by Levenberg-Marquardt, transfers
the pitch contour with TD-PSOLA, and scores conversions with mel-cepstral
distortion.
"""

from .corpus import Manifest, SyntheticSpeakerSpec, default_speaker_specs, generate_synthetic_corpus
from .evaluation import (
    EvalReport,
    PhonemeLabel,
    classify_vuv,
    inject_noise,
    lpc_to_cepstrum,
    mcd,
    phoneme_distances,
    success_rate,
    utterance_mcd,
)
from .lpc import LpcFrame, autocorrelation, inverse_filter, levinson_durbin, lpc_order, synthesis_filter
from .mapping import SpeakerMap, TrainConfig, convert_utterance, forward, stabilize, train
from .pipeline import PipelineConfig, analyze_utterance, convert_waveform, evaluate_pair, train_speaker_map
from .prosody import PitchMarks, PitchTrack, estimate_pitch, place_pitch_marks, psola_modify, transfer_prosody
from .signal_io import (
    FrameGrid,
    Waveform,
    de_emphasize,
    frame_signal,
    gaussian_window,
    load_wav,
    overlap_add,
    pre_emphasize,
    save_wav,
)

__version__ = "0.1.0"
