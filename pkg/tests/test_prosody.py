"""Pitch estimation, pitch marks, PSOLA modification, prosody transfer."""

import numpy as np
import pytest
from scipy.signal import lfilter

from lpvc.errors import BadFactorError, TrackMismatchError
from lpvc.prosody import (
    PitchMarks,
    PitchTrack,
    estimate_pitch,
    place_pitch_marks,
    psola_modify,
    transfer_prosody,
)
from lpvc.signal_io import Waveform, frame_signal

FS = 11025


def pulse_train(f0, n, fs=FS, phase=0.3):
    ph = np.cumsum(np.full(n, f0 / fs)) + phase
    out = np.zeros(n)
    out[np.flatnonzero(np.diff(np.floor(ph)) >= 1) + 1] = 1.0
    return out


def vowel_like(f0, n, fs=FS, phase=0.3):
    y = lfilter([1.0], [1.0, -0.96], pulse_train(f0, n, fs, phase))
    for c, b in ((730, 120), (1090, 160), (2440, 220)):
        r = np.exp(-np.pi * b / fs)
        th = 2 * np.pi * c / fs
        y = lfilter([1.0], [1.0, -2 * r * np.cos(th), r * r], y)
    y = y - y.mean()
    return Waveform(0.4 * y / np.max(np.abs(y)), fs)


def sawtooth(f0, n, fs=FS):
    ph = (np.arange(n) * f0 / fs) % 1.0
    return Waveform(0.5 * (2 * ph - 1), fs)


def track_of(w):
    return estimate_pitch(w, frame_signal(w))


@pytest.mark.parametrize("f0", [120.86, 102.89, 245.68, 226.32])
def test_pitch_on_reference_averages(f0):
    w = vowel_like(f0, 6836)
    track = track_of(w)
    assert track.voiced.mean() > 0.8
    assert abs(track.mean_voiced_f0() - f0) < 2.0


def test_pitch_on_sawtooth_female_average():
    track = track_of(sawtooth(245.68, 6836))
    assert abs(track.mean_voiced_f0() - 245.68) < 2.0


def test_white_noise_unvoiced():
    rng = np.random.default_rng(5)
    track = track_of(Waveform(0.4 * rng.standard_normal(6836), FS))
    assert not track.voiced.any()


def test_silence_unvoiced():
    track = track_of(Waveform(np.zeros(3000), FS))
    assert not track.voiced.any()
    assert np.all(track.f0 == 0.0)


def test_voiced_f0_within_range():
    track = track_of(vowel_like(180.0, 6836))
    voiced_f0 = track.f0[track.voiced]
    assert np.all((voiced_f0 >= 50.0) & (voiced_f0 <= 500.0))
    assert np.all(track.f0[~track.voiced] == 0.0)


def test_marks_on_pulse_train():
    w = Waveform(pulse_train(100.0, 6836), FS)
    track = track_of(w)
    marks = place_pitch_marks(w, track)
    spacing = np.diff(marks.positions)
    period = FS / 100.0
    core = spacing[2:-2]
    assert np.all(np.abs(core - period) <= 3)


def test_marks_unvoiced_uniform():
    rng = np.random.default_rng(1)
    w = Waveform(0.3 * rng.standard_normal(4000), FS)
    marks = place_pitch_marks(w, track_of(w))
    assert np.all(np.diff(marks.positions) == 110)


def test_marks_on_silence():
    w = Waveform(np.zeros(2000), FS)
    marks = place_pitch_marks(w, track_of(w))
    assert len(marks) > 0
    assert np.all(np.diff(marks.positions) == 110)


def test_marks_strictly_increasing_validated():
    with pytest.raises(ValueError):
        PitchMarks(np.array([5, 5, 9]))


def test_mark_spacing_tracks_local_period():
    w = vowel_like(130.0, 6836)
    track = track_of(w)
    marks = place_pitch_marks(w, track)
    spacing = np.diff(marks.positions)
    period = FS / 130.0
    assert np.all(spacing >= 0.69 * period)
    assert np.all(spacing <= 1.31 * period)


def test_psola_identity():
    w = vowel_like(120.0, 6836)
    marks = place_pitch_marks(w, track_of(w))
    out = psola_modify(w, marks, np.ones(len(marks)))
    assert len(out) == len(w)
    t_out = track_of(out)
    assert abs(t_out.mean_voiced_f0() - track_of(w).mean_voiced_f0()) < 0.01 * 120.0


@pytest.mark.parametrize("f0,factor", [(120.0, 2.0), (240.0, 0.5), (160.0, 1.5), (160.0, 0.75)])
def test_psola_scales_pitch(f0, factor):
    w = vowel_like(f0, 6836)
    marks = place_pitch_marks(w, track_of(w))
    out = psola_modify(w, marks, np.full(len(marks), factor))
    assert len(out) == len(w)  # duration preserved exactly
    est = track_of(out).mean_voiced_f0()
    assert abs(est - f0 * factor) / (f0 * factor) < 0.05


def test_psola_rejects_bad_factors():
    w = vowel_like(120.0, 4000)
    marks = place_pitch_marks(w, track_of(w))
    with pytest.raises(BadFactorError):
        psola_modify(w, marks, np.full(len(marks), 8.0))
    with pytest.raises(BadFactorError):
        psola_modify(w, marks, np.ones(len(marks) + 3))


def test_transfer_identical_tracks_is_identity():
    w = vowel_like(140.0, 6836)
    track = track_of(w)
    out = transfer_prosody(w, track, track)
    est = track_of(out).mean_voiced_f0()
    assert abs(est - track.mean_voiced_f0()) < 0.01 * track.mean_voiced_f0()


def test_transfer_male_to_female_contour():
    src = vowel_like(120.86, 6836, phase=0.2)
    tgt = vowel_like(245.68, 6836, phase=0.7)
    src_track, tgt_track = track_of(src), track_of(tgt)
    out = transfer_prosody(src, src_track, tgt_track)
    out_track = track_of(out)
    assert abs(out_track.mean_voiced_f0() - 245.68) / 245.68 < 0.10
    both = out_track.voiced & tgt_track.voiced
    rel = np.abs(out_track.f0[both] - tgt_track.f0[both]) / tgt_track.f0[both]
    assert np.median(rel) < 0.10


def test_transfer_unvoiced_only_passthrough():
    rng = np.random.default_rng(2)
    w = Waveform(0.3 * rng.standard_normal(5000), FS)
    track = track_of(w)
    assert not track.voiced.any()
    out = transfer_prosody(w, track, track)
    # all factors are 1, so the OLA is a near-identity
    err = np.sqrt(np.mean((out.samples - w.samples) ** 2)) / np.sqrt(np.mean(w.samples**2))
    assert err < 0.25


def test_transfer_idempotent_on_contour():
    src = vowel_like(120.0, 6836)
    tgt_track = track_of(vowel_like(240.0, 6836, phase=0.6))
    once = transfer_prosody(src, track_of(src), tgt_track)
    once_track = track_of(once)
    twice = transfer_prosody(once, once_track, tgt_track)
    twice_track = track_of(twice)
    both = once_track.voiced & twice_track.voiced
    change = np.abs(twice_track.f0[both] - once_track.f0[both]) / once_track.f0[both]
    assert np.median(change) < 0.03


def test_transfer_track_mismatch():
    w = vowel_like(120.0, 6836)
    track = track_of(w)
    short = PitchTrack(track.f0[:-5], track.voiced[:-5], track.hop,
                       track.frame_len, track.sample_rate)
    with pytest.raises(TrackMismatchError):
        transfer_prosody(w, track, short)


def test_scaled_to_mean():
    track = track_of(vowel_like(120.0, 6836))
    scaled = track.scaled_to_mean(240.0)
    assert abs(scaled.mean_voiced_f0() - 240.0) < 1e-9
    assert np.array_equal(scaled.voiced, track.voiced)
