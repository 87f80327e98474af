"""Audio I/O, emphasis filters, framing, windowing, overlap-add."""

import numpy as np
import pytest

from lpvc.errors import (
    BadFrameSpecError,
    BadWindowSpecError,
    EmptyInputError,
    ShapeMismatchError,
    TooShortError,
    UnsupportedFormatError,
)
from lpvc.signal_io import (
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


def test_wav_roundtrip_exact_values(tmp_path):
    path = tmp_path / "t.wav"
    save_wav(Waveform(np.array([0.0, 0.5, -1.0]), 11025), path)
    back = load_wav(path)
    assert back.sample_rate == 11025
    assert np.array_equal(back.samples, [0.0, 0.5, -1.0])


def test_wav_scaling_matches_fixed_point(tmp_path):
    # raw int16 values 0, 16384, -32768 must decode to 0.0, 0.5, -1.0
    import wave

    path = tmp_path / "raw.wav"
    with wave.open(str(path), "wb") as wr:
        wr.setnchannels(1)
        wr.setsampwidth(2)
        wr.setframerate(11025)
        wr.writeframes(np.array([0, 16384, -32768], dtype="<i2").tobytes())
    back = load_wav(path)
    assert np.array_equal(back.samples, [0.0, 0.5, -1.0])


def test_wav_duration_at_reference_rate(tmp_path):
    path = tmp_path / "d.wav"
    save_wav(Waveform(np.zeros(6836), 11025), path)
    back = load_wav(path)
    assert back.sample_rate == 11025
    assert abs(back.duration - 0.62) < 0.001


def test_save_clamps_out_of_range(tmp_path):
    path = tmp_path / "c.wav"
    save_wav(Waveform(np.array([1.7, -3.0, 0.25]), 8000), path)
    back = load_wav(path)
    assert back.samples[0] == 32767 / 32768.0  # clamped to full scale
    assert back.samples[1] == -1.0
    assert back.samples[2] == 0.25


def test_wav_roundtrip_quantization_bound(tmp_path):
    rng = np.random.default_rng(42)
    w = Waveform(rng.uniform(-1.0, 1.0, 1000), 11025)
    path = tmp_path / "q.wav"
    save_wav(w, path)
    back = load_wav(path)
    assert np.max(np.abs(back.samples - w.samples)) < 2.0**-15


def test_load_save_idempotent_at_16bit(tmp_path):
    rng = np.random.default_rng(7)
    p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
    save_wav(Waveform(rng.uniform(-1, 1, 500), 11025), p1)
    first = load_wav(p1)
    save_wav(first, p2)
    assert np.array_equal(load_wav(p2).samples, first.samples)


def test_stereo_rejected(tmp_path):
    import wave

    path = tmp_path / "st.wav"
    with wave.open(str(path), "wb") as wr:
        wr.setnchannels(2)
        wr.setsampwidth(2)
        wr.setframerate(11025)
        wr.writeframes(np.zeros(100, dtype="<i2").tobytes())
    with pytest.raises(UnsupportedFormatError, match="channels"):
        load_wav(path)


def test_wrong_bit_depth_rejected(tmp_path):
    import wave

    path = tmp_path / "b8.wav"
    with wave.open(str(path), "wb") as wr:
        wr.setnchannels(1)
        wr.setsampwidth(1)
        wr.setframerate(11025)
        wr.writeframes(bytes(64))
    with pytest.raises(UnsupportedFormatError, match="width"):
        load_wav(path)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_wav("/nonexistent/nothing.wav")


def test_non_wav_rejected(tmp_path):
    path = tmp_path / "junk.wav"
    path.write_bytes(b"this is not a RIFF file at all")
    with pytest.raises(UnsupportedFormatError):
        load_wav(path)


def test_pre_emphasis_impulse():
    out = pre_emphasize(Waveform(np.array([1.0, 0.0, 0.0]), 8000))
    assert np.allclose(out.samples, [1.0, -0.95, 0.0])


def test_pre_emphasis_dc():
    out = pre_emphasize(Waveform(np.array([1.0, 1.0, 1.0]), 8000))
    assert np.allclose(out.samples, [1.0, 0.05, 0.05])


def test_pre_emphasis_matches_convolution():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(64)
    out = pre_emphasize(Waveform(x, 8000))
    ref = np.convolve(x, [1.0, -0.95])[:64]
    assert np.max(np.abs(out.samples - ref)) < 1e-12


def test_de_emphasis_inverts_impulse_case():
    out = de_emphasize(Waveform(np.array([1.0, -0.95, 0.0]), 8000))
    assert np.max(np.abs(out.samples - [1.0, 0.0, 0.0])) < 1e-12


def test_de_emphasis_zero_fixed_point():
    out = de_emphasize(Waveform(np.zeros(3), 8000))
    assert np.array_equal(out.samples, np.zeros(3))


@pytest.mark.parametrize("seed", range(5))
def test_emphasis_roundtrip_property(seed):
    rng = np.random.default_rng(seed)
    w = Waveform(rng.uniform(-1, 1, 2000), 11025)
    back = de_emphasize(pre_emphasize(w))
    assert np.max(np.abs(back.samples - w.samples)) < 1e-9


def test_emphasis_rejects_empty():
    with pytest.raises(EmptyInputError):
        pre_emphasize(Waveform(np.array([]), 8000))
    with pytest.raises(EmptyInputError):
        de_emphasize(Waveform(np.array([]), 8000))


def test_frame_geometry_at_11025():
    w = Waveform(np.zeros(6836), 11025)
    grid = frame_signal(w, 25.0, 20.0)
    assert grid.frame_len == 276
    assert grid.hop == 55
    assert grid.n_frames == (6836 - 276) // 55 + 1 == 120


def test_frame_contents_match_slices():
    rng = np.random.default_rng(3)
    w = Waveform(rng.uniform(-1, 1, 3000), 11025)
    grid = frame_signal(w)
    for i in (0, 5, grid.n_frames - 1):
        s = i * grid.hop
        assert np.array_equal(grid.frames[i], w.samples[s : s + grid.frame_len])


def test_frame_too_short():
    with pytest.raises(TooShortError):
        frame_signal(Waveform(np.zeros(100), 11025), 25.0, 20.0)


def test_frame_bad_spec():
    w = Waveform(np.zeros(5000), 11025)
    with pytest.raises(BadFrameSpecError):
        frame_signal(w, 20.0, 25.0)
    with pytest.raises(BadFrameSpecError):
        frame_signal(w, 25.0, 0.0)


def test_gaussian_window_center_and_symmetry():
    for n in (11, 276, 277):
        win = gaussian_window(n, 0.2)
        assert np.array_equal(win, win[::-1])
        assert win.max() <= 1.0
        assert win.min() > 0.0
        if n % 2:
            assert win[(n - 1) // 2] == 1.0


def test_gaussian_window_direct_value():
    win = gaussian_window(276, 0.2)
    expected = np.exp(-(137.5**2) / (2.0 * (0.2 * 276) ** 2))
    assert abs(win[0] - expected) < 1e-15
    assert abs(np.log(expected) + 3.1024) < 1e-3


def test_gaussian_window_bad_spec():
    with pytest.raises(BadWindowSpecError):
        gaussian_window(1, 0.2)
    with pytest.raises(BadWindowSpecError):
        gaussian_window(64, 0.0)


def test_ola_reconstructs_constant():
    w = Waveform(np.full(4000, 0.25), 11025)
    grid = frame_signal(w)
    win = gaussian_window(grid.frame_len)
    rec = overlap_add(FrameGrid(grid.frames * win, grid.hop, 11025), win)
    assert np.max(np.abs(rec.samples - 0.25)) < 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_ola_roundtrip_random(seed):
    rng = np.random.default_rng(seed)
    w = Waveform(rng.uniform(-1, 1, 11025), 11025)
    grid = frame_signal(w)
    win = gaussian_window(grid.frame_len)
    rec = overlap_add(FrameGrid(grid.frames * win, grid.hop, 11025), win)
    assert len(rec) == grid.covered
    assert np.max(np.abs(rec.samples - w.samples[: grid.covered])) < 1e-6


def test_ola_window_length_mismatch():
    w = Waveform(np.zeros(4000), 11025)
    grid = frame_signal(w)
    with pytest.raises(ShapeMismatchError):
        overlap_add(grid, np.ones(grid.frame_len + 1))
