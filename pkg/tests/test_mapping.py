"""Mapping network: forward pass, LM training, stabilization, serialization."""

import numpy as np
import pytest

from lpvc.errors import (
    NonFiniteInputError,
    RootFindingFailureError,
    ShapeMismatchError,
    TooFewPairsError,
)
from lpvc.lpc import LpcFrame, silent_frame
from lpvc.mapping import (
    SpeakerMap,
    TrainConfig,
    _jacobian_dense,
    _net_forward,
    _normal_equations,
    _pack,
    _unpack,
    convert_utterance,
    forward,
    forward_batch,
    stabilize,
    train,
)


def make_map(rng, order=24, hidden=50, identity_norm=True):
    smap = SpeakerMap(
        w1=rng.standard_normal((hidden, order)) * 0.3,
        b1=rng.standard_normal(hidden) * 0.1,
        w2=rng.standard_normal((order, hidden)) * 0.3,
        b2=rng.standard_normal(order) * 0.1,
        in_mean=np.zeros(order) if identity_norm else rng.standard_normal(order),
        in_std=np.ones(order) if identity_norm else rng.uniform(0.5, 2.0, order),
        out_mean=np.zeros(order) if identity_norm else rng.standard_normal(order),
        out_std=np.ones(order) if identity_norm else rng.uniform(0.5, 2.0, order),
    )
    return smap


def test_forward_zero_network():
    smap = SpeakerMap(
        w1=np.zeros((50, 24)), b1=np.zeros(50), w2=np.zeros((24, 50)), b2=np.zeros(24),
        in_mean=np.zeros(24), in_std=np.ones(24),
        out_mean=np.zeros(24), out_std=np.ones(24),
    )
    assert np.array_equal(forward(smap, np.ones(24)), np.zeros(24))


def test_forward_bias_passthrough():
    b2 = np.linspace(-1, 1, 24)
    smap = SpeakerMap(
        w1=np.zeros((50, 24)), b1=np.zeros(50), w2=np.zeros((24, 50)), b2=b2,
        in_mean=np.zeros(24), in_std=np.ones(24),
        out_mean=np.full(24, 0.5), out_std=np.full(24, 2.0),
    )
    assert np.allclose(forward(smap, np.zeros(24)), b2 * 2.0 + 0.5)


def test_forward_matches_straight_line_reimplementation():
    rng = np.random.default_rng(0)
    smap = make_map(rng, identity_norm=False)
    x = rng.standard_normal(24)
    # independent scalar-loop evaluation of the two matrix products
    xn = [(x[j] - smap.in_mean[j]) / smap.in_std[j] for j in range(24)]
    hidden = []
    for h in range(50):
        acc = smap.b1[h]
        for j in range(24):
            acc += smap.w1[h, j] * xn[j]
        hidden.append(np.tanh(acc))
    out = []
    for i in range(24):
        acc = smap.b2[i]
        for h in range(50):
            acc += smap.w2[i, h] * hidden[h]
        out.append(acc * smap.out_std[i] + smap.out_mean[i])
    assert np.max(np.abs(forward(smap, x) - np.array(out))) < 1e-12


def test_forward_deterministic_and_shape_checked():
    rng = np.random.default_rng(1)
    smap = make_map(rng)
    x = rng.standard_normal(24)
    assert np.array_equal(forward(smap, x), forward(smap, x))
    with pytest.raises(ShapeMismatchError):
        forward(smap, np.zeros(23))
    with pytest.raises(ShapeMismatchError):
        forward_batch(smap, np.zeros((4, 23)))


def test_jacobian_against_central_differences_miniature():
    rng = np.random.default_rng(2)
    n_in, hidden, n_out, n_samples = 4, 2, 4, 5
    worst = 0.0
    for _ in range(20):
        w1 = rng.standard_normal((hidden, n_in))
        b1 = rng.standard_normal(hidden)
        w2 = rng.standard_normal((n_out, hidden))
        b2 = rng.standard_normal(n_out)
        x = rng.standard_normal((n_samples, n_in))
        J = _jacobian_dense(w1, b1, w2, b2, x)
        theta = _pack(w1, b1, w2, b2)
        h = 1e-6
        fd = np.zeros_like(J)
        for j in range(len(theta)):
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            _, fp = _net_forward(*_unpack(up, n_in, hidden, n_out), x)
            _, fm = _net_forward(*_unpack(dn, n_in, hidden, n_out), x)
            fd[:, j] = ((fp - fm) / (2 * h)).ravel()
        worst = max(worst, np.max(np.abs(J - fd)) / np.max(np.abs(fd)))
    assert worst < 1e-4


@pytest.mark.parametrize("shape", [(4, 2, 4, 6), (5, 7, 3, 11), (24, 50, 24, 4)])
def test_normal_equations_match_dense_jacobian(shape):
    n_in, hidden, n_out, n_samples = shape
    rng = np.random.default_rng(sum(shape))
    w1 = rng.standard_normal((hidden, n_in))
    b1 = rng.standard_normal(hidden)
    w2 = rng.standard_normal((n_out, hidden))
    b2 = rng.standard_normal(n_out)
    x = rng.standard_normal((n_samples, n_in))
    y = rng.standard_normal((n_samples, n_out))
    J = _jacobian_dense(w1, b1, w2, b2, x)
    _, pred = _net_forward(w1, b1, w2, b2, x)
    JtJ, g, _ = _normal_equations(w1, b1, w2, b2, x, y)
    scale = max(np.max(np.abs(J.T @ J)), 1.0)
    assert np.max(np.abs(JtJ - J.T @ J)) / scale < 1e-12
    assert np.max(np.abs(g - J.T @ (pred - y).ravel())) < 1e-9 * max(np.max(np.abs(g)), 1.0)


def test_train_linear_task_converges():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((24, 24)) * 0.3
    X = rng.standard_normal((500, 24))
    pairs = list(zip(X, X @ A.T))
    cfg = TrainConfig(max_epochs=80, mse_goal=1e-7, validation_fraction=0.0,
                      lm_lambda_init=1e-2, lm_lambda_factor=4.0, seed=1)
    smap = train(pairs, cfg)
    assert smap.train_log[-1] < 1e-6
    diffs = np.diff(smap.train_log)
    assert np.all(diffs <= 0)


def test_train_identity_task():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((400, 24))
    cfg = TrainConfig(max_epochs=80, mse_goal=1e-7, validation_fraction=0.0,
                      lm_lambda_init=1e-2, lm_lambda_factor=4.0, seed=2)
    smap = train(list(zip(X, X)), cfg)
    assert smap.train_log[-1] < 1e-6
    pred = forward_batch(smap, X)
    assert np.mean((pred - X) ** 2) < 1e-4


def test_train_input_validation():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((30, 24))
    with pytest.raises(TooFewPairsError):
        train(list(zip(X, X)))
    X = rng.standard_normal((60, 24))
    Y = X.copy()
    Y[5, 3] = np.nan
    with pytest.raises(NonFiniteInputError):
        train(list(zip(X, Y)))


def test_train_deterministic():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((200, 24))
    Y = X * 0.5 + 0.1
    cfg = TrainConfig(max_epochs=5, seed=7)
    a = train(list(zip(X, Y)), cfg)
    b = train(list(zip(X, Y)), cfg)
    assert np.array_equal(a.w1, b.w1)
    assert np.array_equal(a.w2, b.w2)
    assert a.train_log == b.train_log


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=0.7)
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)


def test_stabilize_keeps_stable_frame():
    frame = LpcFrame(np.array([1.0, -0.5]), gain=1.0, frame_energy=1.0)
    out = stabilize(frame)
    assert out is frame


def test_stabilize_single_real_root():
    frame = LpcFrame(np.array([1.0, -2.0]), gain=1.0, frame_energy=1.0)
    out = stabilize(frame)
    assert np.allclose(out.coeffs, [1.0, -0.995])


def test_stabilize_random_order24():
    rng = np.random.default_rng(8)
    n_pairs = 12
    mags = np.concatenate([rng.uniform(0.3, 0.9, 9), rng.uniform(1.05, 1.6, 3)])
    args = rng.uniform(0.2, np.pi - 0.2, n_pairs)
    # well-separated angles keep root recovery accurate
    args = np.sort(args)
    args += np.linspace(0, 0.1, n_pairs)
    roots = mags * np.exp(1j * args)
    roots = np.concatenate([roots, roots.conj()])
    coeffs = np.real(np.poly(roots))
    coeffs[0] = 1.0
    out = stabilize(LpcFrame(coeffs, gain=1.0, frame_energy=1.0))
    new_roots = np.roots(out.coeffs)
    assert np.max(np.abs(new_roots)) < 0.998
    # stable roots are preserved
    kept = np.sort_complex(new_roots[np.abs(new_roots) < 0.95])
    orig = np.sort_complex(roots[np.abs(roots) < 0.95])
    assert np.max(np.abs(kept - orig)) < 1e-9


def test_stabilize_idempotent():
    rng = np.random.default_rng(9)
    coeffs = np.concatenate([[1.0], rng.uniform(-0.4, 0.4, 24)])
    frame = LpcFrame(coeffs, gain=1.0, frame_energy=1.0)
    once = stabilize(frame)
    twice = stabilize(once)
    assert np.max(np.abs(twice.coeffs - once.coeffs)) < 1e-9


def test_stabilize_rejects_nonfinite():
    frame = LpcFrame(np.array([1.0, 0.1]), gain=1.0, frame_energy=1.0)
    frame.coeffs[1] = np.inf
    with pytest.raises(RootFindingFailureError):
        stabilize(frame)


def test_convert_utterance_identity_trained():
    rng = np.random.default_rng(10)
    X = rng.uniform(-0.3, 0.3, (300, 24))
    cfg = TrainConfig(max_epochs=60, mse_goal=1e-8, validation_fraction=0.0,
                      lm_lambda_init=1e-2, lm_lambda_factor=4.0, seed=3)
    smap = train(list(zip(X, X)), cfg)
    frames = [LpcFrame(np.concatenate([[1.0], 0.2 * rng.uniform(-1, 1, 24) / np.arange(1, 25)]),
                       gain=1.0, frame_energy=1.0) for _ in range(5)]
    out = convert_utterance(smap, frames)
    for f, g in zip(frames, out):
        pred = forward(smap, f.coeffs[1:])
        assert np.max(np.abs(pred - f.coeffs[1:])) < 1e-2


def test_convert_utterance_passes_silent_and_stabilizes():
    rng = np.random.default_rng(11)
    smap = make_map(rng)
    frames = [silent_frame(24)] + [
        LpcFrame(np.concatenate([[1.0], rng.uniform(-0.2, 0.2, 24)]), 1.0, 1.0)
        for _ in range(4)
    ]
    out = convert_utterance(smap, frames)
    assert out[0] is frames[0]
    for f in out[1:]:
        assert np.max(np.abs(np.roots(f.coeffs))) < 0.998


def test_convert_utterance_order_mismatch():
    rng = np.random.default_rng(12)
    smap = make_map(rng, order=24)
    frames = [LpcFrame(np.concatenate([[1.0], rng.uniform(-0.1, 0.1, 16)]), 1.0, 1.0)]
    with pytest.raises(ShapeMismatchError):
        convert_utterance(smap, frames)


def test_speaker_map_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(13)
    smap = make_map(rng, identity_norm=False)
    smap.train_log = [0.5, 0.25, 0.125]
    path = tmp_path / "map.json"
    smap.save(path)
    back = SpeakerMap.load(path)
    for name in ("w1", "b1", "w2", "b2", "in_mean", "in_std", "out_mean", "out_std"):
        assert np.array_equal(getattr(back, name), getattr(smap, name))
    assert back.train_log == smap.train_log
    x = rng.standard_normal(24)
    assert np.array_equal(forward(back, x), forward(smap, x))


def test_speaker_map_format_field(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else"}', encoding="utf-8")
    from lpvc.errors import ModelMismatchError

    with pytest.raises(ModelMismatchError):
        SpeakerMap.load(path)


def test_speaker_map_shape_validation():
    with pytest.raises(ValueError):
        SpeakerMap(
            w1=np.zeros((50, 24)), b1=np.zeros(49), w2=np.zeros((24, 50)), b2=np.zeros(24),
            in_mean=np.zeros(24), in_std=np.ones(24),
            out_mean=np.zeros(24), out_std=np.ones(24),
        )
    with pytest.raises(ValueError):
        SpeakerMap(
            w1=np.zeros((50, 24)), b1=np.zeros(50), w2=np.zeros((24, 50)), b2=np.zeros(24),
            in_mean=np.zeros(24), in_std=np.zeros(24),  # std must be positive
            out_mean=np.zeros(24), out_std=np.ones(24),
        )
