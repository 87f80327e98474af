"""Feedforward spectral mapping trained with Levenberg-Marquardt.

The production network is 24-50-24 (tanh hidden layer, linear output) and
maps z-scored source LPC coefficient vectors a_1..a_24 into the target
speaker's coefficient space. The training core is size-generic so small
networks can be cross-checked against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import (
    ModelMismatchError,
    NonFiniteInputError,
    RootFindingFailureError,
    ShapeMismatchError,
    TooFewPairsError,
)
from .lpc import LpcFrame

MAP_FORMAT = "lpvc-map-v1"
DEFAULT_HIDDEN = 50
MIN_PAIRS = 50
STD_FLOOR = 1e-8
STABLE_ROOT_LIMIT = 0.998
STABLE_ROOT_TARGET = 0.995
VAL_PATIENCE = 6


@dataclass
class TrainConfig:
    """Levenberg-Marquardt training settings."""

    max_epochs: int = 200
    mse_goal: float = 1e-4
    lm_lambda_init: float = 1e-3
    lm_lambda_factor: float = 10.0
    lambda_max: float = 1e10
    validation_fraction: float = 0.2
    seed: int = 0
    hidden: int = DEFAULT_HIDDEN
    # Deterministic cap on training pairs; keeps normal-equation builds fast.
    max_pairs: int | None = 1500

    def __post_init__(self):
        if min(self.max_epochs, self.mse_goal, self.lm_lambda_init,
               self.lm_lambda_factor, self.lambda_max, self.hidden) <= 0:
            raise ValueError("all training settings must be positive")
        if not 0.0 <= self.validation_fraction <= 0.5:
            raise ValueError("validation_fraction must lie in [0, 0.5]")


@dataclass
class SpeakerMap:
    """Trained network weights plus feature-normalization statistics."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray
    rng_seed: int = 0
    train_log: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2", "in_mean", "in_std", "out_mean", "out_std"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        hidden, order = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.shape != (self.w2.shape[0], hidden):
            raise ValueError("layer shapes are inconsistent")
        n_out = self.w2.shape[0]
        if self.b2.shape != (n_out,):
            raise ValueError("b2 shape does not match w2")
        for name in ("in_mean", "in_std"):
            if getattr(self, name).shape != (order,):
                raise ValueError(f"{name} must have length {order}")
        for name in ("out_mean", "out_std"):
            if getattr(self, name).shape != (n_out,):
                raise ValueError(f"{name} must have length {n_out}")
        if np.any(self.in_std <= 0) or np.any(self.out_std <= 0):
            raise ValueError("normalization stds must be strictly positive")

    @property
    def order(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def save(self, path) -> None:
        doc = {
            "format": MAP_FORMAT,
            "order": self.order,
            "hidden": self.hidden,
            "w1": self.w1.ravel().tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.ravel().tolist(),
            "b2": self.b2.tolist(),
            "in_mean": self.in_mean.tolist(),
            "in_std": self.in_std.tolist(),
            "out_mean": self.out_mean.tolist(),
            "out_std": self.out_std.tolist(),
            "seed": self.rng_seed,
            "train_log": self.train_log,
        }
        Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SpeakerMap":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format") != MAP_FORMAT:
            raise ModelMismatchError(
                f"{path}: format {doc.get('format')!r}, expected {MAP_FORMAT!r}"
            )
        order, hidden = int(doc["order"]), int(doc["hidden"])
        n_out = len(doc["b2"])
        return cls(
            w1=np.array(doc["w1"]).reshape(hidden, order),
            b1=np.array(doc["b1"]),
            w2=np.array(doc["w2"]).reshape(n_out, hidden),
            b2=np.array(doc["b2"]),
            in_mean=np.array(doc["in_mean"]),
            in_std=np.array(doc["in_std"]),
            out_mean=np.array(doc["out_mean"]),
            out_std=np.array(doc["out_std"]),
            rng_seed=int(doc["seed"]),
            train_log=list(doc["train_log"]),
        )


def _net_forward(w1, b1, w2, b2, x):
    """Normalized-domain forward pass for a batch x (S x n_in)."""
    t = np.tanh(x @ w1.T + b1)
    return t, t @ w2.T + b2


def forward(smap: SpeakerMap, x: np.ndarray) -> np.ndarray:
    """Map one feature vector through the network (with de/normalization)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (smap.order,):
        raise ShapeMismatchError(f"expected a length-{smap.order} vector, got {x.shape}")
    xn = (x - smap.in_mean) / smap.in_std
    _, yn = _net_forward(smap.w1, smap.b1, smap.w2, smap.b2, xn[None, :])
    return yn[0] * smap.out_std + smap.out_mean


def forward_batch(smap: SpeakerMap, X: np.ndarray) -> np.ndarray:
    """Vectorized forward over rows of X (S x order)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != smap.order:
        raise ShapeMismatchError(f"expected (n, {smap.order}) inputs, got {X.shape}")
    xn = (X - smap.in_mean) / smap.in_std
    _, yn = _net_forward(smap.w1, smap.b1, smap.w2, smap.b2, xn)
    return yn * smap.out_std + smap.out_mean


# ---------------------------------------------------------------------------
# Levenberg-Marquardt core


def _pack(w1, b1, w2, b2):
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


def _unpack(theta, n_in, hidden, n_out):
    i0 = hidden * n_in
    i1 = i0 + hidden
    i2 = i1 + n_out * hidden
    return (
        theta[:i0].reshape(hidden, n_in),
        theta[i0:i1],
        theta[i1:i2].reshape(n_out, hidden),
        theta[i2:],
    )


def _mse(w1, b1, w2, b2, x, y):
    _, pred = _net_forward(w1, b1, w2, b2, x)
    return float(np.mean((pred - y) ** 2))


def _jacobian_dense(w1, b1, w2, b2, x):
    """Explicit residual Jacobian, rows ordered (sample, output).

    Only used at small scale: tests compare it against finite differences
    and the blockwise normal equations against it.
    """
    S, n_in = x.shape
    hidden = len(b1)
    n_out = len(b2)
    t, _ = _net_forward(w1, b1, w2, b2, x)
    d = 1.0 - t * t
    n_params = hidden * n_in + hidden + n_out * hidden + n_out
    J = np.zeros((S * n_out, n_params))
    i0 = hidden * n_in
    i1 = i0 + hidden
    i2 = i1 + n_out * hidden
    for s in range(S):
        rows = slice(s * n_out, (s + 1) * n_out)
        jw1 = np.einsum("ih,h,j->ihj", w2, d[s], x[s]).reshape(n_out, hidden * n_in)
        jb1 = w2 * d[s]
        jw2 = np.kron(np.eye(n_out), t[s])
        J[rows, :i0] = jw1
        J[rows, i0:i1] = jb1
        J[rows, i1:i2] = jw2
        J[rows, i2:] = np.eye(n_out)
    return J


def _normal_equations(w1, b1, w2, b2, x, y):
    """Assemble J^T J and J^T r blockwise without materializing J.

    Residuals are r = f(x) - y in the normalized domain. Block formulas
    follow from the chain rule through the tanh layer; the dense Jacobian
    above is the reference implementation.
    """
    S, n_in = x.shape
    hidden = len(b1)
    n_out = len(b2)
    t, pred = _net_forward(w1, b1, w2, b2, x)
    r = pred - y
    d = 1.0 - t * t

    C = w2.T @ w2                                   # hidden x hidden
    U = (d[:, :, None] * x[:, None, :]).reshape(S, hidden * n_in)
    UtU = U.T @ U
    Ud = U.T @ d
    Ut = U.T @ t
    Usum = U.sum(axis=0).reshape(hidden, n_in)
    dt = d.T @ t
    dd = d.T @ d
    tt = t.T @ t
    dsum = d.sum(axis=0)
    tsum = t.sum(axis=0)

    nw1 = hidden * n_in
    i0, i1 = nw1, nw1 + hidden
    i2 = i1 + n_out * hidden
    P = i2 + n_out
    JtJ = np.zeros((P, P))

    JtJ[:i0, :i0] = (UtU.reshape(hidden, n_in, hidden, n_in)
                     * C[:, None, :, None]).reshape(nw1, nw1)
    JtJ[:i0, i0:i1] = (Ud.reshape(hidden, n_in, hidden)
                       * C[:, None, :]).reshape(nw1, hidden)
    JtJ[:i0, i1:i2] = np.einsum(
        "ih,hjg->hjig", w2, Ut.reshape(hidden, n_in, hidden)
    ).reshape(nw1, n_out * hidden)
    JtJ[:i0, i2:] = np.einsum("ih,hj->hji", w2, Usum).reshape(nw1, n_out)
    JtJ[i0:i1, i0:i1] = C * dd
    JtJ[i0:i1, i1:i2] = np.einsum("ih,hg->hig", w2, dt).reshape(hidden, n_out * hidden)
    JtJ[i0:i1, i2:] = (w2 * dsum[None, :]).T
    JtJ[i1:i2, i1:i2] = np.kron(np.eye(n_out), tt)
    JtJ[i1:i2, i2:] = np.kron(np.eye(n_out), tsum[:, None])
    JtJ[i2:, i2:] = S * np.eye(n_out)
    lower = np.tril_indices(P, -1)
    JtJ[lower] = JtJ.T[lower]

    q = r @ w2
    qd = q * d
    g = np.concatenate([
        (qd.T @ x).ravel(),
        qd.sum(axis=0),
        (r.T @ t).ravel(),
        r.sum(axis=0),
    ])
    return JtJ, g, float(np.mean(r**2))


def train(pairs, cfg: TrainConfig | None = None, progress=None) -> SpeakerMap:
    """Fit the mapping network to (source, target) feature-vector pairs.

    Damped normal equations (J^T J + lambda I) delta = -J^T r are solved by
    Cholesky factorization; a step is accepted only when the training MSE
    decreases, so the accepted-path log is monotone. Stops at the MSE goal,
    the epoch budget, lambda overflow, or 6 consecutive validation
    increases. Deterministic for a fixed seed.

    ``progress``, when given, is called with (epoch, train_mse, val_mse).
    """
    cfg = cfg or TrainConfig()
    pairs = list(pairs)
    if len(pairs) < MIN_PAIRS:
        raise TooFewPairsError(f"need at least {MIN_PAIRS} pairs, got {len(pairs)}")
    X = np.asarray([p[0] for p in pairs], dtype=np.float64)
    Y = np.asarray([p[1] for p in pairs], dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise NonFiniteInputError("training pairs contain non-finite values")
    n_in, n_out = X.shape[1], Y.shape[1]
    hidden = cfg.hidden

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(X))
    if cfg.max_pairs is not None and len(perm) > cfg.max_pairs:
        perm = perm[: cfg.max_pairs]
    n_val = int(round(cfg.validation_fraction * len(perm)))
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    if len(tr_idx) < 2:
        raise TooFewPairsError("not enough pairs left for training after the split")

    in_mean = X[tr_idx].mean(axis=0)
    in_std = np.maximum(X[tr_idx].std(axis=0), STD_FLOOR)
    out_mean = Y[tr_idx].mean(axis=0)
    out_std = np.maximum(Y[tr_idx].std(axis=0), STD_FLOOR)
    xt = (X[tr_idx] - in_mean) / in_std
    yt = (Y[tr_idx] - out_mean) / out_std
    xv = (X[val_idx] - in_mean) / in_std
    yv = (Y[val_idx] - out_mean) / out_std

    w1 = rng.uniform(-0.5, 0.5, (hidden, n_in)) / np.sqrt(n_in)
    b1 = np.zeros(hidden)
    w2 = rng.uniform(-0.5, 0.5, (n_out, hidden)) / np.sqrt(hidden)
    b2 = np.zeros(n_out)
    theta = _pack(w1, b1, w2, b2)

    mse = _mse(w1, b1, w2, b2, xt, yt)
    log = [mse]
    lam = cfg.lm_lambda_init
    prev_val = np.inf
    val_up_streak = 0

    for epoch in range(1, cfg.max_epochs + 1):
        if mse <= cfg.mse_goal:
            break
        w1, b1, w2, b2 = _unpack(theta, n_in, hidden, n_out)
        JtJ, g, _ = _normal_equations(w1, b1, w2, b2, xt, yt)
        diag = np.arange(JtJ.shape[0])
        accepted = False
        while lam <= cfg.lambda_max:
            A = JtJ.copy()
            A[diag, diag] += lam
            try:
                factor = cho_factor(A, lower=True, check_finite=False)
            except LinAlgError:
                lam *= cfg.lm_lambda_factor
                continue
            delta = cho_solve(factor, -g, check_finite=False)
            cand = theta + delta
            new_mse = _mse(*_unpack(cand, n_in, hidden, n_out), xt, yt)
            if np.isfinite(new_mse) and new_mse < mse:
                theta = cand
                mse = new_mse
                lam = max(lam / cfg.lm_lambda_factor, 1e-12)
                accepted = True
                break
            lam *= cfg.lm_lambda_factor
        if not accepted:
            break
        log.append(mse)
        val_mse = None
        if len(val_idx):
            val_mse = _mse(*_unpack(theta, n_in, hidden, n_out), xv, yv)
            if val_mse > prev_val:
                val_up_streak += 1
            else:
                val_up_streak = 0
            prev_val = val_mse
        if progress is not None:
            progress(epoch, mse, val_mse)
        if val_up_streak >= VAL_PATIENCE:
            break

    w1, b1, w2, b2 = _unpack(theta, n_in, hidden, n_out)
    return SpeakerMap(
        w1=w1, b1=b1, w2=w2, b2=b2,
        in_mean=in_mean, in_std=in_std, out_mean=out_mean, out_std=out_std,
        rng_seed=cfg.seed, train_log=log,
    )


# ---------------------------------------------------------------------------
# Post-conversion filter stabilization


def stabilize(frame: LpcFrame) -> LpcFrame:
    """Pull poles at radius >= 0.998 back to 0.995, preserving their angles.

    Already-stable frames are returned unchanged. Raises
    RootFindingFailureError when root finding cannot be completed.
    """
    a = frame.coeffs
    if frame.order == 0:
        return frame
    if not np.all(np.isfinite(a)):
        raise RootFindingFailureError("non-finite coefficients")
    try:
        roots = np.roots(a)
    except np.linalg.LinAlgError as exc:
        raise RootFindingFailureError(str(exc)) from exc
    mags = np.abs(roots)
    if not len(mags) or mags.max() < STABLE_ROOT_LIMIT:
        return frame
    scale = np.where(mags >= STABLE_ROOT_LIMIT, STABLE_ROOT_TARGET / mags, 1.0)
    rebuilt = np.atleast_1d(np.poly(roots * scale))
    coeffs = np.real(rebuilt)
    if len(coeffs) < len(a):  # np.roots drops exact zero roots
        coeffs = np.concatenate([coeffs, np.zeros(len(a) - len(coeffs))])
    if not np.all(np.isfinite(coeffs)):
        raise RootFindingFailureError("stabilized polynomial is non-finite")
    coeffs[0] = 1.0
    return LpcFrame(coeffs, gain=frame.gain, frame_energy=frame.frame_energy,
                    silent=frame.silent)


def convert_utterance(smap: SpeakerMap, frames) -> list[LpcFrame]:
    """Map each frame's a_1..a_p through the network and stabilize the result.

    Silent frames pass through untouched. A frame whose stabilization fails
    is replaced by the previous stable frame.
    """
    frames = list(frames)
    active = [i for i, f in enumerate(frames) if not f.silent]
    out = list(frames)
    if active:
        X = np.stack([frames[i].coeffs[1:] for i in active])
        if X.shape[1] != smap.order:
            raise ShapeMismatchError(
                f"frames have order {X.shape[1]}, map expects {smap.order}"
            )
        Y = forward_batch(smap, X)
        last_good = None
        for row, i in enumerate(active):
            src = frames[i]
            mapped = LpcFrame(
                np.concatenate([[1.0], Y[row]]),
                gain=src.gain, frame_energy=src.frame_energy,
            )
            try:
                out[i] = stabilize(mapped)
                last_good = out[i]
            except RootFindingFailureError:
                out[i] = last_good if last_good is not None else src
    return out
