"""All-pole vocal tract modeling: autocorrelation, Levinson-Durbin, filtering."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter, lfiltic

from .errors import LagTooLargeError, SingularInputError, UnstableModelError

DEFAULT_ORDER = 24
ERROR_COLLAPSE = 1e-12
SYNTHESIS_BLOWUP = 1e6


@dataclass
class LpcFrame:
    """Per-frame all-pole model a[0..p] with a[0] = 1.

    ``gain`` is the square root of the final prediction-error energy and
    ``frame_energy`` is the zero-lag autocorrelation of the analyzed frame.
    Frames too quiet to solve are flagged ``silent`` and carry a flat model.
    """

    coeffs: np.ndarray
    gain: float
    frame_energy: float
    silent: bool = False
    reflection: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 1 or len(self.coeffs) == 0:
            raise ValueError("coefficients must be a non-empty vector")
        if self.coeffs[0] != 1.0:
            raise ValueError("a[0] must be exactly 1")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


def silent_frame(order: int, frame_energy: float = 0.0) -> LpcFrame:
    """Flat identity model used for frames too quiet to analyze."""
    coeffs = np.zeros(order + 1)
    coeffs[0] = 1.0
    return LpcFrame(coeffs, gain=0.0, frame_energy=frame_energy, silent=True)


def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocorrelation R(tau) = (1/N) * sum_t x(t) x(t+tau), tau = 0..max_lag."""
    frame = np.asarray(frame, dtype=np.float64)
    n = len(frame)
    if max_lag >= n:
        raise LagTooLargeError(f"max_lag {max_lag} must be < frame length {n}")
    full = np.correlate(frame, frame, mode="full")
    return full[n - 1 : n + max_lag] / n


def lpc_order(sample_rate: int, configured: int | None = None) -> int:
    """Minimum usable predictor order ceil(4 + fs/1000), or the configured one.

    A configured order below the minimum is accepted with a warning.
    """
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    minimum = math.ceil(4 + sample_rate / 1000.0)
    if configured is None:
        return minimum
    if configured < minimum:
        warnings.warn(
            f"order {configured} is below the recommended minimum {minimum} "
            f"for {sample_rate} Hz",
            stacklevel=2,
        )
    return configured


def levinson_durbin(R: np.ndarray) -> LpcFrame:
    """Solve the Toeplitz normal equations for the predictor a[0..p].

    Convention: x_hat(n) = -sum_{i>=1} a_i x(n-i), so A(z) = sum a_i z^-i is
    the denominator of the all-pole transfer function. Raises
    SingularInputError when R(0) <= 0 or the prediction error collapses.
    """
    R = np.asarray(R, dtype=np.float64)
    p = len(R) - 1
    if R[0] <= 0:
        raise SingularInputError(f"R(0) must be positive, got {R[0]}")
    a = np.zeros(p + 1)
    a[0] = 1.0
    err = R[0]
    ks = np.zeros(p)
    for i in range(1, p + 1):
        acc = R[i] + np.dot(a[1:i], R[i - 1 : 0 : -1])
        k = -acc / err
        if abs(k) >= 1.0:
            raise SingularInputError(f"reflection coefficient |k|={abs(k):.6f} >= 1 at stage {i}")
        ks[i - 1] = k
        a[1:i] = a[1:i] + k * a[i - 1 : 0 : -1]
        a[i] = k
        err *= 1.0 - k * k
        if err <= ERROR_COLLAPSE:
            raise SingularInputError(f"prediction error collapsed to {err:.3e} at stage {i}")
    return LpcFrame(a, gain=math.sqrt(err), frame_energy=R[0], reflection=ks)


def inverse_filter(frame: np.ndarray, model: LpcFrame, history: np.ndarray | None = None) -> np.ndarray:
    """FIR-filter a frame by A(z) to recover the excitation (residual).

    ``history`` supplies the samples preceding the frame; by default the
    frame is treated as starting from silence (x[n<0] = 0).
    """
    frame = np.asarray(frame, dtype=np.float64)
    if history is None or len(history) == 0:
        return lfilter(model.coeffs, [1.0], frame)
    history = np.asarray(history, dtype=np.float64)
    joined = lfilter(model.coeffs, [1.0], np.concatenate([history, frame]))
    return joined[len(history) :]


def synthesis_filter(
    excitation: np.ndarray, model: LpcFrame, state: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """All-pole filter y[n] = e[n] - sum_{i>=1} a_i y[n-i] with carried state.

    ``state`` holds the previous p output samples, oldest first, so the
    filter continues seamlessly across frames even when the model changes.
    Returns the synthesized block and the updated state.
    """
    excitation = np.asarray(excitation, dtype=np.float64)
    p = model.order
    if state is None:
        state = np.zeros(p)
    else:
        state = np.asarray(state, dtype=np.float64)
        if len(state) != p:
            raise ValueError(f"state length {len(state)} != order {p}")
    if p == 0:
        return excitation.copy(), state
    zi = lfiltic([1.0], model.coeffs, state[::-1])
    y, _ = lfilter([1.0], model.coeffs, excitation, zi=zi)
    if y.size and np.max(np.abs(y)) > SYNTHESIS_BLOWUP:
        raise UnstableModelError("synthesis output exceeded 1e6; model not stabilized")
    new_state = np.concatenate([state, y])[-p:]
    return y, new_state
