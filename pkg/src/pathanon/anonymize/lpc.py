"""Autocorrelation-method linear prediction.

Coefficient convention: ``A(z) = 1 - sum_k a[k] z^-k``, so the predictor is
``x[n] ~ sum_k a[k] x[n-k]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .poles import find_poles


@dataclass(frozen=True)
class LpcFrameModel:
    order: int
    coeffs: np.ndarray
    gain: float
    poles: np.ndarray = field(repr=False)
    silent: bool = False

    @property
    def radii(self) -> np.ndarray:
        return np.abs(self.poles)

    @property
    def angles(self) -> np.ndarray:
        return np.angle(self.poles)

    @property
    def inverse_filter(self) -> np.ndarray:
        """Denominator polynomial ``[1, -a1, ..., -ap]``."""
        return np.concatenate(([1.0], -self.coeffs))


def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    n = len(frame)
    nfft = 1 << int(np.ceil(np.log2(2 * n - 1)))
    spec = np.fft.rfft(frame, nfft)
    return np.fft.irfft(spec * np.conj(spec), nfft)[:max_lag + 1]


@njit(cache=True)
def levinson_durbin(r: np.ndarray, order: int):
    """Solve the normal equations for predictor coefficients.

    Returns ``(a, err, k)`` with ``a`` in the predictor convention,
    ``err`` the final prediction-error energy and ``k`` the reflection
    coefficients.
    """
    a = np.zeros(order)
    k = np.zeros(order)
    err = r[0]
    prev = np.zeros(order)
    for i in range(order):
        if err <= 0.0:
            break
        acc = r[i + 1]
        for j in range(i):
            acc -= a[j] * r[i - j]
        ki = acc / err
        k[i] = ki
        for j in range(i):
            prev[j] = a[j]
        for j in range(i):
            a[j] = prev[j] - ki * prev[i - 1 - j]
        a[i] = ki
        err *= 1.0 - ki * ki
    return a, err, k


def lpc_analyze(frame: np.ndarray, order: int, with_poles: bool = True) -> LpcFrameModel:
    frame = np.asarray(frame, dtype=np.float64)
    if order < 1:
        raise ValueError("order must be >= 1")
    if order >= len(frame):
        raise ValueError(f"order {order} must be smaller than frame length {len(frame)}")
    r = autocorrelation(frame, order)
    if r[0] <= 0.0 or not np.any(frame):
        return LpcFrameModel(order, np.zeros(order), 0.0, np.zeros(0, dtype=np.complex128), silent=True)
    a, err, _ = levinson_durbin(r, order)
    poles = find_poles(a) if with_poles else np.zeros(0, dtype=np.complex128)
    return LpcFrameModel(order, a, float(max(err, 0.0)), poles)
