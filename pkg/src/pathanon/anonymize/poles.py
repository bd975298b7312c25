"""Pole finding and polynomial reconstruction for all-pole filters.

Roots are refined simultaneously with the Aberth-Ehrlich iteration (a
Durand-Kerner relative with cubic convergence); the companion matrix
eigenvalues serve as a fallback start when the iteration stalls.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import RootFindingError

RESIDUAL_TOL = 1e-6
MAX_ITER = 500
_REAL_TOL = 1e-9
_LOOSE_REAL_TOL = 1e-6


@njit(cache=True)
def _horner(c, z):
    p = c[0]
    dp = 0.0 + 0.0j
    for k in range(1, c.shape[0]):
        dp = dp * z + p
        p = p * z + c[k]
    return p, dp


@njit(cache=True)
def _aberth(c, z, max_iter):
    """Refine all roots of the monic polynomial ``c`` (highest power first) in place.

    A root is frozen once its correction falls below round-off level.
    Returns the number of sweeps used.
    """
    n = z.shape[0]
    done = np.zeros(n, dtype=np.bool_)
    for it in range(max_iter):
        active = 0
        for i in range(n):
            if done[i]:
                continue
            p, dp = _horner(c, z[i])
            # stop once |p(z)| is within the rounding error of its evaluation
            az = abs(z[i])
            bound = 0.0
            for k in range(c.shape[0]):
                bound = bound * az + abs(c[k])
            if abs(p) <= 4e-16 * bound:
                done[i] = True
                continue
            ratio = p / dp if dp != 0 else p
            s = 0.0 + 0.0j
            for j in range(n):
                if j != i:
                    d = z[i] - z[j]
                    if d != 0:
                        s += 1.0 / d
            step = ratio / (1.0 - ratio * s)
            z[i] -= step
            if abs(step) <= 1e-13 * (1.0 + abs(z[i])):
                done[i] = True
            else:
                active += 1
        if active == 0:
            return it + 1
    return max_iter


@njit(cache=True)
def _newton_polish(c, z, steps):
    for i in range(z.shape[0]):
        for _ in range(steps):
            p, dp = _horner(c, z[i])
            if dp == 0 or p == 0:
                break
            z[i] -= p / dp


def _residual(c: np.ndarray, z: np.ndarray) -> float:
    return float(np.max(np.abs(np.polyval(c, z)))) if z.size else 0.0


def _initial_guess(c: np.ndarray) -> np.ndarray:
    n = len(c) - 1
    radius = abs(c[-1]) ** (1.0 / n) if c[-1] != 0 else 1.0
    radius = min(max(radius, 1e-3), 1e3)
    return radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))


def _pair_conjugates(z: np.ndarray):
    """Snap near-real roots to the real axis and force exact conjugate pairs.

    Returns ``None`` when the roots do not split into matching halves.
    """
    scale = 1.0 + np.abs(z)
    real = list(z[np.abs(z.imag) <= _REAL_TOL * scale].real)
    upper = sorted(z[z.imag > _REAL_TOL * scale], key=lambda v: abs(v.imag))
    lower = sorted(z[z.imag < -_REAL_TOL * scale], key=lambda v: abs(v.imag))
    # clustered real roots converge only to ~sqrt(eps) and may straddle the axis
    while len(upper) != len(lower):
        longer = upper if len(upper) > len(lower) else lower
        if abs(longer[0].imag) > _LOOSE_REAL_TOL * (1.0 + abs(longer[0])):
            return None
        real.append(longer.pop(0).real)
    upper = np.array(upper, dtype=np.complex128)
    upper = upper[np.lexsort((np.abs(upper), np.angle(upper)))] if upper.size else upper
    lower_conj = np.conj(np.array(lower, dtype=np.complex128))
    dist = np.abs(upper[:, None] - lower_conj[None, :])
    merged = np.empty(2 * upper.size, dtype=np.complex128)
    for i in range(upper.size):
        j = int(np.argmin(dist[i]))
        dist[:, j] = np.inf
        m = 0.5 * (upper[i] + lower_conj[j])
        merged[2 * i], merged[2 * i + 1] = m, np.conj(m)
    return np.concatenate((np.sort(np.array(real, dtype=np.float64)).astype(np.complex128), merged))


def find_poles(coeffs) -> np.ndarray:
    """Roots of ``A(z) = 1 - sum a_k z^-k`` as a conjugate-symmetric array."""
    a = np.asarray(coeffs, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("coefficients must be finite")
    nz = np.flatnonzero(a)
    if nz.size == 0:
        return np.zeros(0, dtype=np.complex128)
    a = a[:nz[-1] + 1]
    c = np.concatenate(([1.0], -a)).astype(np.complex128)
    if len(a) == 1:
        return np.array([a[0]], dtype=np.complex128)

    best_res = np.inf
    for attempt in range(2):
        if attempt == 0:
            z = _initial_guess(c)
        else:
            companion = np.diag(np.ones(len(a) - 1), -1)
            companion[0] = a
            z = np.linalg.eigvals(companion).astype(np.complex128)
        _aberth(c, z, MAX_ITER)
        _newton_polish(c, z, 2)
        paired = _pair_conjugates(z)
        if paired is None:
            continue
        res = _residual(c, paired)
        best_res = min(best_res, res)
        if res < RESIDUAL_TOL:
            return paired
    raise RootFindingError("root refinement did not converge", best_res)


def poles_to_coeffs(poles, tol: float = 1e-9) -> np.ndarray:
    """Expand ``prod(1 - p z^-1)`` back to predictor coefficients ``a``."""
    poles = np.asarray(poles, dtype=np.complex128)
    if poles.size == 0:
        return np.zeros(0)
    complex_poles = poles[np.abs(poles.imag) > tol]
    for p in complex_poles:
        if np.min(np.abs(poles - np.conj(p))) > tol * (1.0 + abs(p)):
            raise ValueError("pole set is not conjugate-symmetric")
    if (np.sum(poles.imag > tol) != np.sum(poles.imag < -tol)):
        raise ValueError("pole set is not conjugate-symmetric")
    poly = np.array([1.0 + 0.0j])
    for p in poles:
        poly = np.concatenate((poly, [0.0])) - p * np.concatenate(([0.0], poly))
    if np.max(np.abs(poly.imag)) > 1e-9 * max(1.0, np.max(np.abs(poly.real))):
        raise ValueError("reconstructed polynomial has non-negligible imaginary part")
    return -poly.real[1:]
