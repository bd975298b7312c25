"""McAdams-coefficient formant shifting via frame-wise LPC pole warping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ..audio_io import AudioClip
from ..dsp import hann
from ..errors import DataError
from .lpc import lpc_analyze
from .poles import poles_to_coeffs
from .seeding import rng_for

MAX_RADIUS = 1.0 - 1e-6


@dataclass(frozen=True)
class McAdamsConfig:
    alpha: float = 0.8
    alpha_min: float = 0.75
    alpha_max: float = 0.90
    frame_ms: float = 20.0
    hop_ms: float = 10.0
    lpc_order: int = 20
    angle_epsilon: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.2:
            raise ValueError(f"alpha must lie in (0, 1.2], got {self.alpha}")
        if not 0.0 < self.alpha_min <= self.alpha_max <= 1.2:
            raise ValueError(f"invalid range: alpha_min={self.alpha_min}, alpha_max={self.alpha_max}")
        if self.lpc_order < 2:
            raise ValueError("lpc_order must be >= 2")
        if self.hop_ms <= 0 or self.frame_ms < self.hop_ms:
            raise ValueError("need 0 < hop_ms <= frame_ms")


def mcadams_transform_poles(poles, alpha: float, angle_epsilon: float = 1e-3) -> np.ndarray:
    """Warp pole angles ``phi -> phi ** alpha``, keeping radii.

    Poles with ``|phi|`` outside ``(eps, pi - eps)`` are left in place, so
    real poles stay real. Every radius is clamped below one.
    """
    poles = np.asarray(poles, dtype=np.complex128)
    radius = np.minimum(np.abs(poles), MAX_RADIUS)
    angle = np.angle(poles)
    mag = np.abs(angle)
    movable = (mag > angle_epsilon) & (mag < np.pi - angle_epsilon)
    warped = np.clip(mag[movable] ** alpha, angle_epsilon, np.pi - angle_epsilon)
    angle = angle.copy()
    angle[movable] = np.sign(angle[movable]) * warped
    out = radius * np.exp(1j * angle)
    # untouched real poles must stay exactly real
    real = ~movable & (np.abs(poles.imag) == 0)
    out[real] = np.sign(poles[real].real) * radius[real]
    return out


def anonymize_mcadams(clip: AudioClip, config: McAdamsConfig = McAdamsConfig(), alpha: float | None = None) -> AudioClip:
    """Resynthesise ``clip`` with McAdams-warped LPC envelopes.

    Each square-root-Hann frame is inverse filtered with its own LPC
    polynomial and the residual re-filtered through the warped polynomial;
    frames are recombined by overlap-add. Output has the input's length and
    is rescaled to the input's peak.
    """
    alpha = config.alpha if alpha is None else float(alpha)
    if not 0.0 < alpha <= 1.2:
        raise ValueError(f"alpha must lie in (0, 1.2], got {alpha}")
    sr = clip.sample_rate
    win = int(round(config.frame_ms * sr / 1000.0))
    hop = int(round(config.hop_ms * sr / 1000.0))
    x = clip.samples
    if len(x) < win:
        raise DataError(f"clip too short for one {config.frame_ms} ms frame")
    if win <= config.lpc_order:
        raise DataError("frame shorter than the LPC order")

    w = np.sqrt(hann(win))
    n_frames = (len(x) - win) // hop + 1
    out = np.zeros(len(x))
    wsum = np.zeros(len(x))
    for m in range(n_frames):
        seg = slice(m * hop, m * hop + win)
        frame = x[seg] * w
        wsum[seg] += w * w
        model = lpc_analyze(frame, config.lpc_order, with_poles=alpha != 1.0)
        if model.silent:
            continue
        a_orig = model.inverse_filter
        residual = lfilter(a_orig, [1.0], frame)
        if alpha == 1.0:
            a_new = a_orig
        else:
            new_poles = mcadams_transform_poles(model.poles, alpha, config.angle_epsilon)
            a_new = np.concatenate(([1.0], -poles_to_coeffs(new_poles)))
        out[seg] += lfilter([1.0], a_new, residual) * w

    covered = wsum > 1e-3
    out[covered] /= wsum[covered]
    peak_in = np.max(np.abs(x))
    peak_out = np.max(np.abs(out))
    if peak_out > 0:
        out *= peak_in / peak_out
    return clip.with_samples(out)


def sample_alpha(speaker_seed: int, config: McAdamsConfig = McAdamsConfig()) -> float:
    """Uniform draw from ``[alpha_min, alpha_max]`` for one speaker."""
    rng = rng_for(speaker_seed)
    return float(config.alpha_min + (config.alpha_max - config.alpha_min) * rng.random())
