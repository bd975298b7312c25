"""Spectral primitives: framing, STFT/ISTFT, mel features, PSD, zero-phase
filtering and Griffin-Lim resynthesis.

Frames are never padded: a clip of ``n`` samples yields
``(n - win) // hop + 1`` frames. All windows are periodic Hann.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal

from .audio_io import AudioClip
from .errors import DataError

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FeatureConfig:
    n_mels: int = 40
    window_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    sample_rate: int = 16000

    def __post_init__(self):
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if self.hop_ms <= 0 or self.window_ms <= 0:
            raise ValueError("window and hop must be positive")
        if self.hop_ms > self.window_ms:
            raise ValueError("hop_ms must not exceed window_ms")
        if self.fft_size < self.win_length:
            raise ValueError("fft_size must cover the analysis window")

    @property
    def win_length(self) -> int:
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def for_rate(self, sample_rate: int) -> "FeatureConfig":
        return FeatureConfig(self.n_mels, self.window_ms, self.hop_ms, self.fft_size, sample_rate)


ASV_PRESET = FeatureConfig(n_mels=40, window_ms=25.0, hop_ms=10.0, fft_size=512)
CLASSIFIER_PRESET = FeatureConfig(n_mels=80, window_ms=25.0, hop_ms=10.0, fft_size=1024)


@dataclass(frozen=True)
class MelSpectrogram:
    frames: np.ndarray  # (n_frames, n_mels)
    config: FeatureConfig
    source_id: Optional[str] = None

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def to_text(self) -> str:
        """One header line with the config, then one line per frame."""
        lines = ["# " + json.dumps(asdict(self.config), sort_keys=True)]
        lines += [" ".join(f"{v:.9g}" for v in row) for row in self.frames]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source_id: Optional[str] = None) -> "MelSpectrogram":
        header, *rows = [ln for ln in text.splitlines() if ln.strip()]
        config = FeatureConfig(**json.loads(header.lstrip("# ")))
        frames = np.array([[float(v) for v in r.split()] for r in rows]).reshape(-1, config.n_mels)
        return cls(frames, config, source_id)

    def to_json(self) -> str:
        return json.dumps(
            {"config": asdict(self.config), "source_id": self.source_id, "frames": self.frames.tolist()},
            sort_keys=True,
        )


@dataclass(frozen=True)
class PsdCurve:
    freqs: np.ndarray
    power: np.ndarray
    segment_size: int

    @property
    def peak_frequency(self) -> float:
        return float(self.freqs[int(np.argmax(self.power))])


def hann(n: int) -> np.ndarray:
    return signal.get_window("hann", n, fftbins=True)


def frame_count(n_samples: int, win: int, hop: int) -> int:
    return 0 if n_samples < win else (n_samples - win) // hop + 1


def _check_rate(clip: AudioClip, config: FeatureConfig) -> None:
    if clip.sample_rate != config.sample_rate:
        raise DataError(f"clip rate {clip.sample_rate} Hz does not match config {config.sample_rate} Hz")


def frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    n = frame_count(len(x), win, hop)
    idx = np.arange(win)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def stft(clip: AudioClip, config: FeatureConfig) -> np.ndarray:
    """One-sided complex STFT, shape (frames, fft_size // 2 + 1)."""
    _check_rate(clip, config)
    win, hop = config.win_length, config.hop_length
    if len(clip) < win:
        raise DataError(f"clip shorter than one window ({len(clip)} < {win} samples)")
    frames = frame_signal(clip.samples, win, hop) * hann(win)
    return np.fft.rfft(frames, n=config.fft_size, axis=1)


def istft_overlap_add(spec: np.ndarray, config: FeatureConfig, length: Optional[int] = None) -> AudioClip:
    """Weighted overlap-add inverse with window-squared normalisation.

    This is the least-squares inverse of :func:`stft`, so ``istft(stft(x))``
    returns ``x`` wherever the summed squared window is non-zero.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != config.n_bins:
        raise DataError(f"inconsistent bin count: expected {config.n_bins}, got {spec.shape[-1]}")
    win, hop = config.win_length, config.hop_length
    n_frames = spec.shape[0]
    out_len = (n_frames - 1) * hop + win if n_frames else 0
    w = hann(win)
    frames = np.fft.irfft(spec, n=config.fft_size, axis=1)[:, :win] * w
    y = np.zeros(out_len)
    wsum = np.zeros(out_len)
    for m in range(n_frames):
        y[m * hop:m * hop + win] += frames[m]
        wsum[m * hop:m * hop + win] += w * w
    nz = wsum > 1e-10
    y[nz] /= wsum[nz]
    if length is not None:
        y = np.pad(y, (0, max(0, length - out_len)))[:length]
    return AudioClip(y, config.sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: FeatureConfig) -> np.ndarray:
    """HTK-style triangular filterbank, shape (n_mels, n_bins), peak 1."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(config.sample_rate / 2.0), config.n_mels + 2))
    bin_freqs = np.arange(config.n_bins) * config.sample_rate / config.fft_size
    lo, centre, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_freqs - lo) / (centre - lo)
    falling = (hi - bin_freqs) / (hi - centre)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(fb.sum(axis=1) == 0.0)
    if empty.size:
        raise ValueError(f"n_mels={config.n_mels} too large for fft_size={config.fft_size}: "
                         f"empty triangle at band {int(empty[0])}")
    return fb


def power_to_log_mel(power: np.ndarray, config: FeatureConfig) -> np.ndarray:
    return np.log(np.maximum(power @ mel_filterbank(config).T, LOG_FLOOR))


def compute_log_mel(clip: AudioClip, config: FeatureConfig = ASV_PRESET) -> MelSpectrogram:
    spec = stft(clip, config)
    return MelSpectrogram(power_to_log_mel(np.abs(spec) ** 2, config), config, clip.source_id)


def mel_to_linear_magnitude(mel: MelSpectrogram) -> np.ndarray:
    """Map log-Mel frames back to linear STFT magnitudes (pseudo-inverse, clipped at zero)."""
    fb = mel_filterbank(mel.config)
    mel_power = np.exp(mel.frames)
    mel_power[mel.frames <= np.log(LOG_FLOOR) + 1e-9] = 0.0
    power = np.maximum(mel_power @ np.linalg.pinv(fb).T, 0.0)
    return np.sqrt(power)


def compute_psd(clip: AudioClip, segment_size: int = 512) -> PsdCurve:
    """Welch PSD with Hann windows and 50 % overlap (density scaling)."""
    if len(clip) < segment_size:
        raise DataError(f"clip shorter than one segment ({len(clip)} < {segment_size})")
    freqs, power = signal.welch(
        clip.samples, fs=clip.sample_rate, window="hann",
        nperseg=segment_size, noverlap=segment_size // 2, scaling="density",
    )
    return PsdCurve(freqs, power, segment_size)


def default_highpass(sample_rate: int, cutoff_hz: float = 20.0):
    """First-order Butterworth high-pass used for drift removal."""
    return signal.butter(1, cutoff_hz, btype="highpass", fs=sample_rate)


def zero_phase_filter(clip: AudioClip, filter_coeffs=None) -> AudioClip:
    """Forward-backward IIR filtering; ``filter_coeffs`` is ``(b, a)``."""
    b, a = filter_coeffs if filter_coeffs is not None else default_highpass(clip.sample_rate)
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if a[0] == 0:
        raise ValueError("a[0] must be non-zero")
    if len(a) > 1 and np.any(np.abs(np.roots(a)) >= 1.0):
        raise ValueError("unstable filter coefficients")
    if len(clip) == 0:
        return clip
    padlen = min(3 * max(len(a), len(b)), len(clip) - 1)
    y = signal.filtfilt(b, a, clip.samples, padlen=padlen)
    return clip.with_samples(y)


def _bin_weights(n_bins: int, fft_size: int) -> np.ndarray:
    # one-sided bins stand in for two full-spectrum bins except DC and Nyquist
    w = np.full(n_bins, 2.0)
    w[0] = 1.0
    if fft_size % 2 == 0:
        w[-1] = 1.0
    return w


def spectral_convergence(estimate: np.ndarray, target: np.ndarray, fft_size: int) -> float:
    """Relative Frobenius distance between magnitude grids, full-spectrum weighted."""
    w = _bin_weights(target.shape[1], fft_size)
    num = np.sum(w * (np.abs(estimate) - target) ** 2)
    den = np.sum(w * target ** 2)
    return float(np.sqrt(num / den)) if den > 0 else 0.0


def griffin_lim(magnitude: np.ndarray, config: FeatureConfig, iterations: int = 32,
                length: Optional[int] = None, return_errors: bool = False):
    """Estimate a waveform whose STFT magnitude approximates ``magnitude``.

    Phases start at zero. Each iteration takes the least-squares inverse of
    the magnitude-constrained spectrogram and re-analyses it, so the
    spectral convergence error never increases.
    """
    magnitude = np.asarray(magnitude, dtype=np.float64)
    if np.any(magnitude < 0):
        raise ValueError("negative magnitudes")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n_frames = magnitude.shape[0]
    natural_len = (n_frames - 1) * config.hop_length + config.win_length
    phase = np.ones_like(magnitude, dtype=np.complex128)
    errors = []
    clip = None
    for _ in range(iterations):
        clip = istft_overlap_add(magnitude * phase, config)
        rebuilt = stft(clip, config)
        errors.append(spectral_convergence(rebuilt, magnitude, config.fft_size))
        phase = np.exp(1j * np.angle(rebuilt))
    samples = clip.samples
    if length is not None:
        samples = np.pad(samples, (0, max(0, length - natural_len)))[:length]
    out = AudioClip(samples, config.sample_rate)
    return (out, errors) if return_errors else out


def rms(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0
