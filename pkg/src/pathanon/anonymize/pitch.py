"""Randomised pitch shifting with log-Mel / Griffin-Lim resynthesis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import resample

from ..audio_io import AudioClip
from ..dsp import (
    CLASSIFIER_PRESET,
    FeatureConfig,
    compute_log_mel,
    griffin_lim,
    istft_overlap_add,
    mel_to_linear_magnitude,
    stft,
)
from ..errors import DataError
from .seeding import rng_for

# 64 ms / 16 ms analysis keeps harmonics of low voices resolved
VOCODER_WINDOW_MS = 64.0
VOCODER_HOP_MS = 16.0


@dataclass(frozen=True)
class PitchShiftConfig:
    semitone_min: float = 2.0
    semitone_max: float = 5.0
    vocoder_iterations: int = 32

    def __post_init__(self):
        if not 0.0 < self.semitone_min <= self.semitone_max <= 12.0:
            raise ValueError(f"invalid range: semitones [{self.semitone_min}, {self.semitone_max}]")
        if self.vocoder_iterations < 1:
            raise ValueError("vocoder_iterations must be >= 1")


def _vocoder_config(sample_rate: int) -> FeatureConfig:
    win = int(round(VOCODER_WINDOW_MS * sample_rate / 1000.0))
    return FeatureConfig(n_mels=1, window_ms=VOCODER_WINDOW_MS, hop_ms=VOCODER_HOP_MS,
                         fft_size=1 << int(np.ceil(np.log2(win))), sample_rate=sample_rate)


def time_stretch(x: np.ndarray, rate: float, config: FeatureConfig) -> np.ndarray:
    """Phase-vocoder time-scale modification; ``rate > 1`` shortens the signal."""
    win, hop, n_fft = config.win_length, config.hop_length, config.fft_size
    pad = win // 2
    padded = np.pad(x, (pad, pad + win))
    spec = stft(AudioClip(padded, config.sample_rate), config)
    spec = np.vstack([spec, np.zeros((1, spec.shape[1]))])

    steps = np.arange(0.0, spec.shape[0] - 1, rate)
    omega = 2.0 * np.pi * hop * np.arange(spec.shape[1]) / n_fft
    phase = np.angle(spec[0])
    out = np.empty((len(steps), spec.shape[1]), dtype=np.complex128)
    for i, t in enumerate(steps):
        left = int(t)
        frac = t - left
        a, b = spec[left], spec[left + 1]
        out[i] = ((1.0 - frac) * np.abs(a) + frac * np.abs(b)) * np.exp(1j * phase)
        dphi = np.angle(b) - np.angle(a) - omega
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase = phase + omega + dphi

    y = istft_overlap_add(out, config).samples
    target = int(round(len(x) / rate))
    y = np.pad(y, (0, max(0, pad + target - len(y))))
    return y[pad:pad + target]


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Shift pitch by ``semitones`` while keeping the duration."""
    if abs(semitones) > 12.0:
        raise ValueError("|semitones| must be <= 12")
    factor = 2.0 ** (semitones / 12.0)
    config = _vocoder_config(clip.sample_rate)
    if len(clip) < config.win_length:
        raise DataError("clip shorter than one vocoder frame")
    stretched = time_stretch(clip.samples, 1.0 / factor, config)
    return clip.with_samples(resample(stretched, len(clip)))


def draw_semitones(speaker_seed: int, config: PitchShiftConfig = PitchShiftConfig()) -> float:
    """Signed shift: magnitude uniform in the configured bounds, random sign."""
    rng = rng_for(speaker_seed)
    magnitude = config.semitone_min + (config.semitone_max - config.semitone_min) * rng.random()
    return float(magnitude if rng.random() < 0.5 else -magnitude)


def resynthesize(clip: AudioClip, iterations: int = 32) -> AudioClip:
    """Log-Mel analysis (classifier preset) followed by Griffin-Lim."""
    config = CLASSIFIER_PRESET.for_rate(clip.sample_rate)
    mel = compute_log_mel(clip, config)
    out = griffin_lim(mel_to_linear_magnitude(mel), config, iterations, length=len(clip))
    return clip.with_samples(out.samples)


def anonymize_pitch(clip: AudioClip, speaker_seed: int, config: PitchShiftConfig = PitchShiftConfig()) -> AudioClip:
    return shift_and_resynthesize(clip, draw_semitones(speaker_seed, config), config.vocoder_iterations)


def shift_and_resynthesize(clip: AudioClip, semitones: float, iterations: int = 32) -> AudioClip:
    """Pitch shift, vocoder resynthesis, then rescale to the input peak."""
    out = resynthesize(pitch_shift(clip, semitones), iterations).samples
    peak_in, peak_out = np.max(np.abs(clip.samples)), np.max(np.abs(out))
    if peak_out > 0:
        out = out * (peak_in / peak_out)
    return clip.with_samples(out)
