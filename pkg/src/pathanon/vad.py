"""Energy gating and voice-activity trimming.

Levels are measured in dB above a per-utterance noise floor: the 5th
percentile RMS of non-overlapping analysis windows (floored at 1e-6).
When the clip spans less than ``level_threshold_db`` of dynamic range no
floor is observable and the absolute 1e-6 reference is used instead, so
fully voiced clips pass through untouched.

Activity decisions are taken on a 1 ms grid: every grid point carries the
decision of the analysis window centred on it, each sample takes the
majority vote of the windows covering it, run edges are tightened to the
outermost 1 ms block that is itself above threshold, the decisions are
smoothed with a moving average, and short inactive runs between active
ones are bridged.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .audio_io import AudioClip
from .errors import DataError

FLOOR_MIN = 1e-6
GRID_MS = 1.0


class NoSpeechError(DataError):
    pass


@dataclass(frozen=True)
class VadConfig:
    level_threshold_db: float = 30.0
    window_ms: float = 30.0
    max_silence_ms: float = 6.0
    smoothing_ms: float = 8.0

    def __post_init__(self):
        if min(self.window_ms, self.max_silence_ms, self.smoothing_ms) <= 0:
            raise ValueError("durations must be positive")
        if self.level_threshold_db < 0:
            raise ValueError("threshold must be non-negative")


Segment = Tuple[int, int]


def _samples(ms: float, sr: int) -> int:
    return max(1, int(round(ms * sr / 1000.0)))


def _block_rms(x: np.ndarray, size: int) -> np.ndarray:
    n_blocks = -(-len(x) // size)
    padded = np.zeros(n_blocks * size)
    padded[:len(x)] = x
    energy = (padded.reshape(n_blocks, size) ** 2).sum(axis=1)
    counts = np.full(n_blocks, size, dtype=np.float64)
    counts[-1] = len(x) - (n_blocks - 1) * size
    return np.sqrt(energy / counts)


def noise_floor(clip: AudioClip, config: VadConfig = VadConfig()) -> float:
    levels = _block_rms(clip.samples, _samples(config.window_ms, clip.sample_rate))
    floor = max(float(np.percentile(levels, 5)), FLOOR_MIN)
    if floor >= levels.max() * 10.0 ** (-config.level_threshold_db / 20.0):
        return FLOOR_MIN
    return floor


def _above(levels: np.ndarray, floor: float, threshold_db: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(levels / floor)
    return db >= threshold_db


def _gate_mask(clip: AudioClip, config: VadConfig, floor: float) -> np.ndarray:
    win = _samples(config.window_ms, clip.sample_rate)
    keep = _above(_block_rms(clip.samples, win), floor, config.level_threshold_db)
    return np.repeat(keep, win)[:len(clip)]


def _gate(clip: AudioClip, config: VadConfig, floor: float) -> AudioClip:
    return clip.with_samples(clip.samples[_gate_mask(clip, config, floor)])


def gate_low_level(clip: AudioClip, config: VadConfig = VadConfig()) -> AudioClip:
    """Drop analysis windows quieter than the threshold above the noise floor."""
    if len(clip) == 0:
        raise DataError("empty clip")
    return _gate(clip, config, noise_floor(clip, config))


def _runs(active: np.ndarray) -> List[Segment]:
    edges = np.diff(np.concatenate(([0], active.astype(np.int8), [0])))
    return list(zip(np.flatnonzero(edges == 1).tolist(), np.flatnonzero(edges == -1).tolist()))


def _detect(clip: AudioClip, config: VadConfig, floor: float) -> List[Segment]:
    sr, x = clip.sample_rate, clip.samples
    n = len(x)
    hop = _samples(GRID_MS, sr)
    half = _samples(config.window_ms, sr) // 2
    n_grid = -(-n // hop)

    csum = np.concatenate(([0.0], np.cumsum(x * x)))
    centres = np.minimum(np.arange(n_grid) * hop + hop // 2, n - 1)
    lo = np.maximum(centres - half, 0)
    hi = np.minimum(centres + half, n)
    levels = np.sqrt((csum[hi] - csum[lo]) / (hi - lo))
    window_active = _above(levels, floor, config.level_threshold_db).astype(np.float64)

    # majority vote of the windows covering each grid point
    span = 2 * (half // hop) + 1
    votes = np.convolve(window_active, np.ones(span), mode="same")
    cover = np.convolve(np.ones(n_grid), np.ones(span), mode="same")
    active = votes / cover > 0.5

    # a window straddling an edge reads as active; pull each run's edges in
    # to the outermost 1 ms block that is itself above threshold
    fine = _above(_block_rms(x, hop), floor, config.level_threshold_db)
    for start, end in _runs(active):
        hits = np.flatnonzero(fine[start:end])
        if hits.size:
            active[start:start + hits[0]] = False
            active[start + hits[-1] + 1:end] = False

    width = max(1, int(round(config.smoothing_ms / GRID_MS)))
    smooth = np.convolve(active.astype(np.float64), np.ones(width) / width, mode="same")
    active = smooth >= 0.5

    max_gap = int(round(config.max_silence_ms / GRID_MS))
    segments = _runs(active)
    merged: List[Segment] = []
    for start, end in segments:
        if merged and start - merged[-1][1] <= max_gap:
            merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return [(s * hop, min(e * hop, n)) for s, e in merged]


def detect_voice_segments(clip: AudioClip, config: VadConfig = VadConfig()) -> List[Segment]:
    """Sorted, disjoint ``(start, end)`` sample ranges of detected speech."""
    if len(clip) == 0:
        raise DataError("empty clip")
    return _detect(clip, config, noise_floor(clip, config))


def apply_vad(clip: AudioClip, config: VadConfig = VadConfig()) -> AudioClip:
    """Level gating followed by segment trimming, sharing one noise floor.

    Both decisions are made on the input timeline and a sample survives only
    if both keep it; running detection on the already gated signal would see
    artificial edges where removed windows used to be.
    """
    if len(clip) == 0:
        raise DataError("empty clip")
    floor = noise_floor(clip, config)
    keep = _gate_mask(clip, config, floor)
    for start, end in _invert(_detect(clip, config, floor), len(clip)):
        keep[start:end] = False
    if not keep.any():
        raise NoSpeechError("no speech detected")
    return clip.with_samples(clip.samples[keep])


def _invert(segments: List[Segment], n: int) -> List[Segment]:
    bounds = [0] + [b for seg in segments for b in seg] + [n]
    return [(a, b) for a, b in zip(bounds[::2], bounds[1::2]) if a < b]


def segments_to_csv(rows: Iterable[Tuple[Optional[str], Segment]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source_id", "start_sample", "end_sample"])
    for source_id, (start, end) in rows:
        writer.writerow([source_id or "", start, end])
    return buf.getvalue()
