"""PCM-16 WAV reading/writing and the in-memory clip type.

Only 16-bit integer PCM is accepted. Multichannel files are averaged to
mono on read; samples are scaled by 1/32768.
"""
from __future__ import annotations

import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import AudioFormatError, DataError

PCM_SCALE = 32768.0
_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class AudioFileNotFound(DataError, FileNotFoundError):
    pass


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source_id: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioClip":
        return AudioClip(samples, self.sample_rate, self.source_id)


def _parse_fmt(body: bytes) -> tuple[int, int, int]:
    if len(body) < 16:
        raise AudioFormatError("malformed fmt chunk")
    fmt_tag, channels, rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
    if fmt_tag == _WAVE_FORMAT_EXTENSIBLE and len(body) >= 26:
        # sub-format GUID starts at byte 24; its first two bytes carry the format tag
        fmt_tag = struct.unpack("<H", body[24:26])[0]
    if fmt_tag != _WAVE_FORMAT_PCM:
        raise AudioFormatError(f"non-PCM format tag 0x{fmt_tag:04x}")
    if bits != 16:
        raise AudioFormatError(f"unsupported bit depth {bits}")
    if channels < 1 or rate < 1:
        raise AudioFormatError("invalid channel count or sample rate")
    return channels, rate, bits


def read_wav(path) -> AudioClip:
    """Read a PCM-16 RIFF/WAVE file into a mono clip."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise AudioFileNotFound(f"missing file: {path}") from None
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError("not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos:pos + 4]
        size = struct.unpack("<I", raw[pos + 4:pos + 8])[0]
        body = raw[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body)
        elif chunk_id == b"data":
            if len(body) < size:
                raise AudioFormatError("truncated data chunk")
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None:
        raise AudioFormatError("missing fmt chunk")
    if data is None:
        raise AudioFormatError("missing data chunk")

    channels, rate, _ = fmt
    frame_bytes = 2 * channels
    if len(data) % frame_bytes:
        raise AudioFormatError("truncated data chunk")
    pcm = np.frombuffer(data, dtype="<i2").astype(np.float64)
    pcm = pcm.reshape(-1, channels).mean(axis=1) / PCM_SCALE
    return AudioClip(np.clip(pcm, -1.0, 1.0), rate, path.stem)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.round(clipped * PCM_SCALE), -32768, 32767).astype("<i2")


def write_wav(clip: AudioClip, path) -> None:
    """Write ``clip`` as mono little-endian PCM-16, clamping to [-1, 1]."""
    if len(clip) == 0:
        raise DataError("empty clip")
    path = Path(path)
    try:
        with open(path, "wb") as raw, wave.open(raw, "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(2)
            fh.setframerate(clip.sample_rate)
            fh.writeframes(to_pcm16(clip.samples).tobytes())
    except OSError as exc:
        raise DataError(f"unwritable path: {path} ({exc})") from exc
