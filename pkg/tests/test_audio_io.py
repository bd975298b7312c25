import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathanon.audio_io import AudioClip, read_wav, to_pcm16, write_wav
from pathanon.errors import AudioFormatError, DataError


def _riff(fmt_body: bytes, data: bytes, declared_data: int | None = None) -> bytes:
    size = len(data) if declared_data is None else declared_data
    chunks = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    chunks += b"data" + struct.pack("<I", size) + data
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def _fmt(channels=1, rate=16000, bits=16, tag=1):
    block = channels * bits // 8
    return struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)


def test_one_second_file(tmp_path):
    p = tmp_path / "a.wav"
    p.write_bytes(_riff(_fmt(), np.zeros(16000, dtype="<i2").tobytes()))
    clip = read_wav(p)
    assert len(clip) == 16000 and clip.sample_rate == 16000
    assert clip.source_id == "a"


def test_truncated_data_chunk(tmp_path):
    p = tmp_path / "t.wav"
    p.write_bytes(_riff(_fmt(), np.zeros(100, dtype="<i2").tobytes(), declared_data=400))
    with pytest.raises(AudioFormatError, match="truncated data chunk"):
        read_wav(p)


def test_stereo_opposite_channels_average_to_silence(tmp_path):
    x = (np.sin(np.arange(800) / 5.0) * 20000).astype("<i2")
    inter = np.stack([x, -x], axis=1).reshape(-1).astype("<i2")
    p = tmp_path / "s.wav"
    p.write_bytes(_riff(_fmt(channels=2), inter.tobytes()))
    clip = read_wav(p)
    assert len(clip) == 800
    assert np.all(clip.samples == 0.0)


@pytest.mark.parametrize("fmt,msg", [
    (_fmt(bits=8), "unsupported bit depth"),
    (_fmt(tag=3, bits=32), "non-PCM"),
])
def test_rejects_other_formats(tmp_path, fmt, msg):
    p = tmp_path / "x.wav"
    p.write_bytes(_riff(fmt, b"\x00" * 64))
    with pytest.raises(AudioFormatError, match=msg):
        read_wav(p)


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError):
        read_wav(tmp_path / "nope.wav")
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "nope.wav")


def test_garbage_bytes(tmp_path):
    p = tmp_path / "g.wav"
    p.write_bytes(b"hello world, not audio")
    with pytest.raises(AudioFormatError):
        read_wav(p)


def test_write_clamps(tmp_path):
    p = tmp_path / "c.wav"
    write_wav(AudioClip(np.array([1.5, -1.5, 0.0]), 16000), p)
    with wave.open(str(p)) as fh:
        frames = np.frombuffer(fh.readframes(3), dtype="<i2")
    assert frames.tolist() == [32767, -32768, 0]


def test_write_empty_clip(tmp_path):
    with pytest.raises(DataError, match="empty clip"):
        write_wav(AudioClip(np.zeros(0), 16000), tmp_path / "e.wav")


def test_write_to_missing_directory(tmp_path):
    with pytest.raises(DataError):
        write_wav(AudioClip(np.zeros(4), 16000), tmp_path / "no" / "such" / "dir.wav")


def test_clip_rejects_nan():
    with pytest.raises(ValueError):
        AudioClip(np.array([0.0, np.nan]), 16000)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=300))
def test_roundtrip_within_quantization(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("rt") / "r.wav"
    clip = AudioClip(np.array(values), 8000)
    write_wav(clip, p)
    back = read_wav(p)
    assert back.sample_rate == 8000
    assert np.max(np.abs(back.samples - clip.samples)) <= 1.0 / 32768 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=200))
def test_reader_never_returns_non_finite(tmp_path_factory, payload):
    p = tmp_path_factory.mktemp("fz") / "f.wav"
    p.write_bytes(_riff(_fmt(), payload))
    try:
        clip = read_wav(p)
    except AudioFormatError:
        return
    assert np.all(np.isfinite(clip.samples))
    assert np.all(np.abs(clip.samples) <= 1.0)


def test_to_pcm16_rounding():
    assert to_pcm16(np.array([0.5 / 32768, -1.0])).tolist() == [0, -32768]
