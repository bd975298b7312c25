"""Seeded synthetic speech corpus.

Each synthetic speaker owns a vocal tract (speaker-scaled formant
resonators), a glottal source (F0 range, spectral tilt, jitter) and a
breathiness level; utterances are short runs of vowels separated by pauses.
Speakers labelled as patients get more jitter, shimmer and aspiration
noise, which gives the reference classifier something to detect.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

from ..anonymize.seeding import rng_for, speaker_seed
from ..audio_io import AudioClip, write_wav
from ..errors import DataError
from .manifest import DatasetManifest, SpeakerRecord, UtteranceRecord, write_manifest

SAMPLE_RATE = 16000

# F1-F4 (Hz) of an adult male reference tract
VOWELS = {
    "a": (730, 1090, 2440, 3400),
    "e": (530, 1840, 2480, 3500),
    "i": (270, 2290, 3010, 3700),
    "o": (570, 840, 2410, 3300),
    "u": (300, 870, 2240, 3300),
}
BANDWIDTHS = (80.0, 100.0, 140.0, 200.0)


@dataclass(frozen=True)
class SyntheticVoice:
    speaker: SpeakerRecord
    f0: float
    tract_scale: float
    formant_jitter: Tuple[float, ...]  # per-formant multiplicative offsets
    tilt: float
    jitter: float
    shimmer: float
    breathiness: float
    level: float


def make_voice(record: SpeakerRecord, seed: int) -> SyntheticVoice:
    rng = rng_for(speaker_seed(seed, record.speaker_id, "voice"))
    child = record.age_group == "child"
    if child:
        f0, scale = rng.uniform(230, 320), rng.uniform(1.2, 1.35)
    elif record.gender == "F":
        f0, scale = rng.uniform(160, 270), rng.uniform(1.08, 1.22)
    else:
        f0, scale = rng.uniform(85, 160), rng.uniform(0.88, 1.02)
    patient = not record.is_control
    return SyntheticVoice(
        speaker=record,
        f0=float(f0),
        tract_scale=float(scale),
        formant_jitter=tuple(float(v) for v in rng.uniform(0.85, 1.15, size=4)),
        tilt=float(rng.uniform(0.5, 0.97)),
        jitter=float(rng.uniform(0.01, 0.03) if patient else rng.uniform(0.003, 0.015)),
        shimmer=float(rng.uniform(0.06, 0.2) if patient else rng.uniform(0.02, 0.08)),
        breathiness=float(rng.uniform(0.06, 0.2) if patient else rng.uniform(0.02, 0.1)),
        level=float(rng.uniform(0.4, 0.8)),
    )


def _resonator(freq: float, bw: float, sr: int):
    r = np.exp(-np.pi * bw / sr)
    theta = 2.0 * np.pi * freq / sr
    a = np.array([1.0, -2.0 * r * np.cos(theta), r * r])
    return np.array([a.sum()]), a  # unit gain at DC


def _source(voice: SyntheticVoice, n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    src = np.zeros(n)
    contour = voice.f0 * (1.0 + 0.06 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * np.arange(n) / sr
                                              + rng.uniform(0, 2 * np.pi)))
    t = rng.uniform(0, sr / voice.f0)
    while t < n:
        i = int(t)
        src[i] += 1.0 + voice.shimmer * rng.standard_normal()
        period = sr / contour[i] * (1.0 + voice.jitter * rng.standard_normal())
        t += max(period, 0.5 * sr / contour[i])
    src = lfilter([1.0 - voice.tilt], [1.0, -voice.tilt], src)
    noise = rng.standard_normal(n) * np.std(src) * voice.breathiness * 3.0
    return src + noise


def synthesize_vowel(voice: SyntheticVoice, vowel: str, duration: float, rng: np.random.Generator,
                     sr: int = SAMPLE_RATE) -> np.ndarray:
    n = int(duration * sr)
    y = _source(voice, n, sr, rng)
    for k, (f, bw) in enumerate(zip(VOWELS[vowel], BANDWIDTHS)):
        freq = min(f * voice.tract_scale * voice.formant_jitter[k] * rng.uniform(0.97, 1.03), 0.45 * sr)
        b, a = _resonator(freq, bw * voice.tract_scale, sr)
        y = lfilter(b, a, y)
    fade = min(int(0.02 * sr), n // 2)
    env = np.ones(n)
    env[:fade] = np.linspace(0, 1, fade)
    env[n - fade:] = np.linspace(1, 0, fade)
    return y * env


def synthesize_utterance(voice: SyntheticVoice, rng: np.random.Generator,
                         sr: int = SAMPLE_RATE) -> np.ndarray:
    """Every vowel once, in random order, with short pauses between."""
    parts = [np.zeros(int(rng.uniform(0.05, 0.1) * sr))]
    for vowel in rng.permutation(sorted(VOWELS)):
        parts.append(synthesize_vowel(voice, str(vowel), rng.uniform(0.2, 0.35), rng, sr))
        parts.append(np.zeros(int(rng.uniform(0.05, 0.12) * sr)))
    y = np.concatenate(parts)
    y += 1e-5 * rng.standard_normal(len(y))  # recording noise floor
    return y / np.max(np.abs(y)) * voice.level * rng.uniform(0.9, 1.1)


def default_speakers(n_speakers: int, labels: Sequence[str] = ("control", "dysphonia"),
                     child_fraction: float = 0.0) -> List[SpeakerRecord]:
    n_child = int(round(child_fraction * n_speakers))
    out = []
    for i in range(n_speakers):
        out.append(SpeakerRecord(
            speaker_id=f"spk{i:03d}",
            gender="F" if i % 2 == 0 else "M",
            age_group="child" if i >= n_speakers - n_child else "adult",
            label=labels[(i // 2) % len(labels)],
        ))
    return out


def generate_corpus(n_speakers: int, utterances_per_speaker: int, seed: int,
                    speakers: Sequence[SpeakerRecord] | None = None,
                    ) -> Tuple[DatasetManifest, Dict[str, AudioClip]]:
    """Build the corpus in memory: manifest plus clips keyed by utterance id."""
    if n_speakers < 2:
        raise DataError("need at least 2 speakers")
    if utterances_per_speaker < 2:
        raise DataError("need at least 2 utterances per speaker")
    speakers = list(speakers) if speakers is not None else default_speakers(n_speakers)
    clips: Dict[str, AudioClip] = {}
    utterances = []
    for record in speakers:
        voice = make_voice(record, seed)
        for j in range(utterances_per_speaker):
            utt_id = f"{record.speaker_id}_u{j:02d}"
            rng = rng_for(speaker_seed(seed, utt_id, "utterance"))
            clips[utt_id] = AudioClip(synthesize_utterance(voice, rng), SAMPLE_RATE, utt_id)
            utterances.append(UtteranceRecord(utt_id, record.speaker_id, Path("wav") / f"{utt_id}.wav"))
    return DatasetManifest(tuple(speakers), tuple(utterances)), clips


def write_corpus(root, n_speakers: int, utterances_per_speaker: int, seed: int) -> DatasetManifest:
    root = Path(root)
    manifest, clips = generate_corpus(n_speakers, utterances_per_speaker, seed)
    (root / "wav").mkdir(parents=True, exist_ok=True)
    utterances = []
    for u in manifest.utterances:
        path = root / u.path
        write_wav(clips[u.utterance_id], path)
        utterances.append(UtteranceRecord(u.utterance_id, u.speaker_id, path))
    manifest = DatasetManifest(manifest.speakers, tuple(utterances))
    write_manifest(manifest, root)
    return manifest
