import numpy as np
import pytest

from pathanon.audio_io import AudioClip

SR = 16000


def tone(freq, seconds=1.0, amp=0.5, sr=SR, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioClip(amp * np.sin(2 * np.pi * freq * t + phase), sr, f"tone{freq}")


def vowel_like(seed=0, seconds=0.5, f0=120.0, formants=((700, 90), (1200, 110)), sr=SR):
    """Pulse train through two resonators plus a little noise."""
    from scipy.signal import lfilter

    rng = np.random.default_rng(seed)
    n = int(seconds * sr)
    x = np.zeros(n)
    x[::int(sr / f0)] = 1.0
    x += 0.01 * rng.standard_normal(n)
    for f, bw in formants:
        r = np.exp(-np.pi * bw / sr)
        x = lfilter([1.0], [1.0, -2 * r * np.cos(2 * np.pi * f / sr), r * r], x)
    return AudioClip(0.5 * x / np.max(np.abs(x)), sr, f"vowel{seed}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corpus20():
    """The 20-speaker, 8-utterance seeded fixture with one shared feature cache."""
    from pathanon.experiment import FeatureStore, generate_corpus

    manifest, clips = generate_corpus(20, 8, seed=42)
    return manifest, clips, FeatureStore(manifest, 42, audio=clips)


@pytest.fixture(scope="session")
def small_corpus():
    from pathanon.experiment import generate_corpus

    return generate_corpus(6, 4, seed=5)
