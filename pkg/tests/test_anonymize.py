import math

import numpy as np
import pytest
from scipy.signal import lfilter

from pathanon.anonymize import (
    McAdamsConfig,
    PitchShiftConfig,
    anonymize_mcadams,
    anonymize_pitch,
    draw_semitones,
    pitch_shift,
    sample_alpha,
    speaker_seed,
)
from pathanon.anonymize.pitch import shift_and_resynthesize
from pathanon.audio_io import AudioClip
from pathanon.dsp import compute_log_mel, compute_psd
from pathanon.errors import DataError

from conftest import SR, tone, vowel_like


def _interior_corr(a, b, margin=400):
    return float(np.corrcoef(a[margin:-margin], b[margin:-margin])[0, 1])


def _two_formant_noise(seed=0):
    x = np.random.default_rng(seed).standard_normal(SR)
    for f, bw in ((700, 60), (2200, 120)):
        r = math.exp(-math.pi * bw / SR)
        x = lfilter([1.0], [1.0, -2 * r * math.cos(2 * math.pi * f / SR), r * r], x)
    return AudioClip(0.5 * x / np.abs(x).max(), SR)


class TestMcAdams:
    def test_config_range(self):
        with pytest.raises(ValueError, match="invalid range"):
            McAdamsConfig(alpha_min=0.9, alpha_max=0.7)

    @pytest.mark.parametrize("seed", range(3))
    def test_alpha_one_reconstructs(self, seed):
        clip = vowel_like(seed)
        out = anonymize_mcadams(clip, alpha=1.0)
        assert len(out) == len(clip)
        assert _interior_corr(out.samples, clip.samples) >= 0.99

    def test_first_formant_follows_pole_warp(self):
        clip = _two_formant_noise()
        out = anonymize_mcadams(clip, alpha=0.8)
        psd = compute_psd(out, 2048)
        band = psd.freqs < 1500
        peak = psd.freqs[band][np.argmax(psd.power[band])]
        predicted = (2 * math.pi * 700 / SR) ** 0.8 * SR / (2 * math.pi)
        assert abs(peak - predicted) < 0.05 * predicted
        assert abs(peak - 700) > 150

    def test_silent_frame(self):
        out = anonymize_mcadams(AudioClip(np.zeros(320), SR), alpha=0.7)
        assert np.all(out.samples == 0)

    def test_too_short(self):
        with pytest.raises(DataError):
            anonymize_mcadams(AudioClip(np.zeros(100), SR))

    def test_deterministic_and_peak_normalised(self):
        clip = vowel_like(4)
        a = anonymize_mcadams(clip, alpha=0.7)
        b = anonymize_mcadams(clip, alpha=0.7)
        assert np.array_equal(a.samples, b.samples)
        assert np.max(np.abs(a.samples)) == pytest.approx(np.max(np.abs(clip.samples)))

    def test_distance_shrinks_towards_identity(self):
        for seed in range(3):
            clip = vowel_like(seed, formants=((600, 80), (1500, 100), (2600, 150)))
            ref = compute_log_mel(clip).frames
            dist = [float(np.mean((compute_log_mel(anonymize_mcadams(clip, alpha=a)).frames - ref) ** 2))
                    for a in (0.5, 0.7, 0.9, 1.0)]
            assert all(x >= y for x, y in zip(dist, dist[1:])), dist


class TestAlphaSampling:
    def test_reproducible(self):
        s = speaker_seed(42, "spk001")
        assert sample_alpha(s) == sample_alpha(s)

    def test_range_and_mean(self):
        draws = np.array([sample_alpha(speaker_seed(42, f"s{i}")) for i in range(10_000)])
        assert draws.min() >= 0.75 and draws.max() <= 0.90
        assert abs(draws.mean() - 0.825) < 0.005

    def test_keys_are_independent(self):
        assert speaker_seed(1, "a") != speaker_seed(2, "a")
        assert speaker_seed(1, "a", "enroll") != speaker_seed(1, "a", "test")


class TestPitch:
    def test_octave_up(self):
        out = pitch_shift(tone(220.0, 1.0), 12.0)
        assert abs(compute_psd(out, 4096).peak_frequency - 440.0) < 0.02 * 440.0

    def test_zero_shift(self):
        clip = tone(220.0, 1.0)
        assert np.corrcoef(pitch_shift(clip, 0.0).samples, clip.samples)[0, 1] >= 0.99

    def test_down_then_up(self):
        out = pitch_shift(pitch_shift(tone(220.0, 1.0), -12.0), 12.0)
        assert abs(compute_psd(out, 4096).peak_frequency - 220.0) < 0.02 * 220.0

    def test_length_kept(self):
        clip = tone(300.0, 0.77)
        assert len(pitch_shift(clip, 3.3)) == len(clip)

    def test_range_limit(self):
        with pytest.raises(ValueError):
            pitch_shift(tone(220.0, 0.5), 13.0)

    def test_config_range(self):
        with pytest.raises(ValueError, match="invalid range"):
            PitchShiftConfig(semitone_min=5.0, semitone_max=2.0)

    def test_draws_within_bounds(self):
        cfg = PitchShiftConfig()
        draws = [draw_semitones(speaker_seed(3, f"s{i}"), cfg) for i in range(500)]
        assert all(2.0 <= abs(d) <= 5.0 for d in draws)
        assert any(d < 0 for d in draws) and any(d > 0 for d in draws)

    def test_anonymize_pitch_deterministic(self):
        clip = vowel_like(2, seconds=0.4)
        s = speaker_seed(9, "spk")
        assert np.array_equal(anonymize_pitch(clip, s).samples, anonymize_pitch(clip, s).samples)

    @pytest.mark.parametrize("semitones", [3.0, -4.0])
    def test_pulse_train_fundamental_moves(self, semitones):
        x = np.zeros(SR)
        x[::80] = 1.0  # 200 Hz
        x = lfilter([1.0], [1.0, -0.95], x)
        x -= x.mean()
        out = shift_and_resynthesize(AudioClip(0.5 * x / np.abs(x).max(), SR), semitones)
        psd = compute_psd(out, 4096)
        band = (psd.freqs > 80) & (psd.freqs < 600)
        f0 = psd.freqs[band][np.argmax(psd.power[band])]
        moved = 12 * math.log2(f0 / 200.0)
        assert 2.0 <= abs(moved) <= 5.0
        assert math.copysign(1, moved) == math.copysign(1, semitones)
