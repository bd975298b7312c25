"""Anonymizer settings and cached per-utterance feature extraction."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .. import __version__
from ..anonymize import (
    McAdamsConfig,
    PitchShiftConfig,
    anonymize_mcadams,
    draw_semitones,
    sample_alpha,
    speaker_seed,
)
from ..anonymize.pitch import shift_and_resynthesize
from ..audio_io import AudioClip, read_wav
from ..dsp import ASV_PRESET, CLASSIFIER_PRESET, compute_log_mel, zero_phase_filter
from ..embedding import embed_utterance, pooled_statistics
from ..vad import NoSpeechError, VadConfig, apply_vad
from .manifest import DatasetManifest, UtteranceRecord

METHODS = ("identity", "mcadams", "pitch")


@dataclass(frozen=True)
class AnonymizerSpec:
    """What to do to an utterance; randomness is keyed by (seed, speaker, role)."""

    method: str = "mcadams"
    alpha: Optional[float] = None  # fixed McAdams coefficient; None draws one per speaker
    mcadams: McAdamsConfig = field(default_factory=McAdamsConfig)
    pitch: PitchShiftConfig = field(default_factory=PitchShiftConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown anonymization method {self.method!r}")
        if self.alpha is not None and not 0.0 < self.alpha <= 1.2:
            raise ValueError(f"alpha must lie in (0, 1.2], got {self.alpha}")

    @classmethod
    def identity(cls) -> "AnonymizerSpec":
        return cls("identity")

    @property
    def key(self) -> str:
        if self.method == "identity":
            return "identity"
        if self.method == "mcadams":
            if self.alpha is not None:
                return f"mcadams:{self.alpha!r}"
            return f"mcadams:[{self.mcadams.alpha_min!r},{self.mcadams.alpha_max!r}]"
        return f"pitch:[{self.pitch.semitone_min!r},{self.pitch.semitone_max!r}]x{self.pitch.vocoder_iterations}"

    def parameters(self, seed: int, speaker_id: str, role: str = "test") -> dict:
        if self.method == "identity":
            return {}
        s = speaker_seed(seed, speaker_id, role)
        if self.method == "mcadams":
            return {"alpha": self.alpha if self.alpha is not None else sample_alpha(s, self.mcadams)}
        return {"semitones": draw_semitones(s, self.pitch)}

    def apply(self, clip: AudioClip, seed: int, speaker_id: str, role: str = "test") -> Tuple[AudioClip, dict]:
        params = self.parameters(seed, speaker_id, role)
        if self.method == "identity":
            return clip, params
        if self.method == "mcadams":
            return anonymize_mcadams(clip, self.mcadams, params["alpha"]), params
        return shift_and_resynthesize(clip, params["semitones"], self.pitch.vocoder_iterations), params

    def describe(self) -> dict:
        d = {"method": self.method, "key": self.key}
        if self.method == "mcadams":
            d.update(alpha=self.alpha, **{f"mcadams_{k}": v for k, v in asdict(self.mcadams).items() if k != "alpha"})
        elif self.method == "pitch":
            d.update(**{f"pitch_{k}": v for k, v in asdict(self.pitch).items()})
            d["variant"] = "pitch-shift + log-mel + griffin-lim (no noise/denoise stages)"
        return d

    def provenance(self, source_id: str, seed: int, params: dict) -> dict:
        return {
            "source_id": source_id,
            "method": self.method,
            "parameters": params,
            "seed": seed,
            "toolkit_version": __version__,
            "anonymizer": self.describe(),
        }


@dataclass(frozen=True)
class UtteranceFeatures:
    embedding: np.ndarray  # L2-normalised ASV reference embedding
    pooled: np.ndarray     # classifier input: pooled log-Mel statistics
    params: dict


def extract_features(clip: AudioClip, vad: VadConfig = VadConfig()) -> Tuple[np.ndarray, np.ndarray]:
    """ASV embedding (after VAD) and pooled classifier statistics.

    Strong warping can leave the speech barely above its own noise floor;
    if VAD then keeps less than two ASV frames the whole clip is embedded.
    """
    cfg = ASV_PRESET.for_rate(clip.sample_rate)
    try:
        speech = apply_vad(clip, vad)
    except NoSpeechError:
        speech = clip
    if len(speech) < cfg.win_length + cfg.hop_length:
        speech = clip
    emb = embed_utterance(compute_log_mel(speech, cfg)).vector
    filtered = zero_phase_filter(clip)
    pooled = pooled_statistics(compute_log_mel(filtered, CLASSIFIER_PRESET.for_rate(clip.sample_rate)).frames)
    return emb, pooled


def _work(item) -> Tuple[str, UtteranceFeatures]:
    utt_id, speaker_id, source, spec, seed, role = item
    clip = source if isinstance(source, AudioClip) else read_wav(source)
    anon, params = spec.apply(clip, seed, speaker_id, role)
    emb, pooled = extract_features(anon)
    return utt_id, UtteranceFeatures(emb, pooled, params)


class FeatureStore:
    """Memoised features per (utterance, anonymizer, role).

    Work fans out over ``jobs`` processes; every item is computed from its
    own keyed seed, so results do not depend on ``jobs``.
    """

    def __init__(self, manifest: DatasetManifest, seed: int,
                 audio: Optional[Mapping[str, AudioClip]] = None, jobs: int = 1):
        self.manifest = manifest
        self.seed = seed
        self.audio = audio or {}
        self.jobs = max(1, int(jobs))
        self._cache: Dict[Tuple[str, str, str], UtteranceFeatures] = {}

    @staticmethod
    def _role(spec: AnonymizerSpec, role: str) -> str:
        return "-" if spec.method == "identity" else role

    def get(self, utterances: Iterable[UtteranceRecord], spec: AnonymizerSpec,
            role: str = "test") -> Dict[str, UtteranceFeatures]:
        role = self._role(spec, role)
        utterances = list(utterances)
        todo = [u for u in utterances if (u.utterance_id, spec.key, role) not in self._cache]
        items = [(u.utterance_id, u.speaker_id, self.audio.get(u.utterance_id, u.path), spec, self.seed, role)
                 for u in todo]
        if self.jobs > 1 and len(items) > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                results = list(pool.map(_work, items, chunksize=max(1, len(items) // (4 * self.jobs))))
        else:
            results = [_work(item) for item in items]
        for utt_id, feats in results:
            self._cache[(utt_id, spec.key, role)] = feats
        return {u.utterance_id: self._cache[(u.utterance_id, spec.key, role)] for u in utterances}
