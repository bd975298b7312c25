"""Reference speaker embeddings, external embedding ingestion, cosine scoring."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .dsp import MelSpectrogram
from .errors import DataError


@dataclass(frozen=True)
class SpeakerEmbedding:
    vector: np.ndarray
    speaker_id: str
    utterance_id: Optional[str] = None

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise DataError("embedding must be a finite 1-D vector")
        norm = np.linalg.norm(v)
        if norm == 0:
            raise DataError("degenerate embedding")
        object.__setattr__(self, "vector", v / norm)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def pooled_statistics(frames: np.ndarray) -> np.ndarray:
    """Per-band mean and standard deviation over time, concatenated."""
    return np.concatenate([frames.mean(axis=0), frames.std(axis=0)])


def embed_utterance(mel: MelSpectrogram, speaker_id: str = "", utterance_id: Optional[str] = None) -> SpeakerEmbedding:
    if mel.n_frames < 2:
        raise DataError("need at least 2 frames to embed an utterance")
    return SpeakerEmbedding(pooled_statistics(mel.frames), speaker_id,
                            utterance_id if utterance_id is not None else mel.source_id)


def cosine_score(a: SpeakerEmbedding, b: SpeakerEmbedding) -> float:
    if a.dim != b.dim:
        raise DataError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.clip(a.vector @ b.vector, -1.0, 1.0))


def enroll_speaker(embeddings: Sequence[SpeakerEmbedding]) -> SpeakerEmbedding:
    """Normalised centroid of one speaker's embeddings."""
    if not embeddings:
        raise DataError("cannot enroll from an empty collection")
    speakers = {e.speaker_id for e in embeddings}
    if len(speakers) != 1:
        raise DataError(f"mixed speakers in enrollment: {sorted(speakers)}")
    if len({e.dim for e in embeddings}) != 1:
        raise DataError("inconsistent dimension")
    # sort so the floating-point sum does not depend on input order
    vectors = sorted((tuple(e.vector) for e in embeddings))
    return SpeakerEmbedding(np.mean(np.array(vectors), axis=0), embeddings[0].speaker_id)


def load_embeddings(path) -> List[SpeakerEmbedding]:
    """Parse ``utterance_id,speaker_id,v1..vD`` rows."""
    out: List[SpeakerEmbedding] = []
    seen = set()
    dim = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["utterance_id", "speaker_id"]:
            raise DataError("embedding CSV must start with utterance_id,speaker_id")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            utt, spk, *values = row
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                raise DataError(f"inconsistent dimension at line {lineno}")
            try:
                vec = np.array([float(v) for v in values])
            except ValueError:
                raise DataError(f"non-numeric entry at line {lineno}") from None
            if utt in seen:
                raise DataError(f"duplicate utterance_id {utt!r}")
            seen.add(utt)
            out.append(SpeakerEmbedding(vec, spk, utt))
    return out


def write_embeddings(embeddings: Iterable[SpeakerEmbedding], path) -> None:
    embeddings = list(embeddings)
    dim = embeddings[0].dim if embeddings else 0
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["utterance_id", "speaker_id"] + [f"v{i + 1}" for i in range(dim)])
        for e in embeddings:
            writer.writerow([e.utterance_id or "", e.speaker_id] + [f"{v:.12g}" for v in e.vector])
