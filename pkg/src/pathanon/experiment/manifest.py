"""Corpus manifests: one speakers.csv and one utterances.csv per corpus directory."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

from ..errors import DataError

GENDERS = ("F", "M")
AGE_GROUPS = ("adult", "child")
LABELS = ("control", "dysarthria", "dysglossia", "dysphonia", "clp", "other", "patient")

SPEAKER_COLUMNS = ["speaker_id", "gender", "age_group", "label"]
UTTERANCE_COLUMNS = ["utterance_id", "speaker_id", "path"]


@dataclass(frozen=True)
class SpeakerRecord:
    speaker_id: str
    gender: str
    age_group: str
    label: str

    @property
    def is_control(self) -> bool:
        return self.label == "control"


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    speaker_id: str
    path: Path


@dataclass(frozen=True)
class DatasetManifest:
    speakers: Tuple[SpeakerRecord, ...]
    utterances: Tuple[UtteranceRecord, ...]

    def __post_init__(self):
        ids = [s.speaker_id for s in self.speakers]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate speaker_id")
        utt_ids = [u.utterance_id for u in self.utterances]
        if len(set(utt_ids)) != len(utt_ids):
            raise DataError("duplicate utterance_id")
        known = set(ids)
        for u in self.utterances:
            if u.speaker_id not in known:
                raise DataError(f"dangling speaker reference {u.speaker_id!r} in utterance {u.utterance_id!r}")
        with_audio = {u.speaker_id for u in self.utterances}
        for s in self.speakers:
            if s.speaker_id not in with_audio:
                raise DataError(f"speaker {s.speaker_id!r} has no utterances")
            if s.gender not in GENDERS:
                raise DataError(f"unknown gender {s.gender!r}")
            if s.age_group not in AGE_GROUPS:
                raise DataError(f"unknown age_group {s.age_group!r}")
            if s.label not in LABELS:
                raise DataError(f"unknown label {s.label!r}")

    @property
    def speaker_map(self) -> Dict[str, SpeakerRecord]:
        return {s.speaker_id: s for s in self.speakers}

    def utterances_of(self, speaker_id: str) -> List[UtteranceRecord]:
        return [u for u in self.utterances if u.speaker_id == speaker_id]

    def restrict(self, speaker_ids: Iterable[str]) -> "DatasetManifest":
        keep = set(speaker_ids)
        return DatasetManifest(
            tuple(s for s in self.speakers if s.speaker_id in keep),
            tuple(u for u in self.utterances if u.speaker_id in keep),
        )

    def pooled(self) -> "DatasetManifest":
        """Relabel every non-control speaker as ``patient``."""
        return DatasetManifest(
            tuple(s if s.is_control else replace(s, label="patient") for s in self.speakers),
            self.utterances,
        )


def _read_rows(path: Path, columns: List[str]) -> List[dict]:
    if not path.exists():
        raise DataError(f"missing manifest file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(columns) <= set(reader.fieldnames):
            raise DataError(f"{path.name} must have columns {','.join(columns)}")
        return [{k: (row[k] or "").strip() for k in columns} for row in reader]


def load_manifest(path) -> DatasetManifest:
    """Load a manifest directory (or the path of its ``speakers.csv``)."""
    root = Path(path)
    if root.is_file():
        root = root.parent
    speakers = tuple(SpeakerRecord(**r) for r in _read_rows(root / "speakers.csv", SPEAKER_COLUMNS))
    utterances = tuple(
        UtteranceRecord(r["utterance_id"], r["speaker_id"], (root / r["path"]))
        for r in _read_rows(root / "utterances.csv", UTTERANCE_COLUMNS)
    )
    return DatasetManifest(speakers, utterances)


def write_manifest(manifest: DatasetManifest, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "speakers.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPEAKER_COLUMNS)
        for s in manifest.speakers:
            writer.writerow([s.speaker_id, s.gender, s.age_group, s.label])
    with open(root / "utterances.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(UTTERANCE_COLUMNS)
        for u in manifest.utterances:
            p = Path(u.path)
            try:
                p = p.resolve().relative_to(root.resolve())
            except ValueError:
                pass
            writer.writerow([u.utterance_id, u.speaker_id, p.as_posix()])
