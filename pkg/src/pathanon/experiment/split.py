"""Speaker-disjoint train/test allocation with class-balance caps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from ..anonymize.seeding import rng_for, speaker_seed
from ..errors import DataError
from .manifest import DatasetManifest, SpeakerRecord

TRAIN_FRACTION = 0.7


@dataclass(frozen=True)
class SplitPlan:
    task: str
    train: Tuple[str, ...]
    test: Tuple[str, ...]
    seed: int
    patient_cap_ratio: float = 2.0
    control_cap_ratio: float = 1.5
    labels: Dict[str, int] = field(default_factory=dict, compare=False)  # speaker -> 1 patient / 0 control

    def __post_init__(self):
        if set(self.train) & set(self.test):
            raise ValueError("train and test speakers overlap")


def task_speakers(manifest: DatasetManifest, task: str) -> List[SpeakerRecord]:
    """Patients with ``task`` label plus controls from the same age groups."""
    patients = [s for s in manifest.speakers if s.label == task]
    ages = {s.age_group for s in patients}
    controls = [s for s in manifest.speakers if s.is_control and s.age_group in ages]
    return patients + controls


def _shuffled(ids: List[str], seed: int, tag: str) -> List[str]:
    rng = rng_for(speaker_seed(seed, tag, "split"))
    ids = sorted(ids)
    order = rng.permutation(len(ids))
    return [ids[i] for i in order]


def _cap(patients: List[str], controls: List[str], age_group: str,
         patient_ratio: float, control_ratio: float) -> Tuple[List[str], List[str]]:
    if age_group == "adult":
        patients = patients[:int(math.floor(patient_ratio * len(controls)))]
    else:
        controls = controls[:int(math.floor(control_ratio * len(patients)))]
    return patients, controls


def make_split(manifest: DatasetManifest, task: str, seed: int,
               patient_cap_ratio: float = 2.0, control_cap_ratio: float = 1.5) -> SplitPlan:
    """Seeded 70/30 speaker split per class, then capped within each partition.

    Adult tasks keep at most ``patient_cap_ratio`` patients per control;
    child tasks keep at most ``control_cap_ratio`` controls per patient.
    The 70 % share is rounded down.
    """
    speakers = task_speakers(manifest, task)
    n_pat = sum(not s.is_control for s in speakers)
    n_ctl = sum(s.is_control for s in speakers)
    if n_pat < 2 or n_ctl < 2:
        raise DataError(f"task {task!r} needs >= 2 patients and >= 2 controls (got {n_pat} / {n_ctl})")

    train: List[str] = []
    test: List[str] = []
    for age in sorted({s.age_group for s in speakers}):
        parts = {}
        for is_control in (False, True):
            ids = [s.speaker_id for s in speakers if s.age_group == age and s.is_control == is_control]
            ids = _shuffled(ids, seed, f"{task}/{age}/{'control' if is_control else 'patient'}")
            k = int(math.floor(TRAIN_FRACTION * len(ids)))
            parts[is_control] = (ids[:k], ids[k:])
        for idx, bucket in ((0, train), (1, test)):
            pat, ctl = _cap(parts[False][idx], parts[True][idx], age, patient_cap_ratio, control_cap_ratio)
            bucket.extend(pat + ctl)

    labels = {s.speaker_id: int(not s.is_control) for s in speakers}
    return SplitPlan(task, tuple(train), tuple(test), seed, patient_cap_ratio, control_cap_ratio, labels)
