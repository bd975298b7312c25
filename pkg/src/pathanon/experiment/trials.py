"""Verification trial lists.

Each speaker's utterances are divided, after a seeded shuffle, into an
enrollment half (the speaker model is their centroid) and a test half.
Positive trials pair a speaker model with one of that speaker's test
utterances; negatives pair it with test utterances of other speakers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from ..anonymize.seeding import rng_for, speaker_seed
from ..errors import DataError
from .manifest import UtteranceRecord


@dataclass(frozen=True)
class Trial:
    enroll_speaker: str
    test_utterance: str
    test_speaker: str
    label: bool


@dataclass(frozen=True)
class TrialPlan:
    trials: Tuple[Trial, ...]
    enrollment: Dict[str, Tuple[str, ...]]  # speaker -> enrollment utterance ids

    def __len__(self) -> int:
        return len(self.trials)


def enrollment_split(utterances: Sequence[UtteranceRecord], seed: int) -> Tuple[List[str], List[str]]:
    ids = sorted(u.utterance_id for u in utterances)
    rng = rng_for(speaker_seed(seed, utterances[0].speaker_id, "enrollment"))
    ids = [ids[i] for i in rng.permutation(len(ids))]
    n_enroll = max(1, len(ids) // 2)
    return ids[:n_enroll], ids[n_enroll:]


def generate_trials(test_speakers: Iterable[str], utterances: Sequence[UtteranceRecord], seed: int,
                    positives_per_speaker: int = 10, negative_ratio: float = 1.0) -> TrialPlan:
    speakers = sorted(set(test_speakers))
    if len(speakers) < 2:
        raise DataError("need at least 2 speakers to form negative trials")
    by_speaker: Dict[str, List[UtteranceRecord]] = {s: [] for s in speakers}
    for u in utterances:
        if u.speaker_id in by_speaker:
            by_speaker[u.speaker_id].append(u)

    enrollment: Dict[str, Tuple[str, ...]] = {}
    test_utts: Dict[str, List[str]] = {}
    for s in speakers:
        if len(by_speaker[s]) < 2:
            raise DataError(f"speaker {s!r} needs >= 2 utterances")
        enroll, test = enrollment_split(by_speaker[s], seed)
        enrollment[s] = tuple(sorted(enroll))
        test_utts[s] = test

    trials: List[Trial] = []
    for s in speakers:
        for utt in test_utts[s][:positives_per_speaker]:
            trials.append(Trial(s, utt, s, True))
        n_pos = min(len(test_utts[s]), positives_per_speaker)
        pool = [(other, utt) for other in speakers if other != s for utt in test_utts[other]]
        n_neg = min(len(pool), int(round(negative_ratio * n_pos)))
        rng = rng_for(speaker_seed(seed, s, "negatives"))
        for i in sorted(rng.choice(len(pool), size=n_neg, replace=False)):
            other, utt = pool[i]
            trials.append(Trial(s, utt, other, False))
    return TrialPlan(tuple(trials), enrollment)
