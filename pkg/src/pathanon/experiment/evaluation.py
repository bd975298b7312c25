"""Privacy and utility protocols: single evaluations, sweeps, pooled sets, inversion.

All results are plain dictionaries of JSON-ready values so they can be
handed straight to :func:`pathanon.experiment.report.emit_report`.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..anonymize.seeding import rng_for, speaker_seed
from ..audio_io import AudioClip
from ..embedding import SpeakerEmbedding, cosine_score, enroll_speaker
from ..errors import DataError
from ..metrics import (
    TrialScoreSet,
    classification_metrics,
    compute_auroc,
    compute_eer,
    pearson_r,
    statistical_parity_difference,
    unpaired_t_test,
)
from .classifier import ReferenceClassifier, train_reference_classifier
from .manifest import DatasetManifest
from .pipeline import AnonymizerSpec, FeatureStore
from .split import SplitPlan, make_split
from .trials import TrialPlan, generate_trials

SUBGROUP_KEYS = ("gender", "age_group", "disorder")
UTILITY_TAGS = ("gender", "age_group")
IDENTITY = AnonymizerSpec.identity()


def _store(manifest, seed, store, audio, jobs) -> FeatureStore:
    return store if store is not None else FeatureStore(manifest, seed, audio, jobs)


def default_task(manifest: DatasetManifest) -> str:
    """Most frequent non-control label (alphabetical on ties)."""
    counts = Counter(s.label for s in manifest.speakers if not s.is_control)
    if not counts:
        raise DataError("manifest has no patients")
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


# -- privacy -----------------------------------------------------------------

def score_trials(plan: TrialPlan, manifest: DatasetManifest, enroll_feats, test_feats) -> TrialScoreSet:
    """Cosine-score every trial; subgroup tags follow the enrolled speaker."""
    smap = manifest.speaker_map
    models = {
        spk: enroll_speaker([SpeakerEmbedding(enroll_feats[u].embedding, spk, u) for u in utts])
        for spk, utts in plan.enrollment.items()
    }
    scores, labels = [], []
    groups: Dict[str, List[str]] = {k: [] for k in SUBGROUP_KEYS}
    for t in plan.trials:
        probe = SpeakerEmbedding(test_feats[t.test_utterance].embedding, t.test_speaker, t.test_utterance)
        scores.append(cosine_score(models[t.enroll_speaker], probe))
        labels.append(t.label)
        rec = smap[t.enroll_speaker]
        groups["gender"].append(rec.gender)
        groups["age_group"].append(rec.age_group)
        groups["disorder"].append(rec.label)
    return TrialScoreSet(np.array(scores), np.array(labels), groups)


def eer_summary(trials: TrialScoreSet) -> dict:
    """Overall EER plus one entry per subgroup value; one-class subgroups are flagged."""
    overall = compute_eer(trials)
    subgroups: Dict[str, dict] = {}
    for key in SUBGROUP_KEYS:
        tags = np.array(trials.groups[key])
        subgroups[key] = {}
        for value in sorted(set(tags.tolist())):
            sub = trials.subset(tags == value)
            entry = {"n_trials": len(sub), "n_positive": int(sub.labels.sum())}
            if sub.labels.any() and not sub.labels.all():
                entry.update(eer_percent=compute_eer(sub).eer_percent, undefined=False)
            else:
                entry.update(eer_percent=None, undefined=True)
            subgroups[key][value] = entry
    return {"eer_percent": overall.eer_percent, "threshold": overall.threshold,
            "n_trials": len(trials), "subgroups": subgroups}


def _plan(manifest, speakers, seed, positives_per_speaker, negative_ratio) -> TrialPlan:
    speakers = sorted(speakers) if speakers is not None else sorted(s.speaker_id for s in manifest.speakers)
    if not speakers:
        raise DataError("empty test set")
    return generate_trials(speakers, manifest.utterances, seed, positives_per_speaker, negative_ratio)


def _eer_for(store, manifest, plan, enroll_spec, enroll_role, test_spec, test_role) -> dict:
    needed_enroll = {u for utts in plan.enrollment.values() for u in utts}
    needed_test = {t.test_utterance for t in plan.trials}
    utts = {u.utterance_id: u for u in manifest.utterances}
    enroll = store.get([utts[u] for u in sorted(needed_enroll)], enroll_spec, enroll_role)
    test = store.get([utts[u] for u in sorted(needed_test)], test_spec, test_role)
    return eer_summary(score_trials(plan, manifest, enroll, test))


def run_privacy_eval(manifest: DatasetManifest, spec: AnonymizerSpec, seed: int, *,
                     speakers: Optional[Sequence[str]] = None, positives_per_speaker: int = 10,
                     negative_ratio: float = 1.0, audio: Optional[Mapping[str, AudioClip]] = None,
                     jobs: int = 1, store: Optional[FeatureStore] = None) -> dict:
    """EER on original and anonymized test audio; enrollment always uses original audio."""
    store = _store(manifest, seed, store, audio, jobs)
    plan = _plan(manifest, speakers, seed, positives_per_speaker, negative_ratio)
    return {
        "n_speakers": len(plan.enrollment),
        "original": _eer_for(store, manifest, plan, IDENTITY, "enroll", IDENTITY, "test"),
        "anonymized": _eer_for(store, manifest, plan, IDENTITY, "enroll", spec, "test"),
    }


def run_inversion_attack(manifest: DatasetManifest, spec: AnonymizerSpec, seed: int, *,
                         speakers: Optional[Sequence[str]] = None, positives_per_speaker: int = 10,
                         negative_ratio: float = 1.0, audio: Optional[Mapping[str, AudioClip]] = None,
                         jobs: int = 1, store: Optional[FeatureStore] = None) -> dict:
    """Compare an attacker enrolling on original audio with one enrolling on anonymized audio.

    The anonymized enrollment uses its own per-speaker parameter draws
    (role ``enroll``), independent of the draws applied to test audio.
    """
    store = _store(manifest, seed, store, audio, jobs)
    plan = _plan(manifest, speakers, seed, positives_per_speaker, negative_ratio)
    original = _eer_for(store, manifest, plan, IDENTITY, "enroll", IDENTITY, "test")
    naive = _eer_for(store, manifest, plan, IDENTITY, "enroll", spec, "test")
    inverse = _eer_for(store, manifest, plan, spec, "enroll", spec, "test")
    return {
        "n_trials": original["n_trials"],
        "eer_original": original["eer_percent"],
        "eer_naive": naive["eer_percent"],
        "eer_inverse": inverse["eer_percent"],
        "naive": naive,
        "inverse": inverse,
    }


# -- utility -----------------------------------------------------------------

def _accuracy(scores, labels, threshold) -> float:
    return 100.0 * float(np.mean((scores >= threshold) == labels))


def run_utility_eval(classifier: ReferenceClassifier, features, labels,
                     tags: Mapping[str, Sequence[str]], threshold: Optional[float] = None) -> dict:
    """Overall and per-subgroup classification metrics plus statistical parity.

    The operating threshold is chosen once on the full test set (Youden) and
    reused for every subgroup. PtD for a subgroup value compares its accuracy
    with that of all remaining test items.
    """
    scores = classifier.predict_proba(features)
    labels = np.asarray(labels, dtype=bool)
    trials = TrialScoreSet(scores, labels)
    trials.require_both_classes()
    overall = classification_metrics(trials, threshold)
    thr = overall.threshold

    subgroups: Dict[str, dict] = {}
    ptd: Dict[str, dict] = {}
    for key, values in tags.items():
        values = np.asarray(values)
        if len(values) != len(labels):
            raise DataError(f"tag column {key!r} has the wrong length")
        subgroups[key], ptd[key] = {}, {}
        names = sorted(set(values.tolist()))
        counts = {v: int(np.sum(values == v)) for v in names}
        for v in names:
            mask = values == v
            sub = TrialScoreSet(scores[mask], labels[mask])
            entry = {"n": counts[v], "accuracy": _accuracy(sub.scores, sub.labels, thr)}
            if sub.labels.any() and not sub.labels.all():
                entry.update(auroc=compute_auroc(sub), undefined=False)
            else:
                entry.update(auroc=None, undefined=True)
            subgroups[key][v] = entry
            if len(names) == 1:
                gap = 0.0
            else:
                gap = statistical_parity_difference(entry["accuracy"],
                                                    _accuracy(scores[~mask], labels[~mask], thr))
            ptd[key][v] = {"ptd": gap, "minority": len(names) > 1 and counts[v] == min(counts.values())}
    return {"overall": asdict(overall), "n": len(labels), "subgroups": subgroups, "ptd": ptd}


def _utterance_table(manifest: DatasetManifest, speakers: Sequence[str]):
    keep = set(speakers)
    return [u for u in manifest.utterances if u.speaker_id in keep]


def _fit_and_eval(store: FeatureStore, manifest: DatasetManifest, split: SplitPlan, spec: AnonymizerSpec,
                  seed: int, test_utterances=None):
    train_utts = _utterance_table(manifest, split.train)
    test_utts = test_utterances if test_utterances is not None else _utterance_table(manifest, split.test)
    train_f = store.get(train_utts, spec, "test")
    x_train = np.array([train_f[u.utterance_id].pooled for u in train_utts])
    y_train = np.array([split.labels[u.speaker_id] for u in train_utts])
    clf = train_reference_classifier(x_train, y_train, seed)
    return clf, _eval_on(store, manifest, split, spec, clf, test_utts)


def _eval_on(store, manifest, split, spec, clf, test_utts) -> dict:
    smap = manifest.speaker_map
    test_f = store.get(test_utts, spec, "test")
    x = np.array([test_f[u.utterance_id].pooled for u in test_utts])
    y = np.array([split.labels[u.speaker_id] for u in test_utts])
    tags = {k: [getattr(smap[u.speaker_id], k) for u in test_utts] for k in UTILITY_TAGS}
    return run_utility_eval(clf, x, y, tags)


def sample_test_utterances(manifest: DatasetManifest, speakers: Sequence[str], seed: int, repetition: int,
                           per_speaker: int = 8):
    """Up to ``per_speaker`` utterances per speaker, drawn per repetition."""
    out = []
    for spk in sorted(speakers):
        utts = sorted(manifest.utterances_of(spk), key=lambda u: u.utterance_id)
        if len(utts) > per_speaker:
            rng = rng_for(speaker_seed(seed, spk, f"repetition-{repetition}"))
            utts = [utts[i] for i in sorted(rng.choice(len(utts), per_speaker, replace=False))]
        out.extend(utts)
    return out


def run_utility_comparison(manifest: DatasetManifest, spec: AnonymizerSpec, seed: int, *,
                           task: Optional[str] = None, repetitions: int = 10, per_speaker: int = 8,
                           audio: Optional[Mapping[str, AudioClip]] = None, jobs: int = 1,
                           store: Optional[FeatureStore] = None) -> dict:
    """Train on original and on anonymized audio; compare AUROC over repeated test draws."""
    if repetitions < 2:
        raise ValueError("need at least 2 repetitions for the significance test")
    store = _store(manifest, seed, store, audio, jobs)
    task = task or default_task(manifest)
    split = make_split(manifest, task, seed)
    out = {"task": task, "n_train": len(split.train), "n_test": len(split.test)}
    aurocs = {}
    for name, s in (("original", IDENTITY), ("anonymized", spec)):
        clf, full = _fit_and_eval(store, manifest, split, s, seed)
        reps = [_eval_on(store, manifest, split, s, clf,
                         sample_test_utterances(manifest, split.test, seed, r, per_speaker))["overall"]["auroc"]
                for r in range(repetitions)]
        aurocs[name] = reps
        out[name] = {**full, "auroc_repetitions": reps,
                     "auroc_mean": float(np.mean(reps)), "auroc_std": float(np.std(reps, ddof=1))}
    out["auroc_t_test"] = unpaired_t_test(aurocs["original"], aurocs["anonymized"])
    return out


def run_fairness_eval(manifest: DatasetManifest, spec: AnonymizerSpec, seed: int, *,
                      task: Optional[str] = None, audio: Optional[Mapping[str, AudioClip]] = None,
                      jobs: int = 1, store: Optional[FeatureStore] = None, **trial_kw) -> dict:
    """Subgroup privacy and utility, before and after anonymization."""
    store = _store(manifest, seed, store, audio, jobs)
    privacy = run_privacy_eval(manifest, spec, seed, store=store, **trial_kw)
    task = task or default_task(manifest)
    split = make_split(manifest, task, seed)
    utility = {name: _fit_and_eval(store, manifest, split, s, seed)[1]
               for name, s in (("original", IDENTITY), ("anonymized", spec))}
    return {"task": task, "privacy": privacy, "utility": utility}


# -- sweep & pooled ----------------------------------------------------------

def validate_alphas(alphas: Sequence[float]) -> List[float]:
    values = sorted({float(a) for a in alphas})
    if not values:
        raise ValueError("alphas must be non-empty")
    bad = [a for a in values if not 0.0 < a <= 1.2]
    if bad:
        raise ValueError(f"alphas must lie in (0, 1.2]: {bad}")
    return values


def run_sweep(manifest: DatasetManifest, alphas: Sequence[float], seed: int, *,
              task: Optional[str] = None, positives_per_speaker: int = 10, negative_ratio: float = 1.0,
              audio: Optional[Mapping[str, AudioClip]] = None, jobs: int = 1,
              store: Optional[FeatureStore] = None) -> dict:
    """Fixed-alpha McAdams sweep with one speaker split and one trial list for every row."""
    alphas = validate_alphas(alphas)
    store = _store(manifest, seed, store, audio, jobs)
    task = task or default_task(manifest)
    split = make_split(manifest, task, seed)
    plan = _plan(manifest, None, seed, positives_per_speaker, negative_ratio)

    base_privacy = _eer_for(store, manifest, plan, IDENTITY, "enroll", IDENTITY, "test")
    base_utility = _fit_and_eval(store, manifest, split, IDENTITY, seed)[1]
    rows = []
    for alpha in alphas:
        spec = AnonymizerSpec("mcadams", alpha=alpha)
        privacy = _eer_for(store, manifest, plan, IDENTITY, "enroll", spec, "test")
        utility = _fit_and_eval(store, manifest, split, spec, seed)[1]
        rows.append({
            "alpha": alpha,
            "eer_percent": privacy["eer_percent"],
            **{k: utility["overall"][k] for k in ("auroc", "accuracy", "sensitivity", "specificity")},
            "privacy_subgroups": privacy["subgroups"],
            "utility_subgroups": utility["subgroups"],
            "ptd": utility["ptd"],
        })
    try:
        corr = pearson_r([r["eer_percent"] for r in rows], [r["auroc"] for r in rows])
    except DataError as exc:
        corr = {"r": None, "p": None, "reason": str(exc)}
    return {
        "task": task,
        "train_speakers": list(split.train),
        "test_speakers": list(split.test),
        "n_trials": base_privacy["n_trials"],
        "original": {"eer_percent": base_privacy["eer_percent"], **base_utility["overall"]},
        "rows": rows,
        "eer_auroc_correlation": corr,
    }


def run_pooled_eval(manifest: DatasetManifest, spec: AnonymizerSpec, seed: int, *,
                    positives_per_speaker: int = 10, negative_ratio: float = 1.0,
                    audio: Optional[Mapping[str, AudioClip]] = None, jobs: int = 1,
                    store: Optional[FeatureStore] = None) -> dict:
    """Merge every disorder into one patient class and evaluate patients, controls and both."""
    controls = sorted(s.speaker_id for s in manifest.speakers if s.is_control)
    patients = sorted(s.speaker_id for s in manifest.speakers if not s.is_control)
    if not controls:
        raise DataError("pooled evaluation needs control speakers")
    if not patients:
        raise DataError("pooled evaluation needs patient speakers")
    pooled = manifest.pooled()
    store = _store(manifest, seed, store, audio, jobs)
    kw = dict(positives_per_speaker=positives_per_speaker, negative_ratio=negative_ratio, store=store)
    privacy = {
        "patient": run_privacy_eval(pooled, spec, seed, speakers=patients, **kw),
        "control": run_privacy_eval(pooled, spec, seed, speakers=controls, **kw),
        "combined": run_privacy_eval(pooled, spec, seed, **kw),
    }
    split = make_split(pooled, "patient", seed)
    utility = {name: _fit_and_eval(store, pooled, split, s, seed)[1]
               for name, s in (("original", IDENTITY), ("anonymized", spec))}
    return {
        "label_counts": {
            "patient": len(patients),
            "control": len(controls),
            "per_disorder": dict(sorted(Counter(s.label for s in manifest.speakers if not s.is_control).items())),
        },
        "privacy": privacy,
        "utility": utility,
    }
