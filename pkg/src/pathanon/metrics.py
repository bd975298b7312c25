"""Verification and classification metrics plus the statistics used in reports.

All rates are percentages. A trial is accepted / predicted positive when
its score is greater than or equal to the threshold.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

from .errors import DataError


@dataclass
class TrialScoreSet:
    scores: np.ndarray
    labels: np.ndarray
    groups: Dict[str, List[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise DataError("scores and labels must be equal-length 1-D sequences")
        for name, tags in self.groups.items():
            if len(tags) != len(self.scores):
                raise DataError(f"group tag column {name!r} has the wrong length")

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def positives(self) -> np.ndarray:
        return self.scores[self.labels]

    @property
    def negatives(self) -> np.ndarray:
        return self.scores[~self.labels]

    def subset(self, mask) -> "TrialScoreSet":
        mask = np.asarray(mask, dtype=bool)
        groups = {k: [t for t, m in zip(v, mask) if m] for k, v in self.groups.items()}
        return TrialScoreSet(self.scores[mask], self.labels[mask], groups)

    def flipped(self) -> "TrialScoreSet":
        return TrialScoreSet(self.scores, ~self.labels, dict(self.groups))

    def require_both_classes(self) -> None:
        if not self.labels.any() or self.labels.all():
            raise DataError("need at least one positive and one negative trial")


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # ascending; the last entry is +inf
    far: np.ndarray
    frr: np.ndarray


@dataclass(frozen=True)
class EerResult:
    eer_percent: float
    threshold: float
    far_at_threshold: float
    frr_at_threshold: float


@dataclass(frozen=True)
class UtilityMetrics:
    auroc: float
    accuracy: float
    sensitivity: float
    specificity: float
    threshold: float


def compute_roc(trials: TrialScoreSet) -> RocCurve:
    """FAR/FRR at every distinct score threshold, plus +inf (reject all)."""
    trials.require_both_classes()
    pos = np.sort(trials.positives)
    neg = np.sort(trials.negatives)
    thresholds = np.append(np.unique(trials.scores), np.inf)
    # accepted = score >= t
    far = 100.0 * (len(neg) - np.searchsorted(neg, thresholds, side="left")) / len(neg)
    frr = 100.0 * np.searchsorted(pos, thresholds, side="left") / len(pos)
    return RocCurve(thresholds, far, frr)


def _crossing(thresholds, far, frr) -> EerResult:
    diff = far - frr  # non-increasing along the curve
    i = int(np.flatnonzero(diff <= 0)[0])
    if diff[i] == 0 or i == 0:
        return EerResult(float(far[i]), float(thresholds[i]), float(far[i]), float(frr[i]))
    d0, d1 = diff[i - 1], diff[i]
    t = d0 / (d0 - d1)
    eer = far[i - 1] + t * (far[i] - far[i - 1])
    lo, hi = thresholds[i - 1], thresholds[i]
    thr = lo if not np.isfinite(hi) else lo + t * (hi - lo)
    return EerResult(float(eer), float(thr), float(eer), float(eer))


def compute_eer(trials: TrialScoreSet) -> EerResult:
    """Equal error rate by linear interpolation across the FAR-FRR sign change."""
    roc = compute_roc(trials)
    return _crossing(roc.thresholds, roc.far, roc.frr)


def compute_auroc(trials: TrialScoreSet) -> float:
    """Mann-Whitney AUROC in percent, ties counted as one half."""
    trials.require_both_classes()
    ranks = rankdata(trials.scores)
    n_pos = int(trials.labels.sum())
    n_neg = len(trials) - n_pos
    u = ranks[trials.labels].sum() - n_pos * (n_pos + 1) / 2.0
    return 100.0 * u / (n_pos * n_neg)


def youden_threshold(trials: TrialScoreSet) -> float:
    roc = compute_roc(trials)
    j = (100.0 - roc.frr) + (100.0 - roc.far)
    return float(roc.thresholds[int(np.argmax(j))])


def classification_metrics(trials: TrialScoreSet, threshold: Optional[float] = None) -> UtilityMetrics:
    trials.require_both_classes()
    if threshold is None:
        threshold = youden_threshold(trials)
    pred = trials.scores >= threshold
    y = trials.labels
    tp = int(np.sum(pred & y))
    tn = int(np.sum(~pred & ~y))
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    return UtilityMetrics(
        auroc=compute_auroc(trials),
        accuracy=100.0 * (tp + tn) / len(y),
        sensitivity=100.0 * tp / n_pos,
        specificity=100.0 * tn / n_neg,
        threshold=float(threshold),
    )


def statistical_parity_difference(accuracy_minority: float, accuracy_majority: float) -> float:
    """Signed accuracy gap as a fraction; positive favours the minority group."""
    for v in (accuracy_minority, accuracy_majority):
        if not 0.0 <= v <= 100.0:
            raise ValueError("accuracies must lie in [0, 100]")
    return (accuracy_minority - accuracy_majority) / 100.0


def identification_odds(n_speakers: int, eer_percent: float) -> dict:
    """Expected false accepts when one speaker is searched among ``n_speakers``."""
    if n_speakers < 2:
        raise ValueError("need at least 2 speakers")
    if not 0.0 <= eer_percent <= 100.0:
        raise ValueError("eer_percent must lie in [0, 100]")
    expected = (n_speakers - 1) * eer_percent / 100.0
    return {"expected_false_accepts": expected, "odds_denominator": max(1, int(math.floor(expected + 0.5)))}


def _t_pvalue(t: float, df: float) -> float:
    if not np.isfinite(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def unpaired_t_test(a: Sequence[float], b: Sequence[float], equal_var: bool = True) -> dict:
    """Two-sided two-sample t-test (pooled variance unless ``equal_var`` is False)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise DataError("each sample needs at least 2 values")
    diff = a.mean() - b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if equal_var:
        df = float(na + nb - 2)
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    else:
        qa, qb = va / na, vb / nb
        se = math.sqrt(qa + qb)
        df = (qa + qb) ** 2 / (qa ** 2 / (na - 1) + qb ** 2 / (nb - 1)) if se > 0 else float(na + nb - 2)
    if se == 0.0:
        if diff == 0.0:
            return {"t": 0.0, "p": 1.0, "df": df, "degenerate": False}
        return {"t": math.copysign(math.inf, diff), "p": 0.0, "df": df, "degenerate": True}
    t = diff / se
    return {"t": float(t), "p": _t_pvalue(t, df), "df": df, "degenerate": False}


def pearson_r(x: Sequence[float], y: Sequence[float]) -> dict:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise DataError("length mismatch")
    if len(x) < 3:
        raise DataError("need at least 3 pairs")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DataError("constant input")
    r = float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))
    n = len(x)
    if abs(r) == 1.0:
        return {"r": r, "p": 0.0}
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return {"r": r, "p": _t_pvalue(t, n - 2)}


TRIAL_COLUMNS = ["enroll_id", "test_id", "score", "label", "gender", "age_group", "disorder"]


def write_trials(rows: Sequence[dict], path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRIAL_COLUMNS, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "score": f"{row['score']:.12g}", "label": int(bool(row["label"]))})


def load_trials(path) -> TrialScoreSet:
    """Read scored trials from the trial CSV schema."""
    scores, labels = [], []
    groups: Dict[str, List[str]] = {"gender": [], "age_group": [], "disorder": []}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"score", "label"} - set(reader.fieldnames or [])
        if missing:
            raise DataError(f"trial CSV missing columns: {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                scores.append(float(row["score"]))
            except (TypeError, ValueError):
                raise DataError(f"non-numeric score at line {lineno}") from None
            label = str(row["label"]).strip().lower()
            if label not in {"0", "1", "true", "false"}:
                raise DataError(f"bad label at line {lineno}: {row['label']!r}")
            labels.append(label in {"1", "true"})
            for k in groups:
                groups[k].append(row.get(k) or "")
    return TrialScoreSet(np.array(scores), np.array(labels, dtype=bool), groups)
