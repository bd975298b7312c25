"""Linear-logistic reference classifier over pooled feature vectors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.special import expit

from ..anonymize.seeding import rng_for, speaker_seed
from ..errors import DataError, NumericalError


@dataclass(frozen=True)
class ReferenceClassifier:
    weights: np.ndarray
    bias: float
    mean: np.ndarray  # z-scoring statistics from the training set
    scale: np.ndarray
    epochs: int
    loss_trace: List[float] = field(default_factory=list, compare=False)

    def decision_function(self, features) -> np.ndarray:
        x = (np.atleast_2d(np.asarray(features, dtype=np.float64)) - self.mean) / self.scale
        if x.shape[1] != self.weights.shape[0]:
            raise DataError(f"expected {self.weights.shape[0]} features, got {x.shape[1]}")
        return x @ self.weights + self.bias

    def predict_proba(self, features) -> np.ndarray:
        return expit(self.decision_function(features))


def train_reference_classifier(features, labels, seed: int, epochs: int = 200, learning_rate: float = 0.1,
                               batch_size: int = 32, l2: float = 1e-3) -> ReferenceClassifier:
    """Class-weighted logistic regression by minibatch gradient descent.

    Parameters start at zero and the seed only drives minibatch order, so
    flipping every label yields exactly negated parameters.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or len(x) != len(y):
        raise DataError("features must be (n, d) with one label per row")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise DataError("training set must contain both classes")

    mean = x.mean(axis=0)
    scale = np.maximum(x.std(axis=0), 1e-8)
    z = (x - mean) / scale
    n = len(y)
    sample_w = np.where(y > 0.5, n / (2.0 * n_pos), n / (2.0 * (n - n_pos)))

    w = np.zeros(z.shape[1])
    b = 0.0
    rng = rng_for(speaker_seed(seed, "reference-classifier"))
    trace: List[float] = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            err = sample_w[idx] * (expit(z[idx] @ w + b) - y[idx])
            w -= learning_rate * (z[idx].T @ err / len(idx) + l2 * w)
            b -= learning_rate * float(err.mean())
        logits = z @ w + b
        # log(1 + e^-|t|) form keeps the loss finite for large logits
        loss = np.logaddexp(0.0, logits) - y * logits
        trace.append(float(np.sum(sample_w * loss) / n))
    if not (np.all(np.isfinite(w)) and np.isfinite(b)):
        raise NumericalError("classifier training diverged")
    return ReferenceClassifier(w, float(b), mean, scale, epochs, trace)
