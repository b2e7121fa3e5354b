"""Accuracy and linear-probe measurements."""

from __future__ import annotations

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from ..errors import ValidationError


def binary_accuracy(probs, labels, threshold: float = 0.5) -> float:
    """Fraction of correct decisions; a score equal to the threshold counts as positive."""
    probs = np.asarray(probs, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if probs.size == 0:
        raise ValidationError("accuracy of an empty set is undefined")
    if probs.shape != labels.shape:
        raise ValidationError("probs and labels differ in length")
    return float(np.mean((probs >= threshold) == (labels == 1)))


def probe_accuracy(features: np.ndarray, labels: np.ndarray, groups: np.ndarray, max_iter: int = 5000) -> float:
    """Held-out accuracy of a freshly fitted logistic-regression probe.

    Groups (speakers) are split by parity, the probe is fit on the even ones
    and scored on the odd ones, so the probe cannot memorize group identity.
    """
    groups = np.asarray(groups)
    train = groups % 2 == 0
    if train.all() or not train.any():
        raise ValidationError("probe needs groups on both sides of the split")
    # raw latent codes can be badly scaled for lbfgs
    clf = make_pipeline(StandardScaler(), LogisticRegression(max_iter=max_iter))
    clf.fit(features[train], labels[train])
    return float(clf.score(features[~train], labels[~train]))
