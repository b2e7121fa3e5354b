"""ROC curves and equal error rate for scored verification trials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class ScoredTrials:
    """Trial scores with binary labels (1 = target, 0 = nontarget)."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).ravel()
        labels = np.asarray(self.labels).ravel().astype(np.int64)
        if scores.shape != labels.shape:
            raise ValidationError("scores and labels differ in length")
        if not np.all(np.isin(labels, (0, 1))):
            raise ValidationError("trial labels must be 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    def require_both_classes(self):
        n_pos = int(self.labels.sum())
        if n_pos == 0 or n_pos == self.labels.size:
            raise ValidationError("ROC/EER need at least one target and one nontarget trial")

    @classmethod
    def concatenate(cls, parts) -> "ScoredTrials":
        parts = list(parts)
        return cls(np.concatenate([p.scores for p in parts]), np.concatenate([p.labels for p in parts]))


def _as_trials(trials, labels=None) -> ScoredTrials:
    if isinstance(trials, ScoredTrials):
        return trials
    return ScoredTrials(trials, labels)


def roc_curve(trials, labels=None) -> np.ndarray:
    """ROC polyline as an array of (FPR, TPR) rows.

    A trial is accepted when its score is >= the threshold. One vertex is
    emitted per distinct score, plus the (0, 0) start; the final vertex is (1, 1).
    """
    t = _as_trials(trials, labels)
    t.require_both_classes()
    order = np.argsort(-t.scores, kind="stable")
    s = t.scores[order]
    y = t.labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # last index of every group of tied scores
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tpr = np.r_[0.0, tp[last] / tp[-1]]
    fpr = np.r_[0.0, fp[last] / fp[-1]]
    return np.column_stack([fpr, tpr])


def roc_auc(trials, labels=None) -> float:
    pts = roc_curve(trials, labels)
    return float(np.trapezoid(pts[:, 1], pts[:, 0]))


def eer(trials, labels=None) -> float:
    """Equal error rate: where the ROC polyline meets the anti-diagonal TPR = 1 - FPR."""
    pts = roc_curve(trials, labels)
    fpr, tpr = pts[:, 0], pts[:, 1]
    gap = 1.0 - tpr - fpr  # FNR - FPR, decreasing from 1 to -1 along the polyline
    i = int(np.flatnonzero(gap <= 0.0)[0])
    if gap[i] == 0.0:
        return float(fpr[i])
    a = gap[i - 1] / (gap[i - 1] - gap[i])
    return float(fpr[i - 1] + a * (fpr[i] - fpr[i - 1]))
