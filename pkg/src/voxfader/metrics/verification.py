"""Classifier-based speaker verification trials.

A softmax speaker classifier is fit on clean training embeddings. Each test
embedding yields one target trial (posterior of its true speaker) and
``n_impostors`` nontarget trials (posteriors of randomly drawn other speakers).
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from sklearn.linear_model import LogisticRegression

from ..errors import ValidationError
from .roc import ScoredTrials, eer


class SpeakerClassifier:
    def __init__(self, h: np.ndarray, speaker_ids: np.ndarray, C: float = 1.0, max_iter: int = 2000):
        speaker_ids = np.asarray(speaker_ids)
        spk, counts = np.unique(speaker_ids, return_counts=True)
        if spk.size < 2:
            raise ValidationError("speaker verification needs at least two speakers")
        if np.any(counts < 1):
            raise ValidationError("every speaker needs a training utterance")
        self.model = LogisticRegression(C=C, max_iter=max_iter)
        self.model.fit(np.asarray(h, dtype=np.float64), speaker_ids)
        self.speakers = self.model.classes_

    def posteriors(self, h: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(np.atleast_2d(h))


def verification_trials(clf: SpeakerClassifier, h: np.ndarray, speaker_ids: np.ndarray,
                        rng: np.random.Generator, n_impostors: int = 10) -> ScoredTrials:
    speaker_ids = np.asarray(speaker_ids)
    col = {s: i for i, s in enumerate(clf.speakers)}
    if not set(speaker_ids.tolist()) <= set(col):
        raise ValidationError("test speakers missing from the classifier's training set")
    n_imp = min(n_impostors, len(clf.speakers) - 1)
    post = clf.posteriors(h)
    scores, labels = [], []
    all_cols = np.arange(len(clf.speakers))
    for p, s in zip(post, speaker_ids):
        true = col[s]
        others = np.delete(all_cols, true)
        imp = rng.choice(others, size=n_imp, replace=False)
        scores.append(p[true])
        labels.append(1)
        scores.extend(p[imp])
        labels.extend([0] * n_imp)
    return ScoredTrials(np.array(scores), np.array(labels))


def speaker_verification_eer(train_h: np.ndarray, train_speakers: np.ndarray,
                             test_h: np.ndarray, test_speakers: np.ndarray,
                             transform: Callable[[np.ndarray], np.ndarray] | None = None,
                             rng: np.random.Generator | None = None,
                             n_impostors: int = 10) -> tuple[float, ScoredTrials]:
    """EER of the classifier-posterior protocol; ``transform`` manipulates test embeddings."""
    _, counts = np.unique(np.r_[np.asarray(train_speakers), np.asarray(test_speakers)], return_counts=True)
    if counts.size < 2 or np.any(counts < 2):
        raise ValidationError("need >= 2 speakers with >= 2 utterances each")
    rng = np.random.default_rng(0) if rng is None else rng
    clf = SpeakerClassifier(train_h, train_speakers)
    h = test_h if transform is None else transform(test_h)
    trials = verification_trials(clf, h, test_speakers, rng, n_impostors)
    return eer(trials), trials
