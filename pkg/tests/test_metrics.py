import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxfader.errors import ValidationError
from voxfader.metrics import (
    SpeakerClassifier, ScoredTrials, binary_accuracy, eer, knn_mutual_information, mi_table, pca_fit,
    pca_project, roc_auc, roc_curve, select_mi_pair, speaker_verification_eer, verification_trials,
)

# ------------------------------------------------------------ oracles


def brute_force_eer(scores, labels):
    """Sweep thresholds at every midpoint between sorted distinct scores and interpolate the crossing."""
    s = np.unique(scores)
    thresholds = np.r_[s[0] - 1.0, (s[1:] + s[:-1]) / 2.0, s[-1] + 1.0]
    pos, neg = scores[labels == 1], scores[labels == 0]
    far = np.array([(neg >= t).mean() for t in thresholds])
    frr = np.array([(pos < t).mean() for t in thresholds])
    diff = frr - far  # rises from -1 to +1 as the threshold grows
    for i in range(len(thresholds)):
        if diff[i] == 0:
            return far[i]
        if diff[i] > 0:
            a = -diff[i - 1] / (diff[i] - diff[i - 1])
            return far[i - 1] + a * (far[i] - far[i - 1])
    raise AssertionError("no crossing")


def symmetric_3x3_eigenvalues(A):
    """Closed-form (trigonometric) eigenvalues of a real symmetric 3x3 matrix, descending."""
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    q = np.trace(A) / 3.0
    p2 = (A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2 + 2 * p1
    p = math.sqrt(p2 / 6.0)
    B = (A - q * np.eye(3)) / p
    r = min(max(np.linalg.det(B) / 2.0, -1.0), 1.0)
    phi = math.acos(r) / 3.0
    e1 = q + 2 * p * math.cos(phi)
    e3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    return np.array([e1, 3 * q - e1 - e3, e3])


class TestAccuracy:
    def test_all_correct(self):
        assert binary_accuracy([0.9, 0.2, 0.7], [1, 0, 1]) == 1.0

    def test_complement(self):
        rng = np.random.default_rng(0)
        p, y = rng.uniform(size=50), rng.integers(0, 2, 50)
        p[p == 0.5] = 0.4
        assert binary_accuracy(p, 1 - y) == pytest.approx(1 - binary_accuracy(p, y), abs=1e-15)

    def test_seven_of_ten(self):
        p = [0.9, 0.8, 0.7, 0.6, 0.1, 0.2, 0.3, 0.9, 0.8, 0.1]
        y = [1, 1, 1, 1, 0, 0, 0, 0, 0, 1]
        assert binary_accuracy(p, y) == 0.7

    def test_tie_is_positive(self):
        assert binary_accuracy([0.5], [1]) == 1.0

    def test_empty(self):
        with pytest.raises(ValidationError):
            binary_accuracy([], [])


class TestRoc:
    def test_separated_passes_through_corner(self):
        pts = roc_curve([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])
        assert any((p == [0.0, 1.0]).all() for p in pts)
        assert eer([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 0.0

    def test_identical_scores(self):
        pts = roc_curve(np.zeros(6), [1, 0, 1, 0, 0, 1])
        np.testing.assert_array_equal(pts, [[0, 0], [1, 1]])
        assert eer(np.zeros(6), [1, 0, 1, 0, 0, 1]) == 0.5

    def test_single_class(self):
        with pytest.raises(ValidationError):
            roc_curve([0.1, 0.2], [1, 1])
        with pytest.raises(ValidationError):
            eer([0.1, 0.2], [0, 0])

    def test_random_auc_half(self):
        rng = np.random.default_rng(0)
        assert abs(roc_auc(rng.normal(size=10_000), rng.integers(0, 2, 10_000)) - 0.5) < 0.02

    @given(st.integers(0, 2**32 - 1), st.integers(2, 300))
    @settings(max_examples=50)
    def test_monotone_endpoints_and_range(self, seed, n):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = np.round(rng.normal(size=n) + y, 1)
        pts = roc_curve(s, y)
        assert np.all(np.diff(pts, axis=0) >= 0)
        np.testing.assert_array_equal(pts[0], [0, 0])
        np.testing.assert_array_equal(pts[-1], [1, 1])
        assert 0.0 <= eer(s, y) <= 1.0

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_eer_invariant_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, 200)
        y[:2] = [0, 1]
        s = rng.normal(size=200) + y
        assert eer(s, y) == eer(np.exp(3 * s) + 1.0, y)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 1001))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = rng.normal(size=n) + rng.uniform(0, 3) * y
        if seed % 3 == 0:
            s = np.round(s, 1)  # exercise ties
        assert abs(eer(s, y) - brute_force_eer(s, y)) < 0.005

    def test_trials_validation(self):
        with pytest.raises(ValidationError):
            ScoredTrials([0.1, 0.2], [0, 2])
        both = ScoredTrials.concatenate([ScoredTrials([0.1], [0]), ScoredTrials([0.9], [1])])
        assert eer(both) == 0.0


class TestMutualInformation:
    def test_constant_labels(self):
        assert knn_mutual_information(np.random.default_rng(0).normal(size=(50, 2)), np.zeros(50)) == 0.0

    def test_independent(self):
        rng = np.random.default_rng(1)
        assert knn_mutual_information(rng.normal(size=(2000, 2)), rng.integers(0, 2, 2000)) < 0.05

    def test_fully_revealed_balanced(self):
        rng = np.random.default_rng(2)
        y = np.repeat([0, 1], 1000)
        x = rng.normal(size=(2000, 2)) + np.where(y[:, None] == 1, [10.0, 0.0], [0.0, 0.0])
        assert abs(knn_mutual_information(x, y) - math.log(2)) < 0.05 * math.log(2)

    def test_small_class(self):
        with pytest.raises(ValidationError):
            knn_mutual_information(np.random.default_rng(0).normal(size=(10, 2)), [0] * 7 + [1] * 3, k=3)

    def test_non_finite(self):
        with pytest.raises(ValidationError):
            knn_mutual_information(np.array([[np.nan, 0.0]] * 10), [0, 1] * 5)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_rotation_and_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, 300)
        y[:8] = [0, 1] * 4
        x = rng.normal(size=(300, 2)) + y[:, None] * rng.uniform(0, 2)
        base = knn_mutual_information(x, y)
        theta = rng.uniform(0, 2 * np.pi)
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        assert knn_mutual_information(x @ R.T + 5.0, y) == pytest.approx(base, abs=1e-9)
        perm = rng.permutation(300)
        assert knn_mutual_information(x[perm], y[perm]) == pytest.approx(base, abs=1e-12)


class TestSelectPair:
    def test_injected_pair(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 600)
        data = rng.normal(size=(600, 8))
        data[:, 3] += 3 * y
        data[:, 7] -= 3 * y
        pair, value = select_mi_pair(data, y)
        assert pair == (3, 7)
        table = mi_table(data, y)
        assert value == pytest.approx(table.max(), abs=1e-12)
        for i, j in combinations(range(8), 2):
            assert value >= table[i, j]

    def test_constant_labels_tie_break(self):
        pair, value = select_mi_pair(np.random.default_rng(0).normal(size=(40, 8)), np.zeros(40))
        assert pair == (0, 1) and value == 0.0


class TestPca:
    def test_line_in_3d(self):
        t = np.linspace(-1, 1, 50)
        m = pca_fit(np.column_stack([t, 2 * t, -t]) + 3.0)
        assert m.explained_variance_ratio[0] > 1 - 1e-8

    def test_projections_uncorrelated(self):
        x = np.random.default_rng(0).normal(size=(200, 5)) @ np.random.default_rng(1).normal(size=(5, 5))
        p = pca_project(pca_fit(x), x)
        c = np.corrcoef(p.T)
        assert np.all(np.abs(c - np.diag(np.diag(c))) < 1e-8)

    def test_eigenvalues_closed_form(self):
        x = np.random.default_rng(3).normal(size=(5, 3))
        xc = x - x.mean(axis=0)
        cov = xc.T @ xc / 4
        np.testing.assert_allclose(pca_fit(x).eigenvalues, symmetric_3x3_eigenvalues(cov), rtol=0, atol=1e-8)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.integers(1, 6))
    @settings(max_examples=40)
    def test_model_invariants(self, seed, n, d):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, d)) * rng.uniform(0.1, 3, d)
        m = pca_fit(x)
        np.testing.assert_allclose(m.components @ m.components.T, np.eye(d), atol=1e-8)
        assert np.all(np.diff(m.eigenvalues) <= 1e-12)
        assert np.all(m.eigenvalues >= -1e-10)
        trace = np.trace(np.cov(x.T, ddof=1).reshape(d, d))
        assert abs(m.eigenvalues.sum() - trace) <= 1e-8 * max(trace, 1e-300)

    def test_errors(self):
        with pytest.raises(ValidationError):
            pca_fit(np.ones((1, 3)))
        with pytest.raises(ValidationError):
            pca_project(pca_fit(np.random.default_rng(0).normal(size=(5, 3))), np.ones((2, 3)), dims=4)


def _speakers(rng, n_spk=12, n_utt=8, d=10, spread=3.0, noise=0.5):
    centers = rng.normal(size=(n_spk, d)) * spread
    spk = np.repeat(np.arange(n_spk), n_utt)
    return centers[spk] + noise * rng.normal(size=(len(spk), d)), spk


class TestVerification:
    def test_separated_speakers_low_eer(self):
        h, spk = _speakers(np.random.default_rng(0))
        train = np.arange(len(spk)) % 4 != 0
        value, trials = speaker_verification_eer(h[train], spk[train], h[~train], spk[~train])
        assert value < 0.10
        assert trials.labels.sum() == (~train).sum()
        assert len(trials.scores) == (~train).sum() * 11

    def test_noise_embeddings_chance(self):
        rng = np.random.default_rng(1)
        h, spk = _speakers(rng, n_spk=20, n_utt=40)
        train = np.arange(len(spk)) % 2 == 0
        value, _ = speaker_verification_eer(h[train], spk[train], h[~train], spk[~train],
                                            transform=lambda x: rng.normal(size=x.shape) * 3.0)
        assert abs(value - 0.5) < 0.05

    def test_too_few_utterances(self):
        h = np.random.default_rng(0).normal(size=(3, 2))
        with pytest.raises(ValidationError):
            speaker_verification_eer(h[:2], np.array([0, 1]), h[2:], np.array([2]))

    def test_trials_deterministic_given_rng(self):
        h, spk = _speakers(np.random.default_rng(0))
        clf = SpeakerClassifier(h, spk)
        a = verification_trials(clf, h, spk, np.random.default_rng(5))
        b = verification_trials(clf, h, spk, np.random.default_rng(5))
        assert a.scores.tobytes() == b.scores.tobytes()
