"""k-nearest-neighbour mutual information between a discrete label and continuous points.

For each sample ``i`` with label ``y_i``, let ``d_i`` be the distance to its
k-th nearest neighbour among samples sharing that label and ``m_i`` the number
of samples (any label, excluding ``i``) within ``d_i``. The estimate in nats is::

    I = psi(N) - <psi(N_{y_i})> + psi(k) - <psi(m_i)>

clamped at zero. Distances are Euclidean, so the estimate is invariant to
rigid motions of the point cloud.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from ..errors import ValidationError


def knn_mutual_information(points: np.ndarray, labels: np.ndarray, k: int = 3) -> float:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels).ravel()
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValidationError("points and labels differ in length")
    if not np.all(np.isfinite(x)):
        raise ValidationError("points must be finite")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size == 1:
        return 0.0
    if np.any(counts <= k):
        raise ValidationError(f"every class needs more than k={k} samples; smallest has {counts.min()}")

    radius = np.empty(n)
    n_class = np.empty(n)
    for c, cnt in zip(classes, counts):
        idx = np.flatnonzero(y == c)
        dist, _ = cKDTree(x[idx]).query(x[idx], k=k + 1)
        radius[idx] = dist[:, -1]
        n_class[idx] = cnt
    tree = cKDTree(x)
    # widen by a few ulps so the k-th neighbour itself is never lost to rounding;
    # the count includes the point itself at distance 0
    r = radius * (1.0 + 1e-12)
    m = np.asarray(tree.query_ball_point(x, r, return_length=True)) - 1
    mi = digamma(n) - np.mean(digamma(n_class)) + digamma(k) - np.mean(digamma(m))
    return float(max(mi, 0.0))


def select_mi_pair(data: np.ndarray, labels: np.ndarray, k: int = 3) -> tuple[tuple[int, int], float]:
    """Coordinate pair with the largest 2-D mutual information.

    Pairs are scanned in lexicographic order and only a strictly larger value
    replaces the incumbent, so ties resolve to the earliest pair.
    """
    data = np.asarray(data, dtype=np.float64)
    best_pair, best = None, -np.inf
    for pair in combinations(range(data.shape[1]), 2):
        mi = knn_mutual_information(data[:, pair], labels, k)
        if mi > best:
            best_pair, best = pair, mi
    if best_pair is None:
        raise ValidationError("need at least two coordinates")
    return best_pair, float(best)


def mi_table(data: np.ndarray, labels: np.ndarray, k: int = 3) -> np.ndarray:
    """Symmetric matrix of pairwise-coordinate MI values (diagonal left at 0)."""
    d = data.shape[1]
    out = np.zeros((d, d))
    for i, j in combinations(range(d), 2):
        out[i, j] = out[j, i] = knn_mutual_information(data[:, [i, j]], labels, k)
    return out
