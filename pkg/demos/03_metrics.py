"""Sanity checks for the evaluation measures on data with known answers."""

import math

import numpy as np

from voxfader.metrics import eer, knn_mutual_information, pca_fit, pca_project, roc_curve, select_mi_pair

rng = np.random.default_rng(3)

# Two Gaussian score distributions one unit apart: the EER is Phi(-0.5) ~ 30.85%
n = 20000
labels = np.repeat([1, 0], n // 2)
scores = rng.normal(size=n) + 1.0 * labels
print(f"EER {eer(scores, labels):.4f}   theory {0.5 * math.erfc(0.5 / math.sqrt(2)):.4f}")
roc = roc_curve(scores[::50], labels[::50])
print(f"ROC polyline has {len(roc)} vertices, from {roc[0].tolist()} to {roc[-1].tolist()}")

# kNN mutual information, in nats
x = rng.normal(size=(2000, 2))
print(f"MI, labels independent of points:  {knn_mutual_information(x, rng.integers(0, 2, 2000)):.4f}")
y = np.repeat([0, 1], 1000)
x = rng.normal(size=(2000, 2)) * 0.1 + 10.0 * y[:, None]
print(f"MI, labels fully revealed:         {knn_mutual_information(x, y):.4f}   ln 2 = {math.log(2):.4f}")
x = rng.normal(size=(2000, 2)) + 1.0 * y[:, None]
print(f"MI, clusters overlap:              {knn_mutual_information(x, y):.4f}")

# PCA then the most informative pair of components
data = rng.normal(size=(1000, 6)) * [5, 3, 2, 1, 0.5, 0.2]
g = (rng.random(1000) < 0.5).astype(int)
data[:, 3] += 2.0 * g  # hide the label along a minor axis
model = pca_fit(data)
print("explained variance ratio:", np.round(model.explained_variance_ratio, 3))
pair, mi = select_mi_pair(pca_project(model, data, 4), g)
print(f"best pair of the first 4 components: {pair}  MI {mi:.3f}")
