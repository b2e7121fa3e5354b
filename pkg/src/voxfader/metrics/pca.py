"""Principal component analysis by symmetric eigendecomposition of the covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # rows, descending eigenvalue
    eigenvalues: np.ndarray

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.eigenvalues / self.eigenvalues.sum()


def pca_fit(data: np.ndarray) -> PcaModel:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError("PCA needs at least two samples")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order].T
    # sign convention: largest-magnitude loading of each component is positive
    flip = np.sign(vecs[np.arange(len(vecs)), np.argmax(np.abs(vecs), axis=1)])
    vecs = vecs * np.where(flip == 0, 1.0, flip)[:, None]
    return PcaModel(mean, vecs, vals)


def pca_project(model: PcaModel, data: np.ndarray, dims: int | None = None) -> np.ndarray:
    dims = model.components.shape[0] if dims is None else dims
    if not 1 <= dims <= model.components.shape[0]:
        raise ValidationError(f"dims must lie in [1, {model.components.shape[0]}]")
    return (np.asarray(data, dtype=np.float64) - model.mean) @ model.components[:dims].T
