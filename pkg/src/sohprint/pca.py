"""Principal component analysis by symmetric eigendecomposition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VARIANCE_TARGET = 0.99


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing
    total_variance: float
    variance_target: float = VARIANCE_TARGET

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def variance_retained(self) -> float:
        if self.total_variance == 0.0:
            return 1.0
        return float(self.explained_variance.sum() / self.total_variance)

    def to_dict(self):
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "total_variance": self.total_variance,
            "variance_target": self.variance_target,
        }

    @classmethod
    def from_dict(cls, d):
        mean = np.asarray(d["mean"], dtype=float)
        comps = np.asarray(d["components"], dtype=float).reshape(-1, mean.shape[0])
        return cls(mean, comps, np.asarray(d["explained_variance"], dtype=float),
                   float(d["total_variance"]), float(d["variance_target"]))


def _fix_signs(vecs):
    # largest-magnitude entry of each row made positive
    idx = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(len(vecs)), idx])
    signs[signs == 0] = 1.0
    return vecs * signs[:, None]


def pca_fit(vectors, variance_target: float = VARIANCE_TARGET) -> PcaModel:
    """Keep the fewest components whose cumulative variance reaches the target.

    Uses the d x d covariance when n > d and the n x n Gram matrix otherwise;
    both give the same nonzero spectrum.
    """
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2:
        raise ValueError("vectors must be an n x d matrix")
    n, d = X.shape
    if n < 2 or d < 1:
        raise ValueError(f"need n >= 2 and d >= 1, got {n} x {d}")
    if not 0 < variance_target <= 1:
        raise ValueError("variance_target must be in (0, 1]")
    mean = X.mean(axis=0)
    Xc = X - mean
    total = float(np.einsum("ij,ij->", Xc, Xc) / (n - 1))
    empty = PcaModel(mean, np.zeros((0, d)), np.zeros(0), 0.0, variance_target)
    if total == 0.0:
        return empty

    if n > d:
        evals, evecs = np.linalg.eigh(Xc.T @ Xc / (n - 1))
        order = np.argsort(evals)[::-1]
        evals, vecs = evals[order], evecs[:, order].T
    else:
        evals, u = np.linalg.eigh(Xc @ Xc.T / (n - 1))
        order = np.argsort(evals)[::-1]
        evals, u = evals[order], u[:, order]
        keep = evals > evals[0] * 1e-12
        evals, u = evals[keep], u[:, keep]
        vecs = (Xc.T @ u / np.sqrt(evals * (n - 1))).T
    evals = np.clip(evals, 0.0, None)

    cum = np.cumsum(evals) / total
    k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    k = min(k, len(evals))
    comps = _fix_signs(vecs[:k])
    return PcaModel(mean, comps, evals[:k].copy(), total, variance_target)


def pca_project(model: PcaModel, vector) -> np.ndarray:
    """Coordinates of ``vector`` (or each row of a matrix) in the kept basis."""
    x = np.asarray(vector, dtype=float)
    if x.shape[-1] != model.dim:
        raise ValueError(f"dimension mismatch: model expects {model.dim}, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, coords) -> np.ndarray:
    return model.mean + np.asarray(coords, dtype=float) @ model.components
