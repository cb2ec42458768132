"""Fingerprint map: grid vectors -> PCA -> regression tree -> SoH.

Also holds evaluation by binned confusion matrix and dataset extension
through the per-time linear law between relaxation drop and SoH.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from .errors import SchemaError
from .fitting import LinearFit, fit_linear
from .pca import VARIANCE_TARGET, PcaModel, pca_fit, pca_project
from .preprocessing import CycleDataset
from .trace import CycleRecord, VoltageTrace, grid_times, resample_to_grid
from .tree import MAX_DEPTH, MIN_LEAF, SOH_STEP, RegressionTree, tree_predict, tree_train

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    duration_s: float = 1800.0
    interval_s: float = 1.0
    uses_dropped_voltage: bool = True
    variance_target: float = VARIANCE_TARGET
    min_leaf: int = MIN_LEAF
    max_depth: int = MAX_DEPTH
    soh_step: float = SOH_STEP


def fingerprint_vector(trace: VoltageTrace, duration_s: float = 1800.0, interval_s: float = 1.0,
                       dropped: bool = True) -> np.ndarray:
    """Grid-resampled voltage, optionally as the drop from the first grid value."""
    v = resample_to_grid(trace, duration_s, interval_s)
    return v[0] - v if dropped else v


def dataset_matrix(ds: Iterable[CycleRecord], duration_s=1800.0, interval_s=1.0, dropped=True):
    return np.array([fingerprint_vector(r.relax_trace, duration_s, interval_s, dropped) for r in ds])


@dataclass(frozen=True, eq=False)
class FingerprintModel:
    pca: PcaModel
    tree: RegressionTree
    duration_s: float = 1800.0
    interval_s: float = 1.0
    uses_dropped_voltage: bool = True
    model_name: str = "generic"
    soh_step: float = SOH_STEP
    n_train: int = 0

    def __post_init__(self):
        if self.soh_step <= 0:
            raise ValueError("soh_step must be positive")
        if len(grid_times(self.duration_s, self.interval_s)) != self.pca.dim:
            raise ValueError("grid does not match PCA input dimension")

    def vector(self, trace: VoltageTrace) -> np.ndarray:
        return fingerprint_vector(trace, self.duration_s, self.interval_s, self.uses_dropped_voltage)

    def predict_vector(self, vec) -> float:
        return tree_predict(self.tree, pca_project(self.pca, vec), self.soh_step)

    def predict(self, trace: VoltageTrace) -> float:
        return self.predict_vector(self.vector(trace))

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "model_name": self.model_name,
            "grid": {"duration_s": self.duration_s, "interval_s": self.interval_s},
            "uses_dropped_voltage": self.uses_dropped_voltage,
            "soh_step": self.soh_step,
            "n_train": self.n_train,
            "pca": self.pca.to_dict(),
            "tree": self.tree.to_dict(),
        }

    def to_json(self) -> str:
        # json writes floats with repr, which round-trips exactly
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEMA_VERSION:
            raise SchemaError(f"model schema {d.get('schema')!r} not supported (expected {SCHEMA_VERSION})")
        return cls(
            pca=PcaModel.from_dict(d["pca"]),
            tree=RegressionTree.from_dict(d["tree"]),
            duration_s=float(d["grid"]["duration_s"]),
            interval_s=float(d["grid"]["interval_s"]),
            uses_dropped_voltage=bool(d["uses_dropped_voltage"]),
            model_name=d["model_name"],
            soh_step=float(d["soh_step"]),
            n_train=int(d["n_train"]),
        )

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


def train_map(ds: CycleDataset, config: TrainConfig = TrainConfig()) -> FingerprintModel:
    """Build grid vectors, reduce them with PCA and fit the regression tree."""
    if len(ds) < 2 * config.min_leaf:
        raise ValueError(f"need at least {2 * config.min_leaf} records to train, got {len(ds)}")
    X = dataset_matrix(ds, config.duration_s, config.interval_s, config.uses_dropped_voltage)
    pca = pca_fit(X, config.variance_target)
    tree = tree_train(pca_project(pca, X), ds.soh, config.min_leaf, config.max_depth)
    return FingerprintModel(pca, tree, config.duration_s, config.interval_s, config.uses_dropped_voltage,
                            ds.spec.model_name, config.soh_step, len(ds))


@dataclass
class Confusion:
    matrix: np.ndarray  # rows: true bin, columns: predicted bin
    bin_edges: np.ndarray  # lower edge of each bin
    accuracy: float
    n: int

    def to_dict(self):
        return {"bin_edges": self.bin_edges.tolist(), "matrix": self.matrix.tolist(),
                "accuracy": self.accuracy, "n": self.n}


def _bin(values, width):
    # tiny nudge so values sitting on an edge are not pushed down by rounding
    return np.floor(np.asarray(values, dtype=float) / width + 1e-9).astype(int)


def confusion(true_soh, pred_soh, bin_width: float = 0.04) -> Confusion:
    t = _bin(true_soh, bin_width)
    p = _bin(pred_soh, bin_width)
    if len(t) == 0 or len(t) != len(p):
        raise ValueError("need equally many, and at least one, true and predicted values")
    lo, hi = min(t.min(), p.min()), max(t.max(), p.max())
    m = np.zeros((hi - lo + 1, hi - lo + 1), dtype=int)
    np.add.at(m, (t - lo, p - lo), 1)
    return Confusion(m, np.arange(lo, hi + 1) * bin_width, float(np.trace(m) / len(t)), len(t))


def evaluate_confusion(model: FingerprintModel, holdout: CycleDataset, bin_width: float = 0.04,
                       truth: Optional[Iterable[float]] = None) -> Confusion:
    """Bin labels (or ``truth`` if given) and predictions into ``bin_width`` categories."""
    if len(holdout) == 0:
        raise ValueError("holdout is empty")
    pred = [model.predict(r.relax_trace) for r in holdout]
    true = holdout.soh if truth is None else list(truth)
    return confusion(true, pred, bin_width)


# ------------------------------------------------------------- extension


@dataclass
class DropLaw:
    """Per-grid-time linear fits ``drop(t) = alpha(t) * SoH + beta(t)``."""

    grid: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    rmse: np.ndarray
    v0: LinearFit  # first grid voltage against SoH
    soh_range: tuple

    def trace(self, soh: float) -> np.ndarray:
        return float(self.v0(soh)) - (self.alpha * soh + self.beta)


def fit_drop_law(ds: CycleDataset, duration_s: float = 1800.0, interval_s: float = 1.0) -> DropLaw:
    V = dataset_matrix(ds, duration_s, interval_s, dropped=False)
    s = ds.soh
    if np.ptp(s) < 0.10 - 1e-12:
        raise ValueError(f"dataset spans {np.ptp(s):.3f} SoH; extension needs >= 0.10")
    drop = V[:, :1] - V
    # one least-squares solve for every grid time at once
    A = np.column_stack([s, np.ones_like(s)])
    coef, *_ = np.linalg.lstsq(A, drop, rcond=None)
    resid = drop - A @ coef
    rmse = np.sqrt(np.mean(resid ** 2, axis=0))
    return DropLaw(grid_times(duration_s, interval_s), coef[0], coef[1], rmse,
                   fit_linear(s, V[:, 0]), (float(s.min()), float(s.max())))


def extend_dataset(ds: CycleDataset, soh_values: Iterable[float], duration_s: float = 1800.0,
                   interval_s: float = 1.0) -> CycleDataset:
    """Append synthetic noise-free records at SoH values the data does not cover.

    Values inside the measured SoH range are skipped with a warning.
    Synthetic records get cycle indices after the last measured one, in
    order of decreasing SoH.
    """
    law = fit_drop_law(ds, duration_s, interval_s)
    lo, hi = law.soh_range
    wanted = sorted({round(float(s), 12) for s in soh_values}, reverse=True)
    skipped = [s for s in wanted if lo <= s <= hi]
    if skipped:
        warnings.warn(f"skipping {len(skipped)} SoH values inside the measured range [{lo:.4f}, {hi:.4f}]")
    profile = ds.records[-1].profile if len(ds) else None
    nxt = max(ds.indices) + 1
    recs: List[CycleRecord] = list(ds.records)
    for s in wanted:
        if lo <= s <= hi:
            continue
        tr = VoltageTrace(law.grid, law.trace(s), sample_interval=interval_s)
        recs.append(CycleRecord(tr, s, nxt, profile, synthetic=True))
        nxt += 1
    return CycleDataset(tuple(recs), ds.spec)


def soh_grid(lo: float, hi: float, step: float = 0.001) -> List[float]:
    """Inclusive-exclusive range ``[lo, hi)`` on a decimal step."""
    n = int(np.floor((hi - lo) / step + 1e-9))
    return [round(lo + k * step, 10) for k in range(n)]
