"""Outlier filtering and smoothing of cycle datasets before training.

Two empirical models drive the filters: SoH fades linearly with cycle count,
and each relaxation trace follows a power law. A cycle flagged by either
filter is removed as a whole (its SoH label and its trace together).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List

import numpy as np

from .errors import FitError
from .fitting import fit_linear, fit_power
from .trace import BatterySpec, CycleRecord, VoltageTrace, grid_times, resample_to_grid

SOH_MAX_DEV = 0.005
WORST_FRACTION = 0.05
SMOOTH_WINDOW = 5


@dataclass(frozen=True, eq=False)
class CycleDataset:
    records: tuple
    spec: BatterySpec

    def __post_init__(self):
        recs = tuple(self.records)
        idx = [r.cycle_index for r in recs]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("records must be ordered by strictly increasing cycle_index")
        object.__setattr__(self, "records", recs)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def indices(self):
        return [r.cycle_index for r in self.records]

    @property
    def soh(self):
        return np.array([r.soh for r in self.records])

    def subset(self, keep: Iterable[int]) -> "CycleDataset":
        keep = set(keep)
        return CycleDataset(tuple(r for r in self.records if r.cycle_index in keep), self.spec)


@dataclass
class FilterReport:
    removed: Dict[int, str] = field(default_factory=dict)  # cycle_index -> reason

    @property
    def removed_indices(self):
        return set(self.removed)

    def to_dict(self):
        return {"removed": [{"cycle_index": k, "reason": v} for k, v in sorted(self.removed.items())]}


def filter_soh_outliers(ds: CycleDataset, max_dev: float = SOH_MAX_DEV) -> FilterReport:
    """Flag cycles whose SoH deviates more than ``max_dev`` from a linear fade fit."""
    if len(ds) < 10:
        raise ValueError(f"SoH filter needs >= 10 records, got {len(ds)}")
    x = np.array(ds.indices, dtype=float)
    y = ds.soh
    line = fit_linear(x, y)
    resid = y - line(x)
    return FilterReport({i: "soh_outlier" for i, r in zip(ds.indices, resid) if abs(r) > max_dev})


def filter_trace_outliers(ds: CycleDataset, worst_fraction: float = WORST_FRACTION) -> FilterReport:
    """Flag the ``ceil(worst_fraction * n)`` traces with the lowest power-fit R^2.

    This is a quota: it removes that many traces even when all fit well.
    Traces that cannot be fitted are always flagged.
    """
    if len(ds) < 20:
        raise ValueError(f"trace filter needs >= 20 records, got {len(ds)}")
    report = FilterReport()
    scored = []
    for rec in ds:
        try:
            r2 = fit_power(rec.relax_trace).r_squared
        except FitError:
            report.removed[rec.cycle_index] = "trace_outlier"
            continue
        scored.append((r2, rec.cycle_index))
    quota = math.ceil(worst_fraction * len(ds) - 1e-9)
    quota = max(0, quota - len(report.removed))
    scored.sort()
    for _, idx in scored[:quota]:
        report.removed[idx] = "trace_outlier"
    return report


def apply_filters(ds: CycleDataset, *reports: FilterReport) -> CycleDataset:
    drop = set()
    for rep in reports:
        drop |= rep.removed_indices
    return ds.subset(i for i in ds.indices if i not in drop)


def merge_reports(*reports: FilterReport) -> FilterReport:
    """Union of reports; an index flagged by several filters becomes ``paired_removal``."""
    out = FilterReport()
    for rep in reports:
        for k, reason in rep.removed.items():
            out.removed[k] = reason if k not in out.removed or out.removed[k] == reason else "paired_removal"
    return out


def moving_average(values, window: int = SMOOTH_WINDOW):
    """Centered moving average; near the ends the window is cut off at the edge.

    So ``[1, 2, 3, 4, 5]`` with window 3 gives ``[1.5, 2, 3, 4, 4.5]``.
    Works along axis 0, so a 2-D array is smoothed column by column.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    x = np.asarray(values, dtype=float)
    n = len(x)
    half = window // 2
    out = np.empty_like(x)
    for k in range(n):
        lo, hi = max(0, k - half), min(n, k + half + 1)
        # averaging deviations from the centre keeps constant runs exact
        out[k] = x[k] + (x[lo:hi] - x[k]).mean(axis=0)
    return out


def smooth_dataset(ds: CycleDataset, window: int = SMOOTH_WINDOW,
                   duration_s: float = 1800.0, interval_s: float = 1.0) -> CycleDataset:
    """Smooth SoH labels and grid-resampled traces across neighbouring cycles.

    Traces are replaced by their grid resampling (voltage only), averaged
    pointwise over the same sliding cycle window as the labels.
    """
    if len(ds) == 0:
        return ds
    grid = grid_times(duration_s, interval_s)
    soh = moving_average(ds.soh, window)
    mat = moving_average(np.array([resample_to_grid(r.relax_trace, duration_s, interval_s) for r in ds]), window)
    recs: List[CycleRecord] = []
    for rec, s, row in zip(ds, soh, mat):
        tr = VoltageTrace(grid, row, sample_interval=interval_s)
        recs.append(replace(rec, relax_trace=tr, soh=float(s)))
    return CycleDataset(tuple(recs), ds.spec)


def preprocess(ds: CycleDataset, max_dev: float = SOH_MAX_DEV, worst_fraction: float = WORST_FRACTION,
               window: int = SMOOTH_WINDOW, duration_s: float = 1800.0, interval_s: float = 1.0,
               smooth: bool = True):
    """Filter then smooth; returns ``(dataset, merged_report)``."""
    soh_rep = filter_soh_outliers(ds, max_dev)
    tr_rep = filter_trace_outliers(ds, worst_fraction) if worst_fraction > 0 else FilterReport()
    report = merge_reports(soh_rep, tr_rep)
    kept = apply_filters(ds, report)
    if smooth:
        kept = smooth_dataset(kept, window, duration_s, interval_s)
    return kept, report
