"""Session-level SoH estimates, history smoothing and Coulomb counting."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import List

import numpy as np

from .errors import NoEstimateError, TooShortError
from .fingerprint import FingerprintModel
from .fitting import fit_linear
from .session import (ALPHA, MIN_SUBTRACE_S, SPIKE_MV, VALIDITY_R2, ChargeSessionLog,
                      recover_trace, segment_subtraces)
from .trace import BatterySpec, VoltageTrace

SOH_MIN, SOH_MAX = 0.0, 1.2
SMOOTH_WINDOW = 10
MIN_SMOOTH_SAMPLES = 3


@dataclass(frozen=True)
class SohEstimate:
    session_id: str
    raw: float
    smoothed: float
    n_subtraces: int
    timestamp: float = 0.0
    clamped: bool = False
    predictions: tuple = ()

    def to_dict(self):
        d = asdict(self)
        d["predictions"] = list(self.predictions)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["predictions"] = tuple(d.get("predictions", ()))
        return cls(**d)


def _clamp(x):
    y = min(max(x, SOH_MIN), SOH_MAX)
    return y, y != x


def estimate_session(model: FingerprintModel, log: ChargeSessionLog, session_id: str = "session",
                     timestamp: float = 0.0, spike_mv: float = SPIKE_MV, alpha: float = ALPHA,
                     validity_r2: float = VALIDITY_R2, min_subtrace_s: float = MIN_SUBTRACE_S) -> SohEstimate:
    """Mean fingerprint prediction over the session's usable sub-traces."""
    subs = segment_subtraces(log, spike_mv, alpha, validity_r2)
    preds = []
    for sub in subs:
        try:
            rec = recover_trace(sub, model.duration_s, model.interval_s, min_subtrace_s)
        except TooShortError:
            continue
        preds.append(model.predict(rec.trace))
    if not preds:
        raise NoEstimateError(f"{session_id}: no usable relaxation sub-trace")
    raw, clamped = _clamp(float(np.mean(preds)))
    return SohEstimate(session_id, raw, raw, len(preds), timestamp, clamped, tuple(preds))


@dataclass
class EstimateHistory:
    estimates: List[SohEstimate] = field(default_factory=list)

    def __post_init__(self):
        ts = [e.timestamp for e in self.estimates]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("history timestamps must be non-decreasing")

    def __len__(self):
        return len(self.estimates)

    def __iter__(self):
        return iter(self.estimates)

    def append(self, est: SohEstimate):
        if self.estimates and est.timestamp < self.estimates[-1].timestamp:
            raise ValueError("estimate is older than the last one in the history")
        self.estimates.append(est)

    @property
    def raw(self):
        return np.array([e.raw for e in self.estimates])

    @property
    def smoothed(self):
        return np.array([e.smoothed for e in self.estimates])

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.estimates)

    @classmethod
    def from_jsonl(cls, text: str):
        return cls([SohEstimate.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()])


def smooth_values(raw, window: int = SMOOTH_WINDOW, min_samples: int = MIN_SMOOTH_SAMPLES) -> np.ndarray:
    """First-order smoother: value of a line fitted over the trailing window."""
    if window < 1:
        raise ValueError("window must be >= 1")
    raw = np.asarray(raw, dtype=float)
    out = raw.copy()
    for p in range(len(raw)):
        lo = max(0, p - window + 1)
        if p - lo + 1 < min_samples:
            continue
        line = fit_linear(np.arange(lo - p, 1, dtype=float), raw[lo:p + 1])
        out[p] = line.intercept  # line evaluated at the current position
    return out


def smooth_history(history: EstimateHistory, window: int = SMOOTH_WINDOW,
                   min_samples: int = MIN_SMOOTH_SAMPLES) -> EstimateHistory:
    """Recompute ``smoothed`` for every estimate; raw values are untouched."""
    sm = smooth_values(history.raw, window, min_samples)
    return EstimateHistory([replace(e, smoothed=_clamp(float(s))[0]) for e, s in zip(history, sm)])


@dataclass(frozen=True)
class CoulombResult:
    delta_c_mah: float
    c_fullcharge_mah: float
    soh: float


def coulomb_count(trace: VoltageTrace, soc_start: float, soc_end: float, spec: BatterySpec) -> CoulombResult:
    """Charge moved between two SoC levels, scaled to a full-charge capacity.

    The trapezoid integral is taken in magnitude so charging and discharging
    traces give the same positive capacity.
    """
    if trace.i is None:
        raise ValueError("coulomb counting needs a current channel")
    span = abs(soc_start - soc_end)
    if span == 0:
        raise ValueError("soc_start and soc_end must differ")
    delta = abs(float(np.trapezoid(trace.i, trace.t))) / 3600.0
    full = delta / span
    return CoulombResult(delta, full, full / spec.design_capacity_mah)
