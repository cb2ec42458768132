"""Comparison estimators calibrated on the same cycle datasets.

* casals: SoH linear in the voltage after 5 minutes of rest
* bonds: SoH quadratic in the voltage after 30 minutes of rest
* vbash: SoH linear in the fitted power-law exponent ``b``

Predictions are returned unclamped; ``out_of_range`` marks values outside [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import FitError
from .fitting import MIN_FIT_SAMPLES, eval_power, fit_linear, fit_power, goodness
from .preprocessing import CycleDataset
from .session import ChargeSessionLog, segment_subtraces
from .trace import VoltageTrace

CASALS_AT_S = 300.0
BONDS_AT_S = 1800.0
KINDS = ("casals", "bonds", "vbash")


@dataclass(frozen=True)
class BaselineModel:
    kind: str
    coefficients: Tuple[float, ...]  # highest power first
    rmse: float
    r_squared: float
    n: int

    def __post_init__(self):
        want = 3 if self.kind == "bonds" else 2
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if len(self.coefficients) != want:
            raise ValueError(f"{self.kind} needs {want} coefficients")

    def __call__(self, x):
        return float(np.polyval(self.coefficients, x))

    def to_dict(self):
        return {"kind": self.kind, "coefficients": list(self.coefficients), "rmse": self.rmse,
                "r_squared": self.r_squared, "n": self.n}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], tuple(float(c) for c in d["coefficients"]), float(d["rmse"]),
                   float(d["r_squared"]), int(d["n"]))


@dataclass(frozen=True)
class BaselinePrediction:
    soh: float
    feature: float
    anchor_path: str  # measured | recovered | fit
    out_of_range: bool


def anchor_voltage(trace: VoltageTrace, at_s: float) -> Tuple[float, str]:
    """Voltage ``at_s`` seconds into the trace, power-fit extrapolated if the trace ends earlier."""
    t = trace.t - trace.t[0]
    if t[-1] >= at_s - 1e-9:
        return float(np.interp(at_s, t, trace.v)), "measured"
    if len(trace) < MIN_FIT_SAMPLES:
        raise FitError(f"trace covers {t[-1]:g} s < {at_s:g} s and is too short to extrapolate")
    return float(eval_power(fit_power(trace), at_s)), "recovered"


def _feature(kind, trace):
    if kind == "casals":
        return anchor_voltage(trace, CASALS_AT_S)
    if kind == "bonds":
        return anchor_voltage(trace, BONDS_AT_S)
    return fit_power(trace).b, "fit"


def baseline_fit(kind: str, ds: CycleDataset) -> BaselineModel:
    if kind not in KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}")
    x = np.array([_feature(kind, r.relax_trace)[0] for r in ds])
    y = ds.soh
    if kind == "bonds":
        if len(x) < 3:
            raise ValueError("quadratic calibration needs at least 3 cycles")
        # solve in centred coordinates, then expand to raw powers of v
        m = x.mean()
        A = np.column_stack([(x - m) ** 2, x - m, np.ones_like(x)])
        (a2, a1, a0), *_ = np.linalg.lstsq(A, y, rcond=None)
        coef = (float(a2), float(a1 - 2 * a2 * m), float(a0 - a1 * m + a2 * m * m))
        rmse, r2 = goodness(y, A @ np.array([a2, a1, a0]))
        return BaselineModel(kind, coef, rmse, r2, len(x))
    line = fit_linear(x, y)
    return BaselineModel(kind, (line.slope, line.intercept), line.rmse, line.r_squared, len(x))


def casals_fit(ds):
    return baseline_fit("casals", ds)


def bonds_fit(ds):
    return baseline_fit("bonds", ds)


def vbash_fit(ds):
    return baseline_fit("vbash", ds)


def baseline_predict(model: BaselineModel, trace: VoltageTrace) -> BaselinePrediction:
    x, path = _feature(model.kind, trace)
    s = model(x)
    return BaselinePrediction(s, x, path, not 0.0 <= s <= 1.0)


def baseline_session(model: BaselineModel, log: ChargeSessionLog, **segment_kw) -> Tuple[float, List[BaselinePrediction]]:
    """Mean baseline prediction over a session's valid sub-traces."""
    preds = []
    for sub in segment_subtraces(log, **segment_kw):
        try:
            preds.append(baseline_predict(model, sub.trace))
        except FitError:
            continue
    if not preds:
        raise FitError("no sub-trace usable by the baseline")
    return float(np.mean([p.soh for p in preds])), preds
