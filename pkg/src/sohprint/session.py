"""Over-night charge sessions: full-charge detection and trickle segmentation.

After the charger reaches full voltage, some phones keep the battery topped
up with short trickle charges. Each trickle shows up as a sudden voltage
rise, so the post-charge trace is cut at those rises into clean relaxation
sub-traces. Sub-traces are power-fitted and may be extended to a fixed grid.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import FitError, NotFullyChargedError, TooShortError
from .fitting import MIN_FIT_SAMPLES, PowerFit, eval_power, fit_power
from .trace import VoltageTrace, grid_times

FULL_TOLERANCE_V = 0.005
HOLD_S = 60.0
SPIKE_MV = 5.0
ALPHA = 0.3
VALIDITY_R2 = 0.95
MIN_SUBTRACE_S = 300.0


@dataclass(frozen=True, eq=False)
class ChargeSessionLog:
    trace: VoltageTrace
    full_charge_voltage: float
    model_name: str = "generic"
    i_cutoff_ma: Optional[float] = None

    def __post_init__(self):
        if len(self.trace) == 0:
            raise ValueError("session log is empty")
        if not 3.9 < self.full_charge_voltage < 4.5:
            raise ValueError(f"full_charge_voltage {self.full_charge_voltage} outside (3.9, 4.5)")


@dataclass(frozen=True, eq=False)
class RelaxSubTrace:
    trace: VoltageTrace  # time re-zeroed
    fit: PowerFit
    origin: Tuple[float, float]  # (start_s, end_s) in session time
    recovered: bool = False
    start_index: int = 0
    stop_index: int = 0  # exclusive

    def to_dict(self):
        return {"origin": list(self.origin), "start_index": self.start_index, "stop_index": self.stop_index,
                "n_samples": len(self.trace), "recovered": self.recovered, "fit": self.fit.to_dict()}


def detect_full_charge(log: ChargeSessionLog, hold_s: float = HOLD_S) -> int:
    """Index of the first sample from which ``v >= V_full - 5 mV`` holds for ``hold_s``.

    With a current channel and a known cutoff the index is advanced, within
    that high-voltage run, to the first sample whose current is at or below
    the cutoff (the end of the CV phase).
    """
    tr = log.trace
    high = tr.v >= log.full_charge_voltage - FULL_TOLERANCE_V
    n = len(tr)
    k = 0
    while k < n:
        if not high[k]:
            k += 1
            continue
        j = k
        while j < n and high[j]:
            j += 1
        # run is [k, j)
        if tr.t[j - 1] - tr.t[k] >= hold_s - 1e-9:
            if tr.i is None or log.i_cutoff_ma is None:
                return k
            ok = np.nonzero(tr.i[k:j] <= log.i_cutoff_ma + 1e-9)[0]
            if len(ok):
                return k + int(ok[0])
        k = j
    raise NotFullyChargedError(
        f"voltage never held within {FULL_TOLERANCE_V * 1e3:g} mV of {log.full_charge_voltage:g} V for {hold_s:g} s")


def delta_signal(trace: VoltageTrace) -> np.ndarray:
    if len(trace) < 2:
        raise ValueError("delta needs at least 2 samples")
    return np.diff(trace.v)


def low_pass(signal, alpha: float = ALPHA) -> np.ndarray:
    """Exponential moving average, ``y[0] = x[0]``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    x = np.asarray(signal, dtype=float)
    if x.size == 0:
        raise ValueError("empty signal")
    y = np.empty_like(x)
    y[0] = x[0]
    for k in range(1, len(x)):
        y[k] = alpha * x[k] + (1 - alpha) * y[k - 1]
    return y


def trigger_indices(v, spike_mv: float = SPIKE_MV, alpha: float = ALPHA) -> List[int]:
    """Sample indices where a trickle charge starts.

    A trigger is an upward crossing of the filtered delta above the spike
    threshold; the returned index is the sample that jumped.
    """
    v = np.asarray(v, dtype=float)
    if len(v) < 2:
        return []
    f = low_pass(np.diff(v), alpha)
    above = f > spike_mv / 1000.0
    rises = np.nonzero(above & ~np.concatenate([[False], above[:-1]]))[0]
    return [int(j) + 1 for j in rises]


def _relax_start(v, lo, hi, v_full, spike_v):
    """Last sample of the charge plateau in ``v[lo:hi]``."""
    w = v[lo:hi]
    plateau = w[w >= v_full - spike_v]
    level = float(np.median(plateau)) if len(plateau) else float(w.max())
    idx = np.nonzero(w >= level - spike_v / 2)[0]
    return lo + int(idx[-1]) if len(idx) else lo


def segment_subtraces(log: ChargeSessionLog, spike_mv: float = SPIKE_MV, alpha: float = ALPHA,
                      validity_r2: float = VALIDITY_R2, hold_s: float = HOLD_S) -> List[RelaxSubTrace]:
    """Cut the post-full-charge region into valid relaxation sub-traces.

    Each window between trickle starts begins with a charge plateau; the
    relaxation starts at the plateau's last sample and runs up to (not
    including) the next trickle start, or to the end of the log.
    """
    tr = log.trace
    full = detect_full_charge(log, hold_s)
    v = tr.v
    trig = [full + q for q in trigger_indices(v[full:], spike_mv, alpha)]
    bounds = [full] + trig + [len(tr)]
    spike_v = spike_mv / 1000.0
    out = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi - lo < MIN_FIT_SAMPLES:
            continue
        start = _relax_start(v, lo, hi, log.full_charge_voltage, spike_v)
        if hi - start < MIN_FIT_SAMPLES:
            continue
        sub = tr.slice(start, hi, rezero=True)
        try:
            fit = fit_power(sub)
        except FitError:
            continue
        if fit.r_squared < validity_r2:
            continue
        out.append(RelaxSubTrace(sub, fit, (float(tr.t[start]), float(tr.t[hi - 1])),
                                 start_index=start, stop_index=hi))
    return out


def recover_trace(sub: RelaxSubTrace, duration_s: float = 1800.0, interval_s: float = 1.0,
                  min_subtrace_s: float = MIN_SUBTRACE_S) -> RelaxSubTrace:
    """Place the sub-trace on the grid, extrapolating past its end with the power fit.

    Grid points inside the measured span are linearly interpolated from
    measurements, so a sub-trace already on the grid comes back unchanged.
    """
    span = sub.trace.duration
    if span < min_subtrace_s - 1e-9:
        raise TooShortError(f"sub-trace spans {span:g} s, need {min_subtrace_s:g} s")
    grid = grid_times(duration_s, interval_s)
    t = sub.trace.t - sub.trace.t[0]
    inside = grid <= t[-1] + 1e-9
    v = np.empty_like(grid)
    v[inside] = np.interp(grid[inside], t, sub.trace.v)
    v[~inside] = eval_power(sub.fit, grid[~inside])
    return replace(sub, trace=VoltageTrace(grid, v, sample_interval=interval_s), recovered=True)
