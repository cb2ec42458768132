"""Downstream uses of SoH: compensated SoC, runtime, anomalies, resistance, ranking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .estimator import EstimateHistory
from .session import RelaxSubTrace
from .trace import BatterySpec

DROP_THRESHOLD = 0.02


@dataclass(frozen=True)
class SocResult:
    soc: float
    clamped: bool


def compensated_soc(c_remaining_mah: float, soh: float, spec: BatterySpec) -> SocResult:
    """Remaining charge over the SoH-adjusted full capacity, clamped to [0, 1]."""
    if soh <= 0:
        raise ValueError("soh must be positive")
    soc = c_remaining_mah / (soh * spec.design_capacity_mah)
    out = min(max(soc, 0.0), 1.0)
    return SocResult(out, out != soc)


def remaining_time(c_remaining_mah: float, soh: float, spec: BatterySpec, avg_current_ma: float) -> float:
    """Minutes of operation left at ``avg_current_ma``.

    The usable charge is the compensated SoC times the degraded full capacity,
    so remaining charge beyond that capacity is not counted.
    """
    if avg_current_ma <= 0:
        raise ValueError("average current must be positive")
    soc = compensated_soc(c_remaining_mah, soh, spec).soc
    usable = soc * soh * spec.design_capacity_mah
    return 60.0 * usable / avg_current_ma


@dataclass(frozen=True)
class AnomalyFlag:
    index: int  # position of the later estimate of the pair
    session_id: str
    drop: float


def detect_abnormal_drop(history: EstimateHistory, drop_threshold: float = DROP_THRESHOLD,
                         field: str = "smoothed") -> List[AnomalyFlag]:
    """Flag consecutive estimates falling by strictly more than the threshold.

    A drop equal to the threshold up to float rounding (1e-9) is not flagged.
    ``field="raw"`` looks at raw estimates instead: the trailing-line
    smoother spreads a sudden step over several sessions, so a 5% step
    appears as drops of under 2% each in the smoothed series.
    """
    if len(history) < 2:
        raise ValueError("need at least 2 estimates")
    if field not in ("smoothed", "raw"):
        raise ValueError("field must be 'smoothed' or 'raw'")
    sm = history.smoothed if field == "smoothed" else history.raw
    ests = history.estimates
    return [AnomalyFlag(k, ests[k].session_id, float(sm[k - 1] - sm[k]))
            for k in range(1, len(sm)) if sm[k - 1] - sm[k] > drop_threshold + 1e-9]


@dataclass(frozen=True)
class ResistanceEstimate:
    r_mohm: float
    dv: float  # volts
    di: float  # amps
    at_relax_s: float
    valid: bool  # False when the drop is not positive (noise)


def estimate_resistance(relax: RelaxSubTrace, i_before_ma: float, at_relax_s: float = 1.0) -> ResistanceEstimate:
    """Ohmic resistance from the measured voltage step ``at_relax_s`` into rest."""
    if i_before_ma <= 0:
        raise ValueError("current before rest must be positive")
    tr = relax.trace
    t = tr.t - tr.t[0]
    hit = np.nonzero(np.isclose(t, at_relax_s, atol=1e-9))[0]
    if len(hit) == 0:
        raise ValueError(f"no measured sample at {at_relax_s:g} s")
    dv = float(tr.v[0] - tr.v[hit[0]])
    di = i_before_ma / 1000.0
    return ResistanceEstimate(dv / di * 1000.0, dv, di, at_relax_s, dv > 0)


def percentile_rank(my_soh: float, population) -> float:
    """Percentage of the population strictly below ``my_soh``."""
    pop = np.asarray(population, dtype=float)
    if pop.size == 0:
        raise ValueError("population is empty")
    return 100.0 * float(np.count_nonzero(pop < my_soh)) / pop.size
