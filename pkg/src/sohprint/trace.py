"""Voltage traces, cycle records and the CSV interchange format.

Traces are stored column-wise as read-only numpy arrays. A trace must have
strictly increasing timestamps and no gap larger than twice its nominal
sample interval.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import CoverageError, TraceParseError, TraceValidationError, VoltageRangeError

V_MIN = 2.0
V_MAX = 5.0
MAX_GAP_FACTOR = 2.0

_HEADER_REQUIRED = ("t_s", "v_V")
_HEADER_OPTIONAL = ("i_mA", "temp_C")


class VoltageSample(NamedTuple):
    t: float
    v: float
    i: Optional[float] = None
    temp: Optional[float] = None


def _frozen(a, name):
    if a is None:
        return None
    arr = np.array(a, dtype=float)
    if arr.ndim != 1:
        raise TraceValidationError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VoltageTrace:
    t: np.ndarray
    v: np.ndarray
    i: Optional[np.ndarray] = None
    temp: Optional[np.ndarray] = None
    sample_interval: float = 1.0

    def __post_init__(self):
        for name in ("t", "v", "i", "temp"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name))
        n = len(self.t)
        for name in ("v", "i", "temp"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise TraceValidationError(f"column {name} has {len(col)} values, expected {n}")
        if self.sample_interval <= 0:
            raise TraceValidationError("sample_interval must be positive")
        if n == 0:
            return
        if not np.all(np.isfinite(self.t)) or not np.all(np.isfinite(self.v)):
            raise TraceValidationError("non-finite time or voltage")
        if self.t[0] < 0:
            raise TraceValidationError("timestamps must be non-negative")
        dt = np.diff(self.t)
        if np.any(dt <= 0):
            k = int(np.argmax(dt <= 0)) + 1
            raise TraceValidationError(f"timestamps not strictly increasing at sample {k}")
        if np.any(dt > MAX_GAP_FACTOR * self.sample_interval + 1e-9):
            k = int(np.argmax(dt > MAX_GAP_FACTOR * self.sample_interval + 1e-9)) + 1
            raise TraceValidationError(
                f"gap of {dt[k - 1]:g} s before sample {k} exceeds "
                f"{MAX_GAP_FACTOR:g} x sample interval (discontinuous trace)"
            )

    def __len__(self):
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) else 0.0

    @property
    def has_current(self) -> bool:
        return self.i is not None

    @property
    def samples(self):
        i = self.i if self.i is not None else [None] * len(self)
        temp = self.temp if self.temp is not None else [None] * len(self)
        return [VoltageSample(float(a), float(b), c if c is None else float(c), d if d is None else float(d))
                for a, b, c, d in zip(self.t, self.v, i, temp)]

    def slice(self, start: int, stop: int, rezero: bool = False) -> "VoltageTrace":
        """Sub-trace of samples ``start:stop``, optionally shifted to start at t=0."""
        t = self.t[start:stop]
        if rezero and len(t):
            t = t - t[0]
        return VoltageTrace(
            t=t,
            v=self.v[start:stop],
            i=None if self.i is None else self.i[start:stop],
            temp=None if self.temp is None else self.temp[start:stop],
            sample_interval=self.sample_interval,
        )

    def with_voltage(self, v) -> "VoltageTrace":
        return replace(self, v=v)


@dataclass(frozen=True)
class ChargeProfile:
    """CCCV charge, rest and discharge settings, currents as C-rates."""

    i_cc: float = 0.5
    v_full: float = 4.2
    i_cutoff: float = 0.05
    v_discharge_cutoff: float = 3.3
    rest_minutes: float = 30.0
    i_discharge: float = 0.5

    def __post_init__(self):
        if not 0 < self.i_cutoff < self.i_cc:
            raise ValueError("need 0 < i_cutoff < i_cc")
        if not self.v_discharge_cutoff < self.v_full:
            raise ValueError("discharge cutoff must be below v_full")


@dataclass(frozen=True)
class BatterySpec:
    design_capacity_mah: float
    model_name: str = "generic"

    def __post_init__(self):
        if self.design_capacity_mah <= 0:
            raise ValueError("design capacity must be positive")


@dataclass(frozen=True, eq=False)
class CycleRecord:
    relax_trace: VoltageTrace
    soh: float
    cycle_index: int
    profile: ChargeProfile = field(default_factory=ChargeProfile)
    synthetic: bool = False

    def __post_init__(self):
        if len(self.relax_trace) == 0:
            raise ValueError("relax_trace must be non-empty")
        if not 0.0 <= self.soh <= 1.2:
            raise ValueError(f"soh {self.soh} outside [0, 1.2]")


def parse_trace(raw: str, sample_interval: float = 1.0) -> VoltageTrace:
    """Parse CSV text with header ``t_s,v_V[,i_mA][,temp_C]``."""
    reader = csv.reader(io.StringIO(raw))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise TraceParseError("empty input", line=1) from None
    if tuple(header[:2]) != _HEADER_REQUIRED:
        raise TraceParseError(f"header must start with t_s,v_V, got {','.join(header)}", line=1)
    extra = header[2:]
    if any(h not in _HEADER_OPTIONAL for h in extra) or len(set(extra)) != len(extra):
        raise TraceParseError(f"unknown or repeated columns {extra}", line=1)
    cols = {h: [] for h in header}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise TraceParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        for h, cell in zip(header, row):
            try:
                cols[h].append(float(cell))
            except ValueError:
                raise TraceParseError(f"cannot parse {cell!r} in column {h}", line=lineno) from None
        v = cols["v_V"][-1]
        if not V_MIN < v < V_MAX:
            raise VoltageRangeError(f"line {lineno}: voltage {v:g} V outside ({V_MIN:g}, {V_MAX:g})")
    return VoltageTrace(
        t=cols["t_s"],
        v=cols["v_V"],
        i=cols.get("i_mA"),
        temp=cols.get("temp_C"),
        sample_interval=sample_interval,
    )


def _fmt(x, digits=6):
    s = f"{x:.{digits}g}"
    return "0" if s == "-0" else s


def format_trace(trace: VoltageTrace) -> str:
    """Serialize to the CSV format read by :func:`parse_trace`."""
    header = ["t_s", "v_V"]
    cols = [trace.t, trace.v]
    if trace.i is not None:
        header.append("i_mA")
        cols.append(trace.i)
    if trace.temp is not None:
        header.append("temp_C")
        cols.append(trace.temp)
    lines = [",".join(header)]
    for k in range(len(trace)):
        cells = [_fmt(trace.t[k], 10)] + [_fmt(c[k]) for c in cols[1:]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def dropped_voltage(trace: VoltageTrace) -> VoltageTrace:
    """Voltage drop relative to the first sample, ``v(0) - v(t)``."""
    if len(trace) == 0:
        raise TraceValidationError("dropped_voltage needs a non-empty trace")
    return trace.with_voltage(trace.v[0] - trace.v)


def grid_times(duration_s: float, interval_s: float) -> np.ndarray:
    n = int(round(duration_s / interval_s))
    if n < 1 or abs(n * interval_s - duration_s) > 1e-9 * max(1.0, duration_s):
        raise ValueError("duration must be a positive multiple of the interval")
    return np.arange(n) * interval_s


def resample_to_grid(trace: VoltageTrace, duration_s: float = 1800.0, interval_s: float = 1.0) -> np.ndarray:
    """Linearly interpolate the trace (time re-zeroed) onto a uniform grid.

    The grid has ``duration_s / interval_s`` points starting at t=0.
    """
    grid = grid_times(duration_s, interval_s)
    if len(trace) == 0:
        raise CoverageError("empty trace")
    t = trace.t - trace.t[0]
    if t[-1] < grid[-1] - 1e-9:
        raise CoverageError(f"trace covers {t[-1]:g} s, grid needs {grid[-1]:g} s")
    return np.interp(grid, t, trace.v)
