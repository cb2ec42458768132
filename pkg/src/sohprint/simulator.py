"""Phenomenological battery cycler with exact ground truth.

The model reproduces observed functional forms rather than cell physics.

Relaxation after a full CCCV charge, for ``t >= 1`` s::

    v(t) = V_full - I_cut * R(S) - D(t; S)
    D(t; S) = a_f * (2^b_f - (t+1)^b_f) + (1 - S) * a_d * (2^b_d - (t+1)^b_d)

and ``v(0) = V_full`` (the last CV sample). ``D`` is zero at ``t = 1`` so the
1 s drop is purely ohmic, and the drop at any fixed time is exactly linear
in SoH ``S`` before noise. ``R(S)`` grows linearly as the cell fades.

Randomness comes from numpy's PCG64 generator seeded through
``SeedSequence((seed, cycle_index, stream))``, so each cycle is reproducible
on its own and independent of how many other cycles were drawn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .preprocessing import CycleDataset
from .trace import BatterySpec, ChargeProfile, CycleRecord, VoltageTrace

_STREAM_CELL = 0xCE11
_STREAM_CYCLE = 1
_STREAM_OUTLIER = 2
_STREAM_SESSION = 3


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True)
class RelaxLaw:
    """Two power-law terms: one present in every cell, one growing with fade."""

    a_fresh: float = 0.10
    b_fresh: float = -0.12
    a_fade: float = 0.30
    b_fade: float = -0.08
    # relative change of a_fresh per unit of charge C-rate away from 0.5C
    profile_gain: float = 0.05

    def __post_init__(self):
        if not (self.b_fresh < 0 and self.b_fade < 0):
            raise ValueError("relaxation exponents must be negative")
        if self.a_fresh < 0 or self.a_fade < 0:
            raise ValueError("relaxation amplitudes must be non-negative")

    def drop(self, t, soh: float, a_fresh: Optional[float] = None):
        """Polarisation drop ``D(t; S)``; zero for ``t <= 1``."""
        t = np.maximum(np.asarray(t, dtype=float), 1.0)
        af = self.a_fresh if a_fresh is None else a_fresh
        fresh = af * (2.0 ** self.b_fresh - (t + 1.0) ** self.b_fresh)
        fade = (1.0 - soh) * self.a_fade * (2.0 ** self.b_fade - (t + 1.0) ** self.b_fade)
        return fresh + fade


@dataclass(frozen=True)
class TrickleConfig:
    trigger_drop_mv: float = 40.0
    recharge_s: int = 60
    # each trickle shortens the following polarisation tail by this factor
    decay: float = 0.85
    # slow extra drop from the phone's own load while the charger idles,
    # logarithmic in time so that trickle gaps keep growing
    load_mv_per_decade: float = 4.0


@dataclass(frozen=True)
class SimBatteryConfig:
    spec: BatterySpec = field(default_factory=lambda: BatterySpec(2200.0, "galaxy-s3"))
    profile: ChargeProfile = field(default_factory=ChargeProfile)
    fade_per_cycle: float = 0.001
    relax_law: RelaxLaw = field(default_factory=RelaxLaw)
    internal_resistance_mohm: float = 58.0
    resistance_growth_mohm: float = 33.0  # per unit of SoH lost
    noise_sigma_v: float = 0.0005
    soh_label_sigma: float = 0.0005
    cell_variation: float = 0.01
    trickle: Optional[TrickleConfig] = None
    outlier_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.fade_per_cycle < 0:
            raise ValueError("fade_per_cycle must be >= 0")
        if self.noise_sigma_v < 0 or self.soh_label_sigma < 0:
            raise ValueError("noise levels must be >= 0")
        if not 0 <= self.outlier_rate <= 1:
            raise ValueError("outlier_rate must be in [0, 1]")

    def resistance_ohm(self, soh: float) -> float:
        return (self.internal_resistance_mohm + self.resistance_growth_mohm * (1.0 - soh)) / 1000.0

    def to_dict(self):
        from dataclasses import asdict
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["spec"] = BatterySpec(**d["spec"])
        d["profile"] = ChargeProfile(**d["profile"])
        d["relax_law"] = RelaxLaw(**d["relax_law"])
        if d.get("trickle") is not None:
            d["trickle"] = TrickleConfig(**d["trickle"])
        return cls(**d)


def _profile(v_full, cutoff=3.3, i_cc=0.5):
    return ChargeProfile(i_cc=i_cc, v_full=v_full, i_cutoff=0.05, v_discharge_cutoff=cutoff)


# capacity and per-cycle profile of each lab-cycled phone battery
PRESETS = {
    "nexus-6p": (BatterySpec(3450.0, "nexus-6p"), _profile(4.35)),
    "nexus-5x": (BatterySpec(2700.0, "nexus-5x"), _profile(4.35)),
    "nexus-s": (BatterySpec(1500.0, "nexus-s"), _profile(4.20, 3.2)),
    "xperia-z5": (BatterySpec(2900.0, "xperia-z5"), _profile(4.20, 3.2)),
    "iphone-6-plus": (BatterySpec(2900.0, "iphone-6-plus"), _profile(4.35)),
    "galaxy-note-2": (BatterySpec(3100.0, "galaxy-note-2"), _profile(4.20, 3.2)),
    "galaxy-s5": (BatterySpec(2800.0, "galaxy-s5"), _profile(4.35)),
    "galaxy-s4": (BatterySpec(2600.0, "galaxy-s4"), _profile(4.20, 3.0)),
    "galaxy-s3": (BatterySpec(2200.0, "galaxy-s3"), _profile(4.20)),
    "galaxy-s3-025c": (BatterySpec(2200.0, "galaxy-s3"), _profile(4.20, i_cc=0.25)),
}


def preset(name: str, **overrides) -> SimBatteryConfig:
    try:
        spec, profile = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(SimBatteryConfig(spec=spec, profile=profile), **overrides)


@dataclass(frozen=True)
class CellParams:
    a_fresh: float
    a_fade: float
    r_scale: float


def cell_params(config: SimBatteryConfig) -> CellParams:
    """Per-cell manufacturing spread, fixed by the seed."""
    rng = rng_for(config.seed, _STREAM_CELL)
    f = 1.0 + config.cell_variation * rng.standard_normal(3)
    law = config.relax_law
    gain = 1.0 + law.profile_gain * (config.profile.i_cc - 0.5)
    return CellParams(law.a_fresh * f[0] * gain, law.a_fade * f[1], f[2])


@dataclass
class CycleTruth:
    cycle_index: int
    true_soh: float
    resistance_ohm: float
    outlier: Optional[str] = None  # None | "soh" | "trace"
    discharge: Optional[VoltageTrace] = None
    charge: Optional[VoltageTrace] = None


def true_soh(config: SimBatteryConfig, cycle_index: int) -> float:
    return max(0.0, 1.0 - config.fade_per_cycle * cycle_index)


def clean_relaxation(config: SimBatteryConfig, soh: float, n: int, cell: Optional[CellParams] = None,
                     scale: float = 1.0, load_v_per_decade: float = 0.0, i_cut_ma: Optional[float] = None):
    """Noise-free rest voltage for samples ``t = 0 .. n-1``."""
    cell = cell or cell_params(config)
    t = np.arange(n, dtype=float)
    v_full = config.profile.v_full
    if i_cut_ma is None:
        i_cut_ma = config.profile.i_cutoff * config.spec.design_capacity_mah
    r = config.resistance_ohm(soh) * cell.r_scale
    law = replace(config.relax_law, a_fade=cell.a_fade)
    load = load_v_per_decade * np.log10(np.maximum(t + 1.0, 2.0) / 2.0)
    v = v_full - i_cut_ma / 1000.0 * r - scale * law.drop(t, soh, cell.a_fresh) - load
    v[0] = v_full
    return v


def _ocv(soc, v_full, v_cut):
    soc = np.clip(soc, 0.0, 1.0)
    return v_cut + (v_full - 0.03 - v_cut) * (0.15 + 0.85 * soc ** 0.6)


def _discharge_trace(config, soh, r):
    c = config.spec.design_capacity_mah
    i_ma = config.profile.i_discharge * c
    end = soh * c / i_ma * 3600.0
    t = np.arange(0.0, end, 1.0)
    if end - t[-1] > 1e-9:
        t = np.append(t, end)
    soc = 1.0 - t / end
    v = _ocv(soc, config.profile.v_full, config.profile.v_discharge_cutoff) - i_ma / 1000.0 * r
    v = np.clip(v, config.profile.v_discharge_cutoff, None)
    return VoltageTrace(t, v, i=np.full_like(t, -i_ma))


def _charge_trace(config, soh, r, start_soc=0.0):
    """CC ramp to V_full then CV with exponentially decaying current."""
    p, c = config.profile, config.spec.design_capacity_mah
    i_cc, i_cut = p.i_cc * c, p.i_cutoff * c
    cap = soh * c
    cv_share = 0.15
    t_cc = max(1, int(round((1.0 - cv_share - start_soc) * cap / i_cc * 3600.0)))
    tau = cv_share * cap * 3600.0 / (i_cc - i_cut)
    t_cv = max(1, int(round(tau * math.log(i_cc / i_cut))))
    v_start = _ocv(start_soc, p.v_full, p.v_discharge_cutoff) + i_cc / 1000.0 * r
    ramp = np.linspace(0.0, 1.0, t_cc, endpoint=False)
    v_cc = v_start + (p.v_full - v_start) * ramp ** 0.5
    i_cv = i_cc * np.exp(-np.arange(1, t_cv + 1) / tau)
    i_cv[-1] = i_cut
    v = np.concatenate([v_cc, np.full(t_cv, p.v_full)])
    i = np.concatenate([np.full(t_cc, i_cc), i_cv])
    return VoltageTrace(np.arange(len(v), dtype=float), v, i=i)


def simulate_cycle(config: SimBatteryConfig, cycle_index: int, full: bool = False):
    """One charge/rest/discharge cycle; returns ``(CycleRecord, CycleTruth)``.

    ``full=True`` also attaches the charge and discharge traces to the truth.
    """
    cell = cell_params(config)
    soh = true_soh(config, cycle_index)
    r = config.resistance_ohm(soh) * cell.r_scale
    n = int(round(config.profile.rest_minutes * 60))
    rng = rng_for(config.seed, _STREAM_CYCLE, cycle_index)
    noise = config.noise_sigma_v * rng.standard_normal(n)
    label = soh + config.soh_label_sigma * rng.standard_normal()

    v = clean_relaxation(config, soh, n, cell)
    outlier = None
    if config.outlier_rate > 0:
        orng = rng_for(config.seed, _STREAM_OUTLIER, cycle_index)
        if orng.random() < config.outlier_rate:
            if orng.random() < 0.5:
                outlier = "soh"
                label += orng.choice([-1.0, 1.0]) * orng.uniform(0.01, 0.03)
            else:
                outlier = "trace"
                # straight-line decay to the same end point: not a power law
                t = np.arange(n, dtype=float)
                v = v[0] - (v[0] - v[-1]) * t / t[-1]
    v = v + noise
    i_cut = config.profile.i_cutoff * config.spec.design_capacity_mah
    cur = np.zeros(n)
    cur[0] = i_cut
    trace = VoltageTrace(np.arange(n, dtype=float), v, i=cur)
    rec = CycleRecord(trace, float(np.clip(label, 0.0, 1.2)), cycle_index, config.profile)
    truth = CycleTruth(cycle_index, soh, r, outlier)
    if full:
        truth.discharge = _discharge_trace(config, soh, r)
        truth.charge = _charge_trace(config, soh, r)
    return rec, truth


@dataclass
class SimCampaign:
    config: SimBatteryConfig
    records: List[CycleRecord]
    truths: List[CycleTruth]

    @property
    def n_cycles(self):
        return len(self.records)

    @property
    def true_soh(self):
        return np.array([t.true_soh for t in self.truths])

    @property
    def outlier_indices(self):
        return [t.cycle_index for t in self.truths if t.outlier]

    def dataset(self) -> CycleDataset:
        return CycleDataset(tuple(self.records), self.config.spec)

    def truth_dict(self):
        return {
            "config": self.config.to_dict(),
            "cycles": [{"cycle_index": t.cycle_index, "true_soh": t.true_soh,
                        "resistance_ohm": t.resistance_ohm, "outlier": t.outlier} for t in self.truths],
            "outlier_indices": self.outlier_indices,
        }


def simulate_campaign(config: SimBatteryConfig, n_cycles: int, start_cycle: int = 0) -> SimCampaign:
    recs, truths = [], []
    for k in range(start_cycle, start_cycle + n_cycles):
        rec, tr = simulate_cycle(config, k)
        recs.append(rec)
        truths.append(tr)
    return SimCampaign(config, recs, truths)


# ---------------------------------------------------------------- sessions


@dataclass
class SessionTruth:
    soh: float
    v_full: float
    full_charge_index: int  # first CV sample
    cv_end_index: int  # last CV sample; the first relaxation starts here
    trigger_indices: List[int] = field(default_factory=list)  # first sample of each trickle
    relax_starts: List[int] = field(default_factory=list)

    def to_dict(self):
        from dataclasses import asdict
        return asdict(self)


def simulate_overnight_session(config: SimBatteryConfig, soh: float, with_trickle: bool = False,
                               duration_h: float = 8.0, seed: Optional[int] = None,
                               start_soc: float = 0.3, v_full: Optional[float] = None,
                               noise_sigma_v: Optional[float] = None, with_current: bool = False):
    """Charge from ``start_soc`` to full, then rest (optionally with trickle) until unplug.

    ``v_full`` overrides the charger's full voltage to mimic a device whose
    level differs from the lab profile. Returns ``(ChargeSessionLog, SessionTruth)``.
    """
    from .session import ChargeSessionLog

    if duration_h < 1:
        raise ValueError("duration_h must be >= 1")
    if with_trickle and config.trickle is None:
        raise ValueError("with_trickle requires config.trickle")
    vf = config.profile.v_full if v_full is None else v_full
    cfg = replace(config, profile=replace(config.profile, v_full=vf))
    cell = cell_params(cfg)
    r = cfg.resistance_ohm(soh) * cell.r_scale
    n = int(round(duration_h * 3600))
    i_cut = cfg.profile.i_cutoff * cfg.spec.design_capacity_mah
    sigma = cfg.noise_sigma_v if noise_sigma_v is None else noise_sigma_v
    rng = rng_for(cfg.seed if seed is None else seed, _STREAM_SESSION, int(round(soh * 1e6)))

    charge = _charge_trace(cfg, soh, r, start_soc)
    v = np.empty(n)
    cur = np.zeros(n)
    m = min(len(charge), n)
    v[:m], cur[:m] = charge.v[:m], charge.i[:m]
    cv_end = len(charge) - 1
    full_idx = int(np.argmax(charge.v >= vf))
    if cv_end >= n - 1:
        raise ValueError("session too short to reach full charge")
    truth = SessionTruth(soh, vf, full_idx, cv_end)

    start, k = cv_end, 0
    trig = cfg.trickle
    while start < n - 1:
        length = n - start
        scale = trig.decay ** k if with_trickle else 1.0
        load = trig.load_mv_per_decade / 1000.0 if with_trickle else 0.0
        seg = clean_relaxation(cfg, soh, length, cell, scale=scale, load_v_per_decade=load)
        stop = n
        if with_trickle:
            fired = np.nonzero(vf - seg >= trig.trigger_drop_mv / 1000.0)[0]
            if len(fired):
                stop = start + int(fired[0])
        truth.relax_starts.append(start)
        v[start + 1:stop] = seg[1:stop - start]
        if stop >= n:
            break
        truth.trigger_indices.append(stop)
        hold_end = min(n, stop + trig.recharge_s)
        v[stop:hold_end] = vf
        cur[stop:hold_end] = i_cut
        start = hold_end - 1
        k += 1
        if hold_end >= n:
            break

    v = v + sigma * rng.standard_normal(n)
    trace = VoltageTrace(np.arange(n, dtype=float), v, i=cur if with_current else None)
    log = ChargeSessionLog(trace, vf, cfg.spec.model_name, i_cutoff_ma=i_cut if with_current else None)
    return log, truth
