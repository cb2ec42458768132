import numpy as np
import pytest

from sohprint.baselines import (BaselineModel, anchor_voltage, baseline_fit, baseline_predict, bonds_fit,
                                casals_fit, vbash_fit)
from sohprint.errors import FitError
from sohprint.preprocessing import CycleDataset
from sohprint.simulator import preset, simulate_campaign
from sohprint.trace import BatterySpec, CycleRecord

from conftest import power_trace

SPEC = BatterySpec(2200, "test")


def ds_from(traces, sohs):
    return CycleDataset(tuple(CycleRecord(t, s, k) for k, (t, s) in enumerate(zip(traces, sohs))), SPEC)


def test_casals_two_points_exact():
    trs = [power_trace(c=4.10), power_trace(c=4.15)]
    m = casals_fit(ds_from(trs, [0.8, 0.9]))
    assert baseline_predict(m, trs[0]).soh == pytest.approx(0.8, abs=1e-9)
    assert baseline_predict(m, trs[1]).soh == pytest.approx(0.9, abs=1e-9)


def test_bonds_three_points_exact():
    trs = [power_trace(c=c) for c in (4.10, 4.12, 4.17)]
    m = bonds_fit(ds_from(trs, [0.8, 0.9, 0.93]))
    for tr, s in zip(trs, [0.8, 0.9, 0.93]):
        assert baseline_predict(m, tr).soh == pytest.approx(s, abs=1e-8)


def test_bonds_resubstitution_residual_is_ols():
    rng = np.random.default_rng(0)
    cs = 4.1 + 0.05 * rng.uniform(size=20)
    s = 0.8 + 0.1 * rng.uniform(size=20)
    trs = [power_trace(c=c, n=1800) for c in cs]
    m = bonds_fit(ds_from(trs, s))
    x = np.array([anchor_voltage(t, 1800.0)[0] for t in trs])
    A = np.column_stack([x ** 2, x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, s, rcond=None)
    ours = np.array([baseline_predict(m, t).soh for t in trs])
    assert np.allclose(ours - s, A @ coef - s, atol=1e-7)


def test_vbash_two_cycles_and_planted_line():
    trs = [power_trace(b=-0.3), power_trace(b=-0.5)]
    m = vbash_fit(ds_from(trs, [0.9, 0.8]))
    # line through (b=-0.3, 0.9) and (b=-0.5, 0.8): SoH = 0.5 b + 1.05
    assert m.coefficients == pytest.approx((0.5, 1.05), rel=1e-6)
    assert baseline_predict(m, power_trace(b=-0.4)).soh == pytest.approx(0.85, abs=1e-6)


def test_anchor_paths():
    full = power_trace()
    assert anchor_voltage(full, 300.0)[1] == "measured"
    short = power_trace(n=200)
    v, path = anchor_voltage(short, 300.0)
    assert path == "recovered"
    assert v == pytest.approx(0.05 * 301 ** -0.5 + 4.25, abs=1e-9)
    with pytest.raises(FitError):
        anchor_voltage(power_trace(n=5), 300.0)


def test_casals_ignores_non_anchor_samples():
    trs = [power_trace(c=4.10), power_trace(c=4.15)]
    m = casals_fit(ds_from(trs, [0.8, 0.9]))
    probe = power_trace(c=4.12)
    v = probe.v.copy()
    v[:300] += 0.01
    v[301:] -= 0.02
    assert baseline_predict(m, probe).soh == baseline_predict(m, probe.with_voltage(v)).soh


def test_model_validation():
    with pytest.raises(ValueError):
        BaselineModel("bonds", (1.0, 2.0), 0, 1, 2)
    with pytest.raises(ValueError):
        baseline_fit("nope", ds_from([power_trace()] * 2, [0.9, 0.8]))


def test_deterministic_on_simulator():
    ds = simulate_campaign(preset("galaxy-s3", seed=3), 40).dataset()
    for kind in ("casals", "bonds", "vbash"):
        assert baseline_fit(kind, ds) == baseline_fit(kind, ds)
