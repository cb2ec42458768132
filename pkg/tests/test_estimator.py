from dataclasses import replace

import numpy as np
import pytest

from sohprint.errors import NoEstimateError
from sohprint.estimator import (EstimateHistory, SohEstimate, coulomb_count, estimate_session, smooth_history,
                                smooth_values)
from sohprint.fingerprint import train_map
from sohprint.preprocessing import preprocess
from sohprint.session import ChargeSessionLog
from sohprint.simulator import preset, simulate_campaign, simulate_overnight_session
from sohprint.trace import BatterySpec, VoltageTrace

from oracles import piecewise_linear_integral


@pytest.fixture(scope="module")
def model():
    ds, _ = preprocess(simulate_campaign(preset("galaxy-s3", seed=7, outlier_rate=0.05), 300).dataset())
    return train_map(ds)


def test_session_at_85_percent(model):
    log, _ = simulate_overnight_session(preset("galaxy-s3", seed=3), 0.85, seed=3, noise_sigma_v=0.001)
    est = estimate_session(model, log, "night-1")
    assert est.n_subtraces == 1
    assert est.raw == est.predictions[0]
    assert abs(est.raw - 0.85) < 0.02


def test_session_is_deterministic(model):
    log, _ = simulate_overnight_session(preset("galaxy-s3", seed=3), 0.9, seed=8)
    assert estimate_session(model, log) == estimate_session(model, log)


def test_no_estimate(model):
    v = np.concatenate([np.linspace(3.9, 4.2, 100), np.full(200, 4.2)])
    log = ChargeSessionLog(VoltageTrace(np.arange(300.0), v), 4.2)
    with pytest.raises(NoEstimateError):
        estimate_session(model, log)


def hist(values):
    return EstimateHistory([SohEstimate(f"s{k}", v, v, 1, float(k)) for k, v in enumerate(values)])


class StubModel:
    duration_s, interval_s = 1800.0, 1.0

    def __init__(self, values):
        self.values = list(values)

    def predict(self, trace):
        return self.values.pop(0)


def two_piece_session():
    # two rests separated by one recharge pulse, each a clean power law
    t = np.arange(1500.0)
    rest = 4.2 - 0.04 * (1 - (t + 1) ** -0.2)
    v = np.concatenate([np.full(120, 4.2), rest, np.full(60, 4.2), rest])
    return ChargeSessionLog(VoltageTrace(np.arange(len(v), dtype=float), v), 4.2)


def test_raw_is_mean_and_order_free():
    log = two_piece_session()
    a = estimate_session(StubModel([0.90, 0.92]), log)
    b = estimate_session(StubModel([0.92, 0.90]), log)
    assert a.n_subtraces == 2
    assert a.raw == pytest.approx(0.91) and a.raw == b.raw


def test_smoother_constant_and_linear():
    assert np.allclose(smooth_values(np.full(15, 0.93)), 0.93)
    lin = 0.95 - 0.002 * np.arange(25)
    assert np.allclose(smooth_values(lin), lin, atol=1e-12)


def test_smoother_passes_short_prefix_raw():
    raw = np.array([0.9, 0.95, 0.85, 0.9])
    out = smooth_values(raw)
    assert out[:2].tolist() == raw[:2].tolist()
    assert out[2] != raw[2]


def test_smoother_reduces_error_variance():
    rng = np.random.default_rng(42)
    truth = 0.95 - 0.003 * np.arange(30)
    raw = truth + 0.01 * rng.standard_normal(30)
    sm = smooth_values(raw)
    assert np.var(sm - truth) < np.var(raw - truth)


def test_smooth_history_keeps_raw():
    h = hist([0.9, 0.95, 0.85, 0.9, 0.88])
    out = smooth_history(h)
    assert out.raw.tolist() == h.raw.tolist()
    assert out.smoothed[0] == 0.9


def test_history_jsonl_and_order():
    h = hist([0.9, 0.91])
    again = EstimateHistory.from_jsonl(h.to_jsonl())
    assert again.estimates == h.estimates
    with pytest.raises(ValueError):
        h.append(SohEstimate("old", 0.9, 0.9, 1, -1.0))


SPEC = BatterySpec(1000, "bench")


def test_coulomb_constant():
    t = np.arange(3601.0)
    r = coulomb_count(VoltageTrace(t, np.full(3601, 4.0), i=np.full(3601, 1000.0)), 1.0, 0.0, SPEC)
    assert r.delta_c_mah == pytest.approx(1000.0, rel=1e-12)
    assert r.soh == pytest.approx(1.0, rel=1e-12)


def test_coulomb_worked_example():
    t = np.arange(3601.0)
    tr = VoltageTrace(t, np.full(3601, 3.8), i=np.full(3601, -2117.0))
    r = coulomb_count(tr, 1.0, 0.0, BatterySpec(2330, "nexus"))
    assert r.soh == pytest.approx(2117 / 2330, rel=1e-12)
    assert round(r.soh * 100, 1) == 90.9


def test_coulomb_piecewise_linear_exact():
    knots = [(0, 0), (600, 1200), (1800, 1200), (3600, 300)]
    t = np.arange(3601.0)
    i = np.interp(t, *zip(*knots))
    tr = VoltageTrace(t, np.full(3601, 4.0), i=i)
    exact = float(piecewise_linear_integral(knots)) / 3600
    assert exact == 875.0
    r = coulomb_count(tr, 1.0, 0.0, SPEC)
    assert r.delta_c_mah == pytest.approx(exact, rel=1e-9)
    r2 = coulomb_count(replace(tr, i=2 * i), 1.0, 0.0, SPEC)
    assert r2.delta_c_mah == 2 * r.delta_c_mah


def test_coulomb_errors():
    tr = VoltageTrace([0, 1], [4.0, 4.0])
    with pytest.raises(ValueError):
        coulomb_count(tr, 1, 0, SPEC)
    with pytest.raises(ValueError):
        coulomb_count(VoltageTrace([0, 1], [4.0, 4.0], i=[1, 1]), 0.5, 0.5, SPEC)
