import numpy as np
import pytest

from sohprint.errors import FitError
from sohprint.fitting import eval_power, fit_exponential, fit_linear, fit_power, goodness
from sohprint.simulator import preset, simulate_cycle
from sohprint.trace import VoltageTrace

from conftest import power_trace
from oracles import goodness_two_pass, ols_normal_equations, power_fit_search


def test_planted_noiseless_recovery():
    f = fit_power(power_trace(0.05, -0.5, 4.25))
    assert f.a == pytest.approx(0.05, rel=1e-6)
    assert f.b == pytest.approx(-0.5, rel=1e-6)
    assert f.c == pytest.approx(4.25, rel=1e-6)
    assert f.r_squared == pytest.approx(1.0, abs=1e-12)


def test_noisy_fit_matches_search_oracle():
    # oracle: b by grid + golden section, (a, c) in closed form; values frozen
    t = np.arange(1800.0)
    v = 0.05 * (t + 1) ** -0.5 + 4.25 + 0.0005 * np.random.default_rng(2024).standard_normal(1800)
    f = fit_power(VoltageTrace(t, v))
    assert (f.a, f.b, f.c) == pytest.approx((0.0505485884, -0.5032375489, 4.2500111373), rel=1e-6)
    assert (f.a, f.b, f.c) == pytest.approx(power_fit_search(t, v), rel=1e-6)


def test_constant_trace_convention():
    f = fit_power(VoltageTrace(np.arange(20.0), [4.30] * 20))
    assert (f.a, f.b, f.c, f.r_squared) == (0.0, -1.0, 4.30, 1.0)


def test_too_few_samples():
    with pytest.raises(FitError):
        fit_power(power_trace(n=9))


def test_eval_power():
    from sohprint.fitting import PowerFit
    assert eval_power(PowerFit(0.0, -0.7, 4.30, 0, 1), 123.0) == 4.30
    assert eval_power(PowerFit(0.05, -0.5, 4.25, 0, 1), 0.0) == pytest.approx(4.30)


def test_eval_reproduces_rmse():
    tr = power_trace(sigma=0.001, seed=3)
    f = fit_power(tr)
    resid = tr.v - eval_power(f, tr.t)
    assert np.sqrt(np.mean(resid ** 2)) == pytest.approx(f.rmse, rel=1e-12)


def test_offset_equivariance():
    tr = power_trace(sigma=0.0005, seed=5)
    f0 = fit_power(tr)
    f1 = fit_power(tr.with_voltage(tr.v + 0.137))
    assert f1.a == pytest.approx(f0.a, abs=1e-9)
    assert f1.b == pytest.approx(f0.b, abs=1e-9)
    assert f1.c == pytest.approx(f0.c + 0.137, abs=1e-9)


def test_never_worse_than_constant():
    for seed in range(5):
        tr = power_trace(sigma=0.002, seed=seed, n=200)
        assert fit_power(tr).rmse <= np.std(tr.v) + 1e-15


def test_simulator_traces_fit_decaying_curves():
    cfg = preset("galaxy-s3", seed=1)
    for k in (0, 150, 299):
        f = fit_power(simulate_cycle(cfg, k)[0].relax_trace)
        assert f.b < 0 and f.a > 0
        assert f.rmse < 0.0009 and f.r_squared > 0.965


def test_linear_two_points():
    f = fit_linear([0, 1], [1, 3])
    assert (f.slope, f.intercept) == pytest.approx((2, 1))
    assert f.rmse == pytest.approx(0, abs=1e-15)


def test_linear_errors_and_flat():
    with pytest.raises(ValueError):
        fit_linear([1], [1])
    with pytest.raises(ValueError):
        fit_linear([2, 2, 2], [1, 2, 3])
    assert fit_linear([0, 1, 2], [5, 5, 5]).r_squared == 1.0


def test_linear_matches_normal_equations():
    rng = np.random.default_rng(8)
    x, y = rng.normal(size=50), rng.normal(size=50)
    f = fit_linear(x, y)
    assert (f.slope, f.intercept) == pytest.approx(ols_normal_equations(x, y), abs=1e-12)


def test_planted_line_within_three_sigma():
    rng = np.random.default_rng(300)
    x = np.arange(300.0)
    sigma = 0.001
    y = 1.0 - 0.001 * x + sigma * rng.standard_normal(300)
    f = fit_linear(x, y)
    sxx = np.sum((x - x.mean()) ** 2)
    se_slope = sigma / np.sqrt(sxx)
    se_icpt = sigma * np.sqrt(1 / 300 + x.mean() ** 2 / sxx)
    assert abs(f.slope + 0.001) < 3 * se_slope
    assert abs(f.intercept - 1.0) < 3 * se_icpt


def test_degradation_series_fit_linearly():
    # twelve cells, labels at the simulator's calibrated noise level
    for seed in range(12):
        rng = np.random.default_rng(seed)
        n = 300
        x = np.arange(n)
        y = 1.0 - 0.001 * x + 0.0005 * rng.standard_normal(n)
        f = fit_linear(x, y)
        assert f.rmse < 0.00062 and f.r_squared > 0.972


def test_exponential_one_term_recovery():
    t = np.arange(300.0)
    f = fit_exponential(VoltageTrace(t, 4.3 * np.exp(-2e-4 * t)), 1)
    (a, b), = f.terms
    assert a == pytest.approx(4.3, rel=1e-6) and b == pytest.approx(-2e-4, rel=1e-6)


def test_exponential_constant():
    f = fit_exponential(VoltageTrace(np.arange(20.0), [4.2] * 20), 1)
    assert f.terms == ((4.2, 0.0),) and f.r_squared == 1


def test_exponential_loses_to_power_on_simulator():
    cfg = preset("galaxy-s3", seed=2)
    recs = [simulate_cycle(cfg, k)[0].relax_trace for k in range(0, 300, 30)]
    for tr in recs:
        p = fit_power(tr).r_squared
        assert fit_exponential(tr, 1).r_squared < p
        assert fit_exponential(tr, 2).r_squared < p


def test_goodness():
    assert goodness([1, 2, 3], [1, 2, 3]) == (0.0, 1.0)
    # SS_res = SS_tot = 2 here, so R^2 is exactly 0
    assert goodness([0, 2], [1, 1]) == pytest.approx((1.0, 0.0))
    assert goodness([0, 2], [2, 0]) == pytest.approx((2.0, -3.0))
    with pytest.raises(ValueError):
        goodness([1, 2], [1])
    rng = np.random.default_rng(4)
    o, p = rng.normal(size=30), rng.normal(size=30)
    assert goodness(o, p) == pytest.approx(goodness_two_pass(list(o), list(p)), abs=1e-12)
