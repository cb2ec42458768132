from dataclasses import replace

import numpy as np
import pytest

from sohprint.preprocessing import (CycleDataset, FilterReport, apply_filters, filter_soh_outliers,
                                    filter_trace_outliers, merge_reports, moving_average, preprocess)
from sohprint.trace import VoltageTrace

from conftest import linear_dataset, power_trace


def perturb(ds, idx, **changes):
    recs = tuple(replace(r, **changes) if r.cycle_index == idx else r for r in ds)
    return CycleDataset(recs, ds.spec)


def test_linear_labels_flag_nothing():
    assert filter_soh_outliers(linear_dataset()).removed == {}


def test_planted_soh_outlier():
    ds = linear_dataset()
    bad = perturb(ds, 17, soh=ds.records[17].soh + 0.01)
    assert filter_soh_outliers(bad).removed == {17: "soh_outlier"}


def test_soh_filter_needs_ten():
    with pytest.raises(ValueError):
        filter_soh_outliers(linear_dataset(n=9))


def test_quota_on_identical_traces():
    tr = power_trace(n=60)
    ds = CycleDataset(tuple(replace(r, relax_trace=tr) for r in linear_dataset(n=100)), linear_dataset().spec)
    assert len(filter_trace_outliers(ds).removed) == 5


def test_linear_trace_is_flagged():
    ds = linear_dataset(n=100)
    rng = np.random.default_rng(0)
    noisy = tuple(replace(r, relax_trace=r.relax_trace.with_voltage(r.relax_trace.v + 2e-4 * rng.standard_normal(60)))
                  for r in ds)
    ds = CycleDataset(noisy, ds.spec)
    line = VoltageTrace(np.arange(60.0), 4.2 - 0.001 * np.arange(60.0))
    bad = perturb(ds, 42, relax_trace=line)
    assert 42 in filter_trace_outliers(bad).removed


def test_trace_filter_needs_twenty():
    with pytest.raises(ValueError):
        filter_trace_outliers(linear_dataset(n=19))


def test_unfittable_trace_flagged():
    ds = linear_dataset(n=40)
    short = VoltageTrace(np.arange(5.0), [4.2, 4.19, 4.18, 4.17, 4.16])
    rep = filter_trace_outliers(perturb(ds, 3, relax_trace=short))
    assert 3 in rep.removed and len(rep.removed) == 2


def test_apply_filters():
    ds = linear_dataset()
    assert apply_filters(ds).indices == ds.indices
    a = FilterReport({1: "soh_outlier", 2: "soh_outlier"})
    b = FilterReport({2: "trace_outlier", 5: "trace_outlier"})
    out = apply_filters(ds, a, b)
    assert len(out) == len(ds) - 3
    kept = {r.cycle_index: r for r in out}
    orig = {r.cycle_index: r for r in ds}
    assert all(kept[k] is orig[k] for k in kept)
    assert merge_reports(a, b).removed[2] == "paired_removal"


def test_filters_idempotent_on_planted_outliers():
    ds = perturb(linear_dataset(), 11, soh=linear_dataset().records[11].soh - 0.02)
    once = apply_filters(ds, filter_soh_outliers(ds))
    assert filter_soh_outliers(once).removed == {}


def test_moving_average():
    x = np.random.default_rng(1).normal(size=20)
    assert np.array_equal(moving_average(x, 1), x)
    assert moving_average([1, 2, 3, 4, 5], 3).tolist() == pytest.approx([1.5, 2, 3, 4, 4.5])
    assert moving_average([1, 2, 3, 4, 5], 5).tolist() == pytest.approx([2, 2.5, 3, 3.5, 4])
    with pytest.raises(ValueError):
        moving_average(x, 4)
    assert np.array_equal(moving_average(np.full(9, 0.7), 5), np.full(9, 0.7))


def test_moving_average_reduces_noise_variance():
    x = np.random.default_rng(5).normal(size=1000)
    assert np.var(moving_average(x, 5)) < np.var(x)


def test_moving_average_columns():
    m = np.arange(12.0).reshape(6, 2)
    out = moving_average(m, 3)
    assert np.allclose(out[:, 0], moving_average(m[:, 0], 3))


def test_preprocess_recovers_planted_outliers(s3_campaign):
    kept, report = preprocess(s3_campaign.dataset())
    planted = set(s3_campaign.outlier_indices)
    assert len(planted & report.removed_indices) >= 0.9 * len(planted)
    assert 250 <= len(kept) <= 290
    assert all(len(r.relax_trace) == 1800 for r in kept)
