import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sohprint.preprocessing import CycleDataset
from sohprint.simulator import preset, rng_for, simulate_campaign
from sohprint.trace import BatterySpec, CycleRecord, VoltageTrace


def power_trace(a=0.05, b=-0.5, c=4.25, n=1800, sigma=0.0, seed=0, with_current=False):
    t = np.arange(n, dtype=float)
    v = a * (t + 1) ** b + c
    if sigma:
        v = v + sigma * np.random.default_rng(seed).standard_normal(n)
    return VoltageTrace(t, v, i=np.zeros(n) if with_current else None)


def linear_dataset(n=40, slope=-0.001, start=1.0, n_t=60, spec=None):
    """Cycles whose labels fall on an exact line and whose traces are clean power laws."""
    recs = []
    for k in range(n):
        s = start + slope * k
        tr = power_trace(a=0.05 + 0.1 * (1 - s), b=-0.3, c=4.1, n=n_t)
        recs.append(CycleRecord(tr, s, k))
    return CycleDataset(tuple(recs), spec or BatterySpec(2200, "test"))


def holdout_split(ds, frac=0.2, seed=0):
    idx = np.array(ds.indices)
    perm = rng_for(seed, 99).permutation(len(idx))
    n_test = int(round(frac * len(idx)))
    test = set(idx[perm[:n_test]].tolist())
    return ds.subset(set(idx.tolist()) - test), ds.subset(test)


@pytest.fixture(scope="session")
def s3_campaign():
    return simulate_campaign(preset("galaxy-s3", seed=7, outlier_rate=0.05), 300)


@pytest.fixture(scope="session")
def s3_clean():
    return simulate_campaign(preset("galaxy-s3", seed=11), 120)
