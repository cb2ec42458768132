"""Evidence that the fingerprint generalises: dimension correlation and DTW."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np


@dataclass
class CorrelationSummary:
    fraction_above: float  # among defined pairs
    threshold: float
    n_pairs: int  # defined pairs i < j
    n_undefined: int
    matrix: Optional[np.ndarray] = None

    def to_dict(self):
        return {"fraction_above": self.fraction_above, "threshold": self.threshold,
                "n_pairs": self.n_pairs, "n_undefined": self.n_undefined}


def dimension_correlation(vectors, threshold: float = 0.8, full: bool = False) -> CorrelationSummary:
    """Pearson correlation between every pair of columns.

    Pairs involving a zero-variance column are undefined (NaN in the matrix)
    and left out of the fraction.
    """
    X = np.asarray(vectors, dtype=float)
    n, d = X.shape
    if n < 3:
        raise ValueError("need at least 3 rows")
    Xc = X - X.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    ok = norms > 0
    Z = np.zeros_like(Xc)
    Z[:, ok] = Xc[:, ok] / norms[ok]
    R = Z.T @ Z
    np.clip(R, -1.0, 1.0, out=R)
    R[~ok, :] = np.nan
    R[:, ~ok] = np.nan
    iu = np.triu_indices(d, 1)
    vals = R[iu]
    defined = ~np.isnan(vals)
    n_def = int(defined.sum())
    frac = float(np.mean(np.abs(vals[defined]) > threshold)) if n_def else 0.0
    return CorrelationSummary(frac, threshold, n_def, len(vals) - n_def, R if full else None)


def dtw_distance(seq_a, seq_b) -> Tuple[float, List[Tuple[int, int]]]:
    """Classic DTW over ``|a_i - b_j|`` with unit steps; ties prefer the diagonal."""
    a = np.asarray(seq_a, dtype=float)
    b = np.asarray(seq_b, dtype=float)
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("sequences must be non-empty")
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    cost = np.abs(a[:, None] - b[None, :])
    for i in range(1, n + 1):
        row, prev = D[i], D[i - 1]
        c = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = c[j - 1] + min(prev[j - 1], prev[j], row[j - 1])
    path = [(n - 1, m - 1)]
    i, j = n, m
    while (i, j) != (1, 1):
        options = []
        if i > 1 and j > 1:
            options.append((D[i - 1, j - 1], i - 1, j - 1))
        if i > 1:
            options.append((D[i - 1, j], i - 1, j))
        if j > 1:
            options.append((D[i, j - 1], i, j - 1))
        # min keeps the first of equal costs, and the diagonal comes first
        _, i, j = min(options, key=lambda o: o[0])
        path.append((i - 1, j - 1))
    path.reverse()
    return float(D[n, m]), path


def path_deviation(path, n: int, m: int) -> float:
    """Largest distance of the path from the straight diagonal, as a fraction of length."""
    if n < 2 or m < 2:
        return 0.0
    return max(abs(i / (n - 1) - j / (m - 1)) for i, j in path)
