"""Least-squares fits: power-law relaxation, exponentials and straight lines.

The power model is ``v(t) = a * (t + 1)**b + c`` with ``t`` measured from the
first sample of the trace. The one-second shift keeps the model finite at
t = 0 for negative exponents.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .errors import FitError
from .trace import VoltageTrace

TIME_SHIFT = 1.0
MIN_FIT_SAMPLES = 10
MAX_ITER = 200
XTOL = 1e-10
# exponent is kept strictly negative so fitted relaxations decay
B_MAX = -1e-4


@dataclass(frozen=True)
class PowerFit:
    a: float
    b: float
    c: float
    rmse: float
    r_squared: float

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(d[k]) for k in ("a", "b", "c", "rmse", "r_squared")})


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    rmse: float
    r_squared: float

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ExpFit:
    terms: tuple  # ((amplitude, rate), ...)
    rmse: float
    r_squared: float
    converged: bool = True

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return sum(amp * np.exp(rate * t) for amp, rate in self.terms)

    def to_dict(self):
        return {"terms": [list(p) for p in self.terms], "rmse": self.rmse,
                "r_squared": self.r_squared, "converged": self.converged}


def goodness(observed, predicted):
    """Return ``(rmse, r_squared)`` of ``predicted`` against ``observed``."""
    y = np.asarray(observed, dtype=float)
    f = np.asarray(predicted, dtype=float)
    if y.shape != f.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {f.shape}")
    if y.size == 0:
        raise ValueError("goodness needs at least one value")
    resid = y - f
    ss_res = float(resid @ resid)
    dev = y - y.mean()
    ss_tot = float(dev @ dev)
    rmse = float(np.sqrt(ss_res / y.size))
    if ss_tot == 0.0:
        return rmse, 1.0 if ss_res == 0.0 else 0.0
    return rmse, 1.0 - ss_res / ss_tot


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    p0,
    max_iter: int = MAX_ITER,
    xtol: float = XTOL,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
):
    """Damped Gauss-Newton with Marquardt diagonal scaling.

    Returns ``(params, iterations)``. Raises :class:`FitError` carrying the
    best iterate if the relative parameter change never drops below ``xtol``.
    """
    p = np.array(p0, dtype=float)
    if project is not None:
        p = project(p)
    r = residual(p)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        J = jacobian(p)
        g = J.T @ r
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = 1e-30
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                p_new = p + step
                if project is not None:
                    p_new = project(p_new)
                r_new = residual(p_new)
                cost_new = float(r_new @ r_new)
                if np.isfinite(cost_new) and cost_new <= cost:
                    break
            lam *= 4.0
            if lam > 1e20:
                # no descent direction left at working precision
                return p, it
        delta = p_new - p
        small = np.linalg.norm(delta) <= xtol * (np.linalg.norm(p_new) + xtol)
        stalled = cost - cost_new <= 1e-15 * cost
        p, r, cost = p_new, r_new, cost_new
        lam = max(lam / 3.0, 1e-12)
        if small or stalled or cost == 0.0:
            return p, it
    raise FitError(f"no convergence after {max_iter} iterations", best=p)


def _power_model(p, s):
    return p[0] * s ** p[1] + p[2]


def _time_axis(trace: VoltageTrace):
    return trace.t - trace.t[0]


def fit_power(trace: VoltageTrace, b0: float = -0.5) -> PowerFit:
    """Fit ``v = a (t+1)^b + c`` by Levenberg-Marquardt.

    Initial guess is ``a = v(0) - v(end)``, ``b = b0``, ``c = v(end)``. A
    constant trace returns ``a = 0, b = -1, c = v`` with ``r_squared = 1``.
    """
    if len(trace) < MIN_FIT_SAMPLES:
        raise FitError(f"power fit needs >= {MIN_FIT_SAMPLES} samples, got {len(trace)}")
    v = trace.v
    if np.ptp(v) == 0.0:
        return PowerFit(0.0, -1.0, float(v[0]), 0.0, 1.0)
    s = _time_axis(trace) + TIME_SHIFT
    log_s = np.log(s)

    def residual(p):
        return _power_model(p, s) - v

    def jacobian(p):
        sb = s ** p[1]
        return np.column_stack([sb, p[0] * sb * log_s, np.ones_like(s)])

    def project(p):
        p[1] = min(p[1], B_MAX)
        return p

    p0 = [v[0] - v[-1], b0, v[-1]]
    try:
        p, _ = levenberg_marquardt(residual, jacobian, p0, project=project)
    except FitError as exc:
        best = exc.best
        rmse, r2 = goodness(v, _power_model(best, s))
        exc.best = PowerFit(float(best[0]), float(best[1]), float(best[2]), rmse, r2)
        raise
    rmse, r2 = goodness(v, _power_model(p, s))
    return PowerFit(float(p[0]), float(p[1]), float(p[2]), rmse, r2)


def eval_power(fit: PowerFit, t):
    """Evaluate a power fit at time(s) since the start of its trace."""
    t = np.asarray(t, dtype=float)
    out = fit.a * (t + TIME_SHIFT) ** fit.b + fit.c
    return float(out) if out.ndim == 0 else out


def fit_linear(xs, ys) -> LinearFit:
    """Ordinary least squares line ``y = slope * x + intercept``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and equally long")
    if x.size < 2:
        raise ValueError("linear fit needs at least 2 points")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("degenerate xs: all values equal")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    pred = slope * x + intercept
    rmse, r2 = goodness(y, pred)
    if np.ptp(y) == 0.0:
        r2 = 1.0
    return LinearFit(slope, intercept, rmse, r2)


def fit_exponential(trace: VoltageTrace, terms: int = 1) -> ExpFit:
    """Fit ``a e^{bt}`` or ``a e^{bt} + c e^{dt}``; used only for comparison.

    When the solver hits its iteration limit the best iterate is returned
    with ``converged=False`` rather than raising.
    """
    if terms not in (1, 2):
        raise ValueError("terms must be 1 or 2")
    if len(trace) < MIN_FIT_SAMPLES:
        raise FitError(f"exponential fit needs >= {MIN_FIT_SAMPLES} samples, got {len(trace)}")
    v = trace.v
    t = _time_axis(trace)
    if np.ptp(v) == 0.0:
        pairs = ((float(v[0]), 0.0),) if terms == 1 else ((float(v[0]), 0.0), (0.0, 0.0))
        return ExpFit(pairs, 0.0, 1.0)

    if terms == 1:
        if np.all(v > 0):
            lf = fit_linear(t, np.log(v))
            p0 = [np.exp(lf.intercept), lf.slope]
        else:
            p0 = [v.mean(), 0.0]

        def model(p):
            return p[0] * np.exp(p[1] * t)

        def jacobian(p):
            e = np.exp(p[1] * t)
            return np.column_stack([e, p[0] * t * e])
    else:
        drop = v[0] - v[-1]
        k = int(np.argmax(v[0] - v >= 0.632 * drop)) if drop > 0 else len(t) // 2
        tau = max(t[k], t[1] if len(t) > 1 else 1.0)
        p0 = [drop, -1.0 / tau, v[-1], 0.0]

        def model(p):
            return p[0] * np.exp(p[1] * t) + p[2] * np.exp(p[3] * t)

        def jacobian(p):
            e1 = np.exp(p[1] * t)
            e2 = np.exp(p[3] * t)
            return np.column_stack([e1, p[0] * t * e1, e2, p[2] * t * e2])

    converged = True
    try:
        p, _ = levenberg_marquardt(lambda p: model(p) - v, jacobian, p0)
    except FitError as exc:
        p, converged = exc.best, False
    rmse, r2 = goodness(v, model(p))
    pairs = tuple((float(p[2 * j]), float(p[2 * j + 1])) for j in range(terms))
    return ExpFit(pairs, rmse, r2, converged)
