"""Curve fits that turn trajectories into measured quantities.

Four fit families: exponential decay of a positive series (timescale
extraction), power law via log-log regression, a shared-prefactor
search over the momentum scaling constant, and a piecewise-linear kink
fit for the optimal-momentum readout.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FitError
from .numerics import as_vector

__all__ = [
    "ExpFit",
    "PowerLawFit",
    "PiecewiseFit",
    "JointCFit",
    "fit_exponential",
    "fit_powerlaw",
    "fit_piecewise",
    "joint_fit_C",
]


@dataclass(frozen=True)
class ExpFit:
    """Least-squares fit of value = amplitude * exp(-t / t_c)."""

    t_c: float
    amplitude: float
    r_squared: float
    window: tuple


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of y = t0 * x**(-alpha) in log-log space."""

    t0: float
    alpha: float
    residual: float


@dataclass(frozen=True)
class PiecewiseFit:
    """Two half-lines meeting at beta_star.

    at_boundary marks a kink pushed to the edge of the sampled range,
    where the fit degenerates to a single line.
    """

    a_max: float
    a1: float
    a2: float
    beta_star: float
    residual: float
    at_boundary: bool


@dataclass(frozen=True)
class JointCFit:
    """Scaling constant minimizing the spread of fitted prefactors."""

    scaling_constant: float
    spread: float
    profile: tuple  # ((candidate, spread), ...) in evaluation order
    t0_by_gamma: dict
    ambiguous: bool


def fit_exponential(t, values, window=None):
    """Fit a decaying exponential to a positive series.

    The line is fit to (t, log value) inside the window; t_c = -1/slope.
    window defaults to dropping the first fifth of the samples, where
    the fast transient has not yet died out.
    """
    t = as_vector(t, "t")
    values = as_vector(values, "values")
    if t.size != values.size:
        raise FitError("t and values must have the same length")
    if window is None:
        window = (float(t[t.size // 5]), float(t[-1]))
    lo, hi = float(window[0]), float(window[1])
    mask = (t >= lo) & (t <= hi)
    if int(mask.sum()) < 10:
        raise FitError(f"need at least 10 points in the window, have {int(mask.sum())}")
    tw = t[mask]
    vw = values[mask]
    if np.any(vw <= 0.0):
        raise FitError("values must be positive to fit an exponential")
    logs = np.log(vw)
    slope, intercept = np.polyfit(tw, logs, 1)
    total_decay = -slope * (tw[-1] - tw[0])
    if total_decay <= 1e-12:
        raise FitError("series does not decay over the window; timescale unbounded")
    pred = slope * tw + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return ExpFit(
        t_c=-1.0 / float(slope),
        amplitude=float(np.exp(intercept)),
        r_squared=float(min(max(r_squared, 0.0), 1.0)),
        window=(lo, hi),
    )


def fit_powerlaw(x, y):
    """Fit y = t0 * x**(-alpha) by least squares on (log x, log y)."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.size != y.size:
        raise FitError("x and y must have the same length")
    if x.size < 3:
        raise FitError(f"need at least 3 points, have {x.size}")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise FitError("power-law fit needs positive data")
    lx = np.log(x)
    ly = np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    residual = float(np.sqrt(np.mean((ly - pred) ** 2)))
    return PowerLawFit(t0=float(np.exp(intercept)), alpha=float(-slope), residual=residual)


def _hinge_lstsq(beta, acc, kink):
    left = np.minimum(beta - kink, 0.0)
    right = np.maximum(beta - kink, 0.0)
    design = np.column_stack([np.ones_like(beta), left, right])
    coef, _, _, _ = np.linalg.lstsq(design, acc, rcond=None)
    ss = float(np.sum((design @ coef - acc) ** 2))
    return coef, ss


def fit_piecewise(beta, accuracy):
    """Fit accuracy(beta) with two lines joined at a free kink.

    The kink location is scanned over every sampled beta and every
    midpoint; each candidate leaves a linear least-squares problem.
    """
    beta = as_vector(beta, "beta")
    accuracy = as_vector(accuracy, "accuracy")
    if beta.size != accuracy.size:
        raise FitError("beta and accuracy must have the same length")
    if beta.size < 5:
        raise FitError(f"need at least 5 points for a 4-parameter fit, have {beta.size}")
    order = np.argsort(beta, kind="stable")
    b = beta[order]
    a = accuracy[order]
    mids = 0.5 * (b[:-1] + b[1:])
    candidates = np.unique(np.concatenate([b, mids]))
    best = None
    for kink in candidates:
        coef, ss = _hinge_lstsq(b, a, float(kink))
        if best is None or ss < best[2] - 1e-15 * abs(best[2]):
            best = (float(kink), coef, ss)
    kink, coef, ss = best
    # equal slopes mean the data is one line and the kink location is
    # unidentifiable; pin it to the better end of the range and flag it
    slope_scale = max(abs(float(coef[1])), abs(float(coef[2])), 1e-300)
    degenerate = abs(float(coef[1]) - float(coef[2])) <= 1e-6 * slope_scale
    if degenerate:
        kink = float(b[-1]) if a[-1] >= a[0] else float(b[0])
        coef, ss = _hinge_lstsq(b, a, kink)
    at_boundary = degenerate or kink <= float(b[0]) or kink >= float(b[-1])
    return PiecewiseFit(
        a_max=float(coef[0]),
        a1=float(coef[1]),
        a2=float(coef[2]),
        beta_star=kink,
        residual=float(np.sqrt(ss / b.size)),
        at_boundary=at_boundary,
    )


def _count_local_minima(values):
    v = np.asarray(values)
    count = 0
    for i in range(v.size):
        left = v[i - 1] if i > 0 else np.inf
        right = v[i + 1] if i < v.size - 1 else np.inf
        if v[i] < left and v[i] <= right:
            count += 1
    return count


def joint_fit_C(sweep, gammas, c_grid=None, refine=True, xtol=1e-3):
    """Scaling constant that collapses the fitted prefactors across gamma.

    sweep is a callable mapping a candidate scaling constant to
    {gamma: (eta_array, t_c_array)}; for each candidate we fit a power
    law per gamma and score the spread (max - min) of log t0.  The grid
    minimum is refined by golden-section search.  Spread is measured in
    log space so the objective is scale-free.
    """
    gammas = [float(g) for g in gammas]
    if len(set(gammas)) < 2:
        raise FitError("need at least two distinct gamma values to constrain C")
    if c_grid is None:
        c_grid = np.geomspace(0.05, 0.6, 9)
    c_grid = as_vector(c_grid, "c_grid")

    cache = {}

    def spread_of(c):
        c = float(c)
        if c in cache:
            return cache[c][0]
        data = sweep(c)
        log_t0 = {}
        for g in gammas:
            eta, t_c = data[g]
            log_t0[g] = np.log(fit_powerlaw(eta, t_c).t0)
        vals = np.array([log_t0[g] for g in gammas])
        spread = float(vals.max() - vals.min())
        cache[c] = (spread, {g: float(np.exp(v)) for g, v in log_t0.items()})
        return spread

    grid_spreads = np.array([spread_of(c) for c in c_grid])
    ambiguous = _count_local_minima(grid_spreads) > 1
    if ambiguous:
        warnings.warn(
            "spread profile over the candidate grid is not unimodal; "
            "returning the global minimum, inspect the profile",
            RuntimeWarning,
            stacklevel=2,
        )
    k = int(np.argmin(grid_spreads))
    best_c = float(c_grid[k])
    if refine and 0 < k < c_grid.size - 1:
        bracket = (float(c_grid[k - 1]), best_c, float(c_grid[k + 1]))
        res = minimize_scalar(
            spread_of, bracket=bracket, method="golden", options={"xtol": xtol}
        )
        if res.fun <= grid_spreads[k]:
            best_c = float(res.x)
    best_spread = spread_of(best_c)
    profile = tuple(sorted((c, s_t0[0]) for c, s_t0 in cache.items()))
    return JointCFit(
        scaling_constant=best_c,
        spread=best_spread,
        profile=profile,
        t0_by_gamma=cache[best_c][1],
        ambiguous=ambiguous,
    )
