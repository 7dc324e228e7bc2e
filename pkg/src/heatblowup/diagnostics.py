"""Quantitative checks along a computed trajectory.

Profile error near the blowup point, flatness in the intermediate region,
the small-solution bound away from the blowup point and the quality of the
blowup-time fit.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from heatblowup.errors import RangeError
from heatblowup.profile import ProfileParams, profile_f
from heatblowup.simulate import fit_window, linear_blowup_fit

MIN_WINDOW_NODES = 8


@dataclass(frozen=True)
class ProfileErrorSample:
    t: float
    Tm_t: float
    R: float
    sup_err: float
    scaled_err: float
    resolved: bool
    nodes: int


def profile_error(y, grid, t, T_star, a_star, R=1.0, params=ProfileParams(), floor_eps=1e-6):
    """Distance of the rescaled solution from f on |x - a*| <= R sqrt(Tm |log Tm|)."""
    pr = params if isinstance(params, ProfileParams) else ProfileParams(params)
    Tm = T_star - t
    if not floor_eps < Tm < 1.0:
        raise RangeError(f"T* - t = {Tm:.3g} outside (floor, 1)")
    width = np.sqrt(Tm * abs(np.log(Tm)))
    dx = grid.nodes - a_star
    inside = np.abs(dx) <= R * width
    count = int(inside.sum())
    if count == 0:
        return ProfileErrorSample(t, Tm, R, float("nan"), float("nan"), False, 0)
    resc = Tm ** (1.0 / (pr.p - 1.0)) * np.asarray(y)[inside]
    err = float(np.max(np.abs(resc - profile_f(dx[inside] / width, pr))))
    return ProfileErrorSample(t, Tm, R, err, err * np.sqrt(abs(np.log(Tm))),
                              count >= MIN_WINDOW_NODES, count)


def profile_error_series(times, states, grid, T_star, a_star, R=1.0,
                         params=ProfileParams(), floor_eps=1e-6, window=(1e-5, 1e-2)):
    out = []
    for t, y in zip(times, states):
        Tm = T_star - t
        if window[0] <= Tm <= window[1] and floor_eps < Tm < 1.0:
            out.append(profile_error(y, grid, t, T_star, a_star, R, params, floor_eps))
    return out


def intermediate_time(x0, a, T, K0):
    """t0(x0): the time at which |x0 - a| = K0 sqrt((T - t0) |log(T - t0)|)."""
    d = abs(x0 - a)
    if d <= 0:
        raise RangeError("x0 must differ from a")

    def g(u):
        return K0 * np.sqrt(u * abs(np.log(u))) - d

    hi = np.exp(-1.0)  # u |log u| increases on (0, 1/e)
    if g(hi) < 0:
        raise RangeError("x0 too far from a for the intermediate region")
    lo = 1e-300
    u0 = brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return T - u0


def flat_scale(x0, a, params=ProfileParams()):
    pr = params if isinstance(params, ProfileParams) else ProfileParams(params)
    d = abs(x0 - a)
    return ((pr.p - 1) ** 2 * d**2 / (8 * pr.p * abs(np.log(d)))) ** (-1.0 / (pr.p - 1))


def U_K0(tau, K0, params=ProfileParams()):
    pr = params if isinstance(params, ProfileParams) else ProfileParams(params)
    tau = np.asarray(tau, dtype=float)
    return ((pr.p - 1) * (1 - tau) + pr.b * K0**2) ** (-1.0 / (pr.p - 1))


@dataclass(frozen=True)
class FlatnessReport:
    x0: float
    t0: float
    taus: np.ndarray
    deviations: np.ndarray

    @property
    def max_deviation(self):
        return float(np.max(self.deviations)) if self.deviations.size else float("nan")


def flatness_check(times, states, grid, x0, a, T, K0, params=ProfileParams()):
    """Compare y(x0, t)/y*(x0) with U(tau)/U(1) for t from t0(x0) on."""
    times = np.asarray(times, dtype=float)
    t0 = intermediate_time(x0, a, T, K0)
    if not times[0] <= t0 <= times[-1]:
        raise RangeError(f"t0(x0)={t0:.6g} outside the trajectory [{times[0]:.6g}, "
                         f"{times[-1]:.6g}]")
    ystar = flat_scale(x0, a, params)
    xx = np.concatenate(([grid.x_lo], grid.nodes, [grid.x_hi]))
    taus, devs = [], []
    for t, y in zip(times, states):
        if t < t0 or t >= T:
            continue
        tau = (t - t0) / (T - t0)
        yv = np.interp(x0, xx, np.concatenate(([0.0], y, [0.0])))
        taus.append(tau)
        devs.append(abs(yv / ystar - U_K0(tau, K0, params) / U_K0(1.0, K0, params)))
    return FlatnessReport(float(x0), float(t0), np.array(taus), np.array(devs))


@dataclass(frozen=True)
class RegularRegionReport:
    passed: np.ndarray
    slack: np.ndarray
    eta0: float

    @property
    def ok(self):
        return bool(np.all(self.passed))

    @property
    def worst_slack(self):
        return float(np.min(self.slack)) if self.slack.size else self.eta0

    def first_failure(self):
        bad = np.nonzero(~self.passed)[0]
        return int(bad[0]) if bad.size else None


def regular_region_bound(states, grid, a, epsilon0, mu=0.5, eta0=1.0):
    """Check |y| <= eta0 on |x - a| >= mu epsilon0 at every stored state."""
    region = np.abs(grid.nodes - a) >= mu * epsilon0
    slack = []
    for y in states:
        m = float(np.max(np.abs(np.asarray(y)[region]))) if region.any() else 0.0
        slack.append(eta0 - m)
    slack = np.array(slack)
    return RegularRegionReport(slack >= 0, slack, float(eta0))


@dataclass(frozen=True)
class FitQuality:
    kappa_hat: float
    T_star: float
    residual: float
    n: int


def fit_quality(sup_t, sup_val, p, decades=1.0, min_samples=10):
    """Blowup fit over the final decade; rejects non-monotone windows."""
    sup_t = np.asarray(sup_t, dtype=float)
    sup_val = np.asarray(sup_val, dtype=float)
    idx = fit_window(sup_t, sup_val, decades)
    if idx.size < min_samples:
        raise ValueError(f"only {idx.size} samples in the fit window")
    if np.any(np.diff(sup_val[idx]) <= 0):
        raise ValueError("sup norm is not increasing over the fit window")
    T_star, kappa_hat, residual = linear_blowup_fit(sup_t[idx], sup_val[idx], p)
    return FitQuality(kappa_hat, T_star, residual, int(idx.size))
