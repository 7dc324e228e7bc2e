"""Two-parameter family of initial data and the shooting search over it.

The family is a localized copy of the corrected profile at s0 = -log T plus
(A/s0^2)(d0 + d1 z) near the target point.  The parameters (d0, d1) steer
the two unstable modes q0, q1; the search looks for the pair whose solution
stays longest inside the shrinking set.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from heatblowup.errors import ConfigError, GeometryError, SolverError
from heatblowup.numerics import cutoff_chi0
from heatblowup.profile import (
    ProfileParams,
    phi,
    project_modes,
    shrinking_membership,
)
from heatblowup.similarity import SimilarityFrame, field_to_q, monitor_z_grid
from heatblowup.simulate import Plant, run_auxiliary

EXIT_MODES = ("q0", "q1", "q2", "q_minus", "q_e", "regular_region", "horizon")


@dataclass(frozen=True)
class InitialDataParams:
    a: float = 0.5
    s0: float = 9.0
    d0: float = 0.0
    d1: float = 0.0
    K0: float = 1.75
    epsilon0: float = 0.24
    A: float = 20.0
    p: float = 2.0
    profile: bool = True

    @property
    def T(self):
        return float(np.exp(-self.s0))

    @property
    def radius(self):
        """Support radius of the data, epsilon0/4 in x."""
        return self.epsilon0 / 4.0

    def with_d(self, d0, d1):
        return replace(self, d0=float(d0), d1=float(d1))

    def asymptotic_ok(self):
        """Whether K0 sqrt(s0) < epsilon0 exp(s0/2) (large-s0 regime)."""
        return self.K0 * np.sqrt(self.s0) < self.epsilon0 * np.exp(self.s0 / 2.0)


def check_geometry(params, grid, region):
    """Hard geometric preconditions of the construction.

    The data support (a - epsilon0/4, a + epsilon0/4) must lie in the
    control region and the cut-off window (a - 2 epsilon0, a + 2 epsilon0)
    in the domain.  Returns a list of advisory warnings for the softer
    large-s0 conditions.
    """
    a, e0 = params.a, params.epsilon0
    if not region.omega_lo < a < region.omega_hi:
        raise GeometryError(f"target point a={a} is not inside the control region")
    if not (region.omega_lo <= a - e0 / 4 and a + e0 / 4 <= region.omega_hi):
        raise GeometryError("initial data support (a -+ epsilon0/4) leaves the control region")
    if not (grid.x_lo <= a - 2 * e0 and a + 2 * e0 <= grid.x_hi):
        raise GeometryError("cut-off window (a -+ 2 epsilon0) leaves the domain")
    warnings = []
    if not (region.omega_lo <= a - 4 * e0 and a + 4 * e0 <= region.omega_hi):
        warnings.append("(a - 4 epsilon0, a + 4 epsilon0) is not inside the control region")
    if not params.asymptotic_ok():
        warnings.append("K0 sqrt(s0) >= epsilon0 exp(s0/2): s0 below the asymptotic regime")
    if 4 * params.K0 * np.sqrt(params.T * params.s0) > e0 * 1.000001:
        warnings.append("the (d0, d1) bump reaches beyond the data support")
    return warnings


def candidate_initial_data(params, grid, region=None):
    """Initial field of the family on the grid nodes."""
    if not -2.0 <= params.d0 <= 2.0 or not -2.0 <= params.d1 <= 2.0:
        raise ConfigError("(d0, d1) must lie in [-2, 2]^2")
    if region is not None:
        check_geometry(params, grid, region)
    pr = ProfileParams(params.p)
    T, s0 = params.T, params.s0
    dx = grid.nodes - params.a
    z = dx / np.sqrt(T)
    core = phi(z, s0, pr) * cutoff_chi0(8.0 * dx / params.epsilon0) if params.profile else 0.0
    bump = (params.A / s0**2) * (params.d0 + params.d1 * z) * cutoff_chi0(
        2.0 * np.abs(dx) / (params.K0 * np.sqrt(T * s0)))
    y0 = T ** (-1.0 / (params.p - 1.0)) * (core + bump)
    # enforce the support statement exactly (the bump may be wider in
    # pre-asymptotic configurations; that case is flagged by check_geometry)
    y0 = np.where(np.abs(dx) >= params.radius, 0.0, y0)
    return y0


def modes_at(y, grid, params, t, T=None, dz=0.01):
    """Decomposition of the field y at physical time t (target (a, T))."""
    T = params.T if T is None else T
    frame = SimilarityFrame(params.a, T, t)
    zg = monitor_z_grid(grid, frame, params.K0, dz)
    q = field_to_q(y, grid, frame, params.epsilon0, zg, ProfileParams(params.p))
    return project_modes(q, zg, frame.s, params.K0), zg, frame


@dataclass
class ShootingResult:
    d0_star: float
    d1_star: float
    s_exit: float
    exit_mode: str
    exit_sign: int = 0
    trace: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    s0: float = float("nan")
    margin: float = float("inf")
    mode_exit: tuple = (float("nan"), float("nan"))
    evaluations: int = 1
    failure: str = ""

    @property
    def d(self):
        return (self.d0_star, self.d1_star)


class ShrinkingSetMonitor:
    """Step hook that tracks membership in the shrinking set.

    The first violated bound fixes exit_mode and s_exit.  When that bound is
    q0 or q1 the run continues until the other controlled mode has also left
    its interval (or another bound fails), so that the search can weigh both
    directions; the hook returns True (stop) then, or once T - t reaches the
    floor.
    """

    def __init__(self, params, grid, sp, floor_eps, dz=0.01, keep_reports=False, theta=1.0):
        self.params, self.grid, self.sp = params, grid, sp
        self.theta = theta
        self.floor_eps, self.dz = floor_eps, dz
        self.keep_reports = keep_reports
        self.trace, self.reports = [], []
        self.exit_mode, self.exit_sign = None, 0
        self.s_last = params.s0
        self.s_horizon = -np.log(floor_eps)
        self.mode_exit = {"q0": None, "q1": None}
        self.regular = np.abs(grid.nodes - params.a) >= sp.mu * sp.epsilon0

    def _finish(self, s):
        for k in self.mode_exit:
            if self.mode_exit[k] is None:
                self.mode_exit[k] = s
        return True

    def check(self, t, y):
        T = self.params.T
        if T - t <= self.floor_eps:
            if self.exit_mode is None:
                self.exit_mode = "horizon"
                self.s_last = self.s_horizon
            return self._finish(self.s_horizon)
        dec, zg, frame = modes_at(y, self.grid, self.params, t, dz=self.dz)
        s = frame.s
        rep = shrinking_membership(dec, zg, self.sp, s)
        reg = float(np.max(np.abs(y[self.regular]))) if self.regular.any() else 0.0
        self.trace.append((s, dec.q0 * s**2, dec.q1 * s**2))
        if self.keep_reports:
            self.reports.append((t, rep, reg))
        passed = dict(rep.passed)
        ratios = rep.ratios
        for k in self.mode_exit:
            passed[k] = ratios[k] <= self.theta
        for k in self.mode_exit:
            if self.mode_exit[k] is None and not passed[k]:
                self.mode_exit[k] = s
        others = [k for k in ("q2", "q_minus", "q_e") if not passed[k]]
        if reg > self.sp.eta0:
            others.append("regular_region")
        if self.exit_mode is None:
            bad = [k for k in ("q0", "q1") if not passed[k]] + others
            bad = max(bad, key=lambda k: ratios.get(k, np.inf)) if bad else None
            if bad is None and reg > self.sp.eta0:
                bad = "regular_region"
            if bad is None:
                self.s_last = s
                return False
            self.exit_mode = bad
            if bad in ("q0", "q1"):
                self.exit_sign = int(np.sign(getattr(dec, bad)))
        if others or all(v is not None for v in self.mode_exit.values()):
            return self._finish(s)
        return False

    def __call__(self, t, y, phase):
        return self.check(t, y)


def exit_time(params, grid, region, sp, sim, dz=0.01, keep_reports=False, theta=1.0):
    """Run the auxiliary system from the candidate data until it leaves the set.

    theta < 1 tightens the q0/q1 intervals to theta A / s^2 (used by the
    search to favor trajectories that stay central in the controlled modes).
    """
    y0 = candidate_initial_data(params, grid, region)
    # the monitor decides when to stop; keep the sup-norm stop out of its way
    kappa = ProfileParams(params.p).kappa
    stop = kappa * (sim.floor_eps / 4.0) ** (-1.0 / (params.p - 1.0))
    plant = Plant(grid, region.mask, params.p, replace(sim, threshold=max(sim.threshold, stop)))
    mon = ShrinkingSetMonitor(params, grid, sp, sim.floor_eps, dz, keep_reports, theta)
    if not mon.check(0.0, y0):
        res = run_auxiliary(y0, plant, hooks=(mon,))
        if res.failed and mon.exit_mode is None:
            raise SolverError(f"auxiliary run failed at d={params.d0, params.d1}: "
                               f"{res.message}")
    if mon.exit_mode is None:
        raise SolverError(f"auxiliary run at d={params.d0, params.d1} ended "
                           "without a shrinking-set decision")
    res = ShootingResult(params.d0, params.d1, float(mon.s_last), mon.exit_mode,
                         mon.exit_sign, mon.trace, mon.reports, params.s0)
    s_end = mon.trace[-1][0] if mon.trace else params.s0
    res.mode_exit = tuple(s_end if v is None else v
                          for v in (mon.mode_exit["q0"], mon.mode_exit["q1"]))
    inside = [(abs(q0) + abs(q1)) / sp.A for s, q0, q1 in mon.trace if s <= mon.s_last]
    res.margin = max(inside, default=np.inf)
    return res


def _rank_key(r):
    controlled = r.exit_mode in ("q0", "q1", "horizon")
    # both controlled modes count, so that drifting one parameter to delay
    # the exit of the other mode is not rewarded; among equally long
    # survivors prefer the one that stayed most central in the (q0, q1) box
    both = r.mode_exit[0] + r.mode_exit[1]
    margin = r.margin if r.exit_mode == "horizon" else 0.0
    return (not controlled, -r.s_exit, -both, margin, r.d0_star, r.d1_star)


def search_dt(params, grid, region, sp, sim, budget=14, box=((-2.0, 2.0), (-2.0, 2.0)),
              dz=0.01, min_gain=1.0, theta=0.3):
    """Nested 3x3 stencil search for the (d0, d1) with the latest exit.

    Each level evaluates the stencil center +- half-width in both
    directions, moves the center to the best point and halves the width.
    Candidates are ranked against the tightened controlled-mode interval
    theta A / s^2; the returned result is re-evaluated with the full bounds.
    """
    if budget < 1:
        raise ConfigError("budget must be at least one level")
    (lo0, hi0), (lo1, hi1) = box
    center = (0.5 * (lo0 + hi0), 0.5 * (lo1 + hi1))
    width = (0.5 * (hi0 - lo0), 0.5 * (hi1 - lo1))
    cache = {}

    def evaluate(d):
        key = (round(d[0], 15), round(d[1], 15))
        if key not in cache:
            cache[key] = exit_time(params.with_d(*key), grid, region, sp, sim, dz,
                                   theta=theta)
        return cache[key]

    best = None
    for _ in range(budget):
        pts = []
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                d0 = min(max(center[0] + i * width[0], lo0), hi0)
                d1 = min(max(center[1] + j * width[1], lo1), hi1)
                pts.append((d0, d1))
        results = [evaluate(d) for d in pts]
        level_best = min(results, key=_rank_key)
        if best is None or _rank_key(level_best) < _rank_key(best):
            best = level_best
        center = best.d
        width = (0.5 * width[0], 0.5 * width[1])
    out = exit_time(params.with_d(*best.d), grid, region, sp, sim, dz) if theta != 1 else best
    out.evaluations = len(cache)
    if out.s_exit < params.s0 + min_gain:
        out.failure = (f"search exhausted: best s_exit={out.s_exit:.3f} "
                       f"< s0 + {min_gain}")
    return out
