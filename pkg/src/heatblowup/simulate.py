"""Time integration of the controlled heat equation through the three phases.

Phases on the time axis (T target time, T1 auxiliary horizon):

    riccati    [0, T - T1 - eps_hat)            u = -1_w P (y - y~0) - Lap y~0
    zero       [.., T - T1 - eps_hat + eps_hat1) u = 0 (smoothing)
    nonlinear  [.., blowup)                      u = |y|^(p-1) y
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from heatblowup.errors import ConfigError
from heatblowup.riccati import FeedbackLaw, feedback_gain


@dataclass(frozen=True)
class SimConfig:
    base_dt: float = 1e-3
    safety: float = 0.05
    threshold: float = 1e5
    floor_eps: float = 1e-6
    checkpoint_every: int = 1
    riccati_dt_frac: float = 0.05
    zero_steps: int = 16
    diffusion: bool = True
    max_steps: int = 5_000_000


@dataclass(frozen=True)
class PhasePlan:
    T: float
    T1: float
    eps_hat: float
    eps_hat1: float
    p: float = 2.0
    floor_eps: float = 1e-6

    def __post_init__(self):
        degenerate = self.eps_hat == 0 and self.eps_hat1 == 0
        if not 0 < self.T1 < self.T / 2 and not (degenerate and self.T1 == self.T):
            raise ConfigError("need T1 in (0, T/2)")
        if not degenerate:
            if not 0 < self.eps_hat1 < self.T1 / 4:
                raise ConfigError("need 0 < eps_hat1 < T1/4")
            if not 0 < self.eps_hat < self.T - self.T1:
                raise ConfigError("need 0 < eps_hat < T - T1")
            if not self.eps_hat1 < self.eps_hat + self.T1:
                raise ConfigError("smoothing phase must end before T")

    @property
    def riccati_end(self):
        return self.T - self.T1 - self.eps_hat

    @property
    def zero_end(self):
        return self.riccati_end + self.eps_hat1

    @property
    def horizon(self):
        """Terminal time of the Riccati problem, T_h = T - T1."""
        return self.T - self.T1


@dataclass
class RunResult:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    sup_t: list = field(default_factory=list)
    sup_val: list = field(default_factory=list)
    sup_x: list = field(default_factory=list)
    phase_log: list = field(default_factory=list)
    T_star: float = float("nan")
    a_star: float = float("nan")
    blowup: bool = False
    failed: bool = False
    message: str = ""
    diagnostics: dict = field(default_factory=dict)
    final_t: float = 0.0
    final_y: np.ndarray = None

    @property
    def trajectory(self):
        return np.array(self.times), np.array(self.states)

    @property
    def sup_series(self):
        return np.array(self.sup_t), np.array(self.sup_val), np.array(self.sup_x)

    def extend(self, other):
        for name in ("times", "states", "phases", "sup_t", "sup_val", "sup_x", "phase_log"):
            getattr(self, name).extend(getattr(other, name))
        self.final_t, self.final_y = other.final_t, other.final_y
        self.failed, self.message = other.failed, other.message


def _banded(grid, dt):
    n, r = grid.n, dt / grid.h**2
    ab = np.empty((3, n))
    ab[0, :] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :] = -r
    return ab


def step_imex(grid, y, source, dt):
    """Solve (I - dt Lap) y+ = y + dt source (backward Euler diffusion)."""
    if not dt > 0:
        raise ConfigError("time step must be positive")
    rhs = np.asarray(y, dtype=float) + dt * np.asarray(source, dtype=float)
    return solve_banded((1, 1), _banded(grid, dt), rhs,
                        overwrite_b=True, check_finite=False)


def adaptive_dt(y, base_dt, p, safety):
    m = float(np.max(np.abs(y)))
    if m <= 1.0:
        return base_dt
    return min(base_dt, safety * m ** (1.0 - p))


def peak(grid, y):
    """Location and value of the maximum of |y|.

    Refined by the parabola through the largest node value and its two
    neighbors, so that the estimate does not jump with the position of the
    peak relative to the nodes.
    """
    ay = np.abs(y)
    i = int(np.argmax(ay))
    x, v = grid.nodes[i], ay[i]
    if 0 < i < grid.n - 1:
        ym, y0, yp = ay[i - 1], ay[i], ay[i + 1]
        den = ym - 2.0 * y0 + yp
        if den < 0:
            off = 0.5 * (ym - yp) / den
            x += off * grid.h
            v = y0 - 0.25 * (ym - yp) * off
    return x, v


def peak_location(grid, y):
    return peak(grid, y)[0]


@dataclass
class Plant:
    """Everything a phase needs besides its window."""

    grid: object
    mask: np.ndarray
    p: float = 2.0
    sim: SimConfig = SimConfig()
    reaction_mask: np.ndarray = None
    law: FeedbackLaw = None
    sol: object = None

    def stop_sup(self):
        kappa = (self.p - 1.0) ** (-1.0 / (self.p - 1.0))
        return max(self.sim.threshold, kappa * self.sim.floor_eps ** (-1.0 / (self.p - 1.0)))


def _record(res, plant, t, y, phase, step):
    x, v = peak(plant.grid, y)
    res.sup_t.append(t)
    res.sup_val.append(float(v))
    res.sup_x.append(x)
    if step % plant.sim.checkpoint_every == 0:
        res.times.append(t)
        res.states.append(y.copy())
        res.phases.append(phase)


def run_phase(y0, phase, window, plant, hooks=(), t_record_start=True):
    """Advance y0 over window = (t_start, t_end) under the given phase law.

    For the nonlinear phase t_end may be inf; the run then stops when the
    sup norm reaches the floor level (or a hook returns True).  Hooks are
    called as hook(t, y, phase) after every accepted step.
    """
    t0, t1 = window
    sim = plant.sim
    grid = plant.grid
    res = RunResult()
    y = np.array(y0, dtype=float)
    t = float(t0)
    if t_record_start:
        _record(res, plant, t, y, phase, 0)
    entry = {"phase": phase, "t_enter": t}
    if phase == "riccati":
        if plant.law is None or plant.sol is None:
            raise ConfigError("riccati phase needs a feedback law and a Lyapunov solution")
        # the Laplacian of the target enters through the mask, as in the control law
        forcing_const = -plant.mask * plant.law.target_laplacian
    elif phase == "nonlinear":
        rmask = plant.mask if plant.reaction_mask is None else plant.reaction_mask
        stop = plant.stop_sup()
    elif phase != "zero":
        raise ConfigError(f"unknown phase {phase!r}")
    step = 0
    stopped_by_hook = False
    while t < t1 and (np.isinf(t1) or t1 - t > 1e-14 * max(1.0, abs(t1))):
        if phase == "riccati":
            dt = min(sim.base_dt, sim.riccati_dt_frac * (plant.sol.horizon - t))
        elif phase == "zero":
            dt = (t1 - t0) / sim.zero_steps
        else:
            dt = adaptive_dt(y, sim.base_dt, plant.p, sim.safety)
        dt = min(dt, t1 - t)
        t_new = t + dt
        if phase == "riccati":
            K = feedback_gain(plant.sol, t_new)
            BK = plant.mask[:, None] * K
            Amat = np.eye(grid.n) * (1.0 + 2.0 * dt / grid.h**2)
            idx = np.arange(grid.n - 1)
            Amat[idx, idx + 1] = Amat[idx + 1, idx] = -dt / grid.h**2
            Amat += dt * BK
            rhs = y + dt * (BK @ plant.law.target + forcing_const)
            y_new = np.linalg.solve(Amat, rhs)
        elif phase == "zero":
            y_new = step_imex(grid, y, np.zeros_like(y), dt)
        else:
            src = rmask * np.abs(y) ** (plant.p - 1.0) * y
            y_new = step_imex(grid, y, src, dt) if sim.diffusion else y + dt * src
        step += 1
        if not np.all(np.isfinite(y_new)):
            res.failed = True
            res.message = f"non-finite state in {phase} phase at t={t_new:.6g}"
            break
        t, y = t_new, y_new
        _record(res, plant, t, y, phase, step)
        if any([bool(h(t, y, phase)) for h in hooks]):
            stopped_by_hook = True
            break
        if phase == "nonlinear" and np.max(np.abs(y)) >= stop:
            break
        if step >= sim.max_steps:
            res.failed = True
            res.message = f"step limit reached in {phase} phase"
            break
    entry.update(t_exit=t, steps=step, stopped_by_hook=stopped_by_hook)
    res.phase_log.append(entry)
    if res.times[-1] != t:
        res.times.append(t)
        res.states.append(y.copy())
        res.phases.append(phase)
    res.final_t, res.final_y = t, y
    return res


@dataclass(frozen=True)
class BlowupEstimate:
    detected: bool
    T_star: float = float("nan")
    a_star: float = float("nan")
    kappa_hat: float = float("nan")
    residual: float = float("nan")
    n_fit: int = 0


def fit_window(sup_t, sup_val, decades=1.0):
    """Indices of the last `decades` of growth of the sup norm."""
    sup_val = np.asarray(sup_val)
    top = sup_val[-1]
    idx = np.nonzero(sup_val >= top * 10.0 ** (-decades))[0]
    # keep only the final contiguous stretch
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    if breaks.size:
        idx = idx[breaks[-1] + 1:]
    return idx


def linear_blowup_fit(t, sup, p):
    """Fit sup^(1-p) = c (T - t); returns (T_star, kappa_hat, residual)."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(sup, dtype=float) ** (1.0 - p)
    tc = t.mean()
    slope, icpt = np.polyfit(t - tc, u, 1)
    if not slope < 0:
        return float("nan"), float("nan"), float("inf")
    T_star = tc - icpt / slope
    # sup = kappa (T - t)^(-1/(p-1))  <=>  sup^(1-p) = kappa^(1-p) (T - t)
    kappa_hat = (-slope) ** (1.0 / (1.0 - p))
    model = kappa_hat * (T_star - t) ** (-1.0 / (p - 1.0))
    residual = float(np.max(np.abs(model / sup - 1.0)))
    return float(T_star), float(kappa_hat), residual


def detect_blowup(sup_series, p, floor_eps=1e-6, threshold=1e5, min_samples=10):
    """Blowup time from the last decade of sup-norm growth.

    `sup_series` is (t, sup, argmax x).  Returns a BlowupEstimate; when the
    threshold was never reached, `detected` is False.
    """
    t, sup, xs = (np.asarray(v, dtype=float) for v in sup_series)
    if t.size < 2 or not np.max(sup) >= threshold:
        return BlowupEstimate(False)
    idx = fit_window(t, sup)
    if idx.size < min_samples or np.any(np.diff(sup[idx]) <= 0):
        return BlowupEstimate(False)
    T_star, kappa_hat, residual = linear_blowup_fit(t[idx], sup[idx], p)
    if not np.isfinite(T_star):
        return BlowupEstimate(False)
    return BlowupEstimate(True, T_star, float(xs[-1]), kappa_hat, residual, int(idx.size))


def run_auxiliary(y0, plant, t0=0.0, hooks=()):
    """Nonlinear phase only, from t0 until blowup: the auxiliary system."""
    res = run_phase(y0, "nonlinear", (t0, np.inf), plant, hooks)
    est = detect_blowup(res.sup_series, plant.p, plant.sim.floor_eps, plant.sim.threshold)
    res.blowup = est.detected
    res.T_star, res.a_star = est.T_star, est.a_star
    res.diagnostics["fit"] = est
    return res


def run_three_phase(y0, plan, plant, hooks=()):
    """Execute riccati -> zero -> nonlinear and estimate (T*, a*)."""
    if plan.p != plant.p:
        raise ConfigError("plan and plant disagree on the exponent p")
    total = RunResult()
    y = np.array(y0, dtype=float)
    t = 0.0
    segments = [("riccati", (0.0, plan.riccati_end)),
                ("zero", (plan.riccati_end, plan.zero_end)),
                ("nonlinear", (plan.zero_end, np.inf))]
    first = True
    for phase, window in segments:
        if window[1] <= window[0]:
            continue
        try:
            part = run_phase(y, phase, window, plant, hooks, t_record_start=first)
        except Exception as exc:
            total.failed = True
            total.message = f"{phase} phase failed: {exc}"
            total.phase_log.append({"phase": phase, "t_enter": t, "error": str(exc)})
            total.final_t, total.final_y = t, y
            return total
        first = False
        total.extend(part)
        t, y = part.final_t, part.final_y
        if part.failed:
            total.message = f"{phase} phase: {part.message}"
            return total
    est = detect_blowup(total.sup_series, plant.p, plant.sim.floor_eps, plant.sim.threshold)
    total.blowup = est.detected
    total.T_star, total.a_star = est.T_star, est.a_star
    total.diagnostics["fit"] = est
    if not est.detected:
        total.message = "no blowup detected"
    return total
