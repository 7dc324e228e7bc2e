"""Orchestration of the construct / control / stability experiments.

Each experiment writes CSV files for fields and series and a JSON summary
into its own directory.  Nothing time- or host-dependent is written, so
identical configurations give identical files.
"""

from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor
import csv
import json
import os

import numpy as np
import scipy

from heatblowup import __version__
from heatblowup.diagnostics import (
    fit_quality,
    flatness_check,
    profile_error_series,
    regular_region_bound,
)
from heatblowup.errors import ConfigError, RangeError
from heatblowup.initial_data import (
    InitialDataParams,
    candidate_initial_data,
    check_geometry,
    exit_time,
    search_dt,
)
from heatblowup.numerics import build_grid, build_region, cutoff_chi0, laplacian_apply
from heatblowup.profile import ProfileParams, ShrinkingSetParams, phi, project_modes
from heatblowup.riccati import FeedbackLaw, load_cache, save_cache, solve_lyapunov_Q
from heatblowup.similarity import recenter, uniform_z_grid
from heatblowup.simulate import PhasePlan, Plant, SimConfig, run_auxiliary, run_three_phase


@dataclass
class Setup:
    cfg: object
    grid: object
    region: object
    profile: ProfileParams
    shrink: ShrinkingSetParams
    sim: SimConfig
    data: InitialDataParams


def build_setup(cfg):
    grid = build_grid(cfg.domain[0], cfg.domain[1], cfg.n)
    region = build_region(grid, *cfg.omega)
    sim = SimConfig(base_dt=cfg.base_dt, safety=cfg.safety, threshold=cfg.threshold,
                    floor_eps=cfg.floor_eps, checkpoint_every=cfg.checkpoint_every,
                    riccati_dt_frac=cfg.riccati_dt_frac, zero_steps=cfg.zero_steps)
    data = InitialDataParams(a=cfg.a, s0=cfg.s0, K0=cfg.K0, epsilon0=cfg.epsilon0,
                             A=cfg.A, p=cfg.p)
    shrink = ShrinkingSetParams(cfg.K0, cfg.epsilon0, cfg.A, cfg.mu, cfg.eta0)
    return Setup(cfg, grid, region, ProfileParams(cfg.p), shrink, sim, data)


def provenance(cfg):
    return {"config_sha256": cfg.digest(), "heatblowup": __version__,
            "numpy": np.__version__, "scipy": scipy.__version__}


# ---- file helpers ------------------------------------------------------------

def _num(v):
    return repr(float(v))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_field(path, grid, y):
    write_csv(path, ["x", "y"], zip(grid.nodes, y))


def read_field(path, grid):
    with open(path) as fh:
        rows = list(csv.reader(fh))[1:]
    x = np.array([float(r[0]) for r in rows])
    y = np.array([float(r[1]) for r in rows])
    if x.shape != grid.nodes.shape or not np.allclose(x, grid.nodes, rtol=0, atol=1e-12):
        raise ConfigError(f"{path}: field grid does not match the configured grid")
    return y


def write_trajectory(path, grid, times, states, phases):
    header = ["t", "phase"] + [f"x={_num(x)}" for x in grid.nodes]
    write_csv(path, header, ([t, ph, *y] for t, y, ph in zip(times, states, phases)))


def read_trajectory(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, rows = rows[0], rows[1:]
    x = np.array([float(h[2:]) for h in header[2:]])
    times = np.array([float(r[0]) for r in rows])
    phases = [r[1] for r in rows]
    states = np.array([[float(v) for v in r[2:]] for r in rows])
    return x, times, states, phases


# ---- construct -----------------------------------------------------------------

@dataclass
class ConstructResult:
    target: np.ndarray
    shooting: object
    check: object
    T_hat: float
    a_hat: float
    aux: object
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.shooting.failure


def construct(setup):
    """Shooting search for the auxiliary data and its blowup reference run."""
    warnings = check_geometry(setup.data, setup.grid, setup.region)
    cfg = setup.cfg
    sh = search_dt(setup.data, setup.grid, setup.region, setup.shrink, setup.sim,
                   budget=cfg.search_budget, dz=cfg.z_spacing, theta=cfg.search_theta)
    params = setup.data.with_d(*sh.d)
    check = exit_time(params, setup.grid, setup.region, setup.shrink, setup.sim,
                      cfg.z_spacing, keep_reports=True)
    target = candidate_initial_data(params, setup.grid, setup.region)
    aux = run_auxiliary(target, Plant(setup.grid, setup.region.mask, cfg.p, setup.sim))
    return ConstructResult(target, sh, check, aux.T_star, aux.a_star, aux, warnings)


def save_construct(res, setup, out):
    os.makedirs(out, exist_ok=True)
    write_field(os.path.join(out, "target.csv"), setup.grid, res.target)
    sh = res.shooting
    write_csv(os.path.join(out, "shooting_trace.csv"), ["s", "q0_s2", "q1_s2"], sh.trace)
    rows = []
    for t, rep, reg in res.check.reports:
        r = rep.ratios
        rows.append([t, rep.s, r["q0"], r["q1"], r["q2"], r["q_minus"], r["q_e"], reg,
                     int(rep.ok and reg <= setup.shrink.eta0)])
    write_csv(os.path.join(out, "membership.csv"),
              ["t", "s", "q0_ratio", "q1_ratio", "q2_ratio", "q_minus_ratio", "q_e_ratio",
               "regular_max", "inside"], rows)
    ratios = np.array([r[2:7] for r in rows]) if rows else np.zeros((0, 5))
    fit = res.aux.diagnostics.get("fit")
    summary = {
        "provenance": provenance(setup.cfg),
        "d0_star": sh.d0_star, "d1_star": sh.d1_star,
        "s_exit": res.check.s_exit, "exit_mode": res.check.exit_mode,
        "search_exit_mode": sh.exit_mode, "search_evaluations": sh.evaluations,
        "search_failure": sh.failure,
        "max_ratios": dict(zip(["q0", "q1", "q2", "q_minus", "q_e"],
                               ratios.max(axis=0).tolist() if rows else [])),
        "regular_max": max((r[7] for r in rows), default=0.0),
        "T1": setup.cfg.T1, "T_hat": res.T_hat, "a_hat": res.a_hat,
        "kappa_hat": getattr(fit, "kappa_hat", float("nan")),
        "blowup_detected": res.aux.blowup,
        "geometry_warnings": res.warnings,
    }
    write_json(os.path.join(out, "construct.json"), summary)
    return summary


# ---- riccati ---------------------------------------------------------------------

def riccati_solution(setup, cache=None):
    """Lyapunov solution, read from `cache` when it matches, else solved (and saved)."""
    cfg = setup.cfg
    horizon = cfg.T - cfg.T1
    if cache and os.path.exists(cache):
        return load_cache(cache, setup.grid, setup.region, horizon)
    sol = solve_lyapunov_Q(setup.grid, setup.region, horizon, cfg.n_knots,
                           method=cfg.riccati_method)
    sol.reg_eps = cfg.reg_rel * np.linalg.norm(sol.mats[0], 2)
    if cache:
        os.makedirs(os.path.dirname(os.path.abspath(cache)), exist_ok=True)
        save_cache(cache, sol, setup.grid, setup.region)
    return sol


# ---- control -----------------------------------------------------------------------

def initial_state(setup, target):
    cfg = setup.cfg
    if cfg.y0 == "zero":
        return np.zeros(setup.grid.n)
    if cfg.y0 == "target":
        return target.copy()
    return read_field(cfg.y0_file, setup.grid)


def run_control(setup, target, sol, y0):
    cfg = setup.cfg
    plan = PhasePlan(cfg.T, cfg.T1, cfg.eps_hat, cfg.eps_hat1_value, cfg.p, cfg.floor_eps)
    law = FeedbackLaw(target, laplacian_apply(setup.grid, target), setup.region.mask)
    plant = Plant(setup.grid, setup.region.mask, cfg.p, setup.sim, law=law, sol=sol)
    return run_three_phase(y0, plan, plant), plan


def nonincreasing(values, jitter=0.05):
    """True when every value is at most (1 + jitter) times the running minimum."""
    running = np.inf
    for v in values:
        if v > (1.0 + jitter) * running:
            return False
        running = min(running, v)
    return True


def analyze_run(setup, times, states, phases, sup_series, T_target=None):
    """Diagnostics of a finished run; returns (summary dict, series dict)."""
    cfg = setup.cfg
    grid = setup.grid
    T_target = cfg.T if T_target is None else T_target
    out = {"blowup_detected": False}
    series = {}
    try:
        fq = fit_quality(sup_series[0], sup_series[1], cfg.p)
    except ValueError as exc:
        out["fit_error"] = str(exc)
        return out, series
    T_star = fq.T_star
    a_star = float(sup_series[2][-1])
    nl = np.array([ph == "nonlinear" for ph in phases])
    rr = regular_region_bound(states[nl], grid, cfg.a, cfg.epsilon0, cfg.mu, cfg.eta0)
    pe = profile_error_series(times, states, grid, T_star, a_star, 1.0, setup.profile,
                              cfg.floor_eps)
    resolved = [s for s in pe if s.resolved]
    ref = min(resolved, key=lambda s: abs(s.Tm_t - 1e-2), default=None)
    flat = {}
    for k in (8, 16, 32):
        x0 = cfg.a + cfg.epsilon0 / k
        try:
            rep = flatness_check(times[nl], states[nl], grid, x0, a_star, T_star, cfg.K0,
                                 setup.profile)
            flat[f"{x0!r}"] = rep.max_deviation
        except RangeError as exc:
            flat[f"{x0!r}"] = f"unavailable: {exc}"
    out.update({
        "blowup_detected": True,
        "T_star": T_star, "a_star": a_star, "kappa_hat": fq.kappa_hat,
        "fit_residual": fq.residual, "fit_samples": fq.n,
        "T_error": abs(T_star - T_target), "a_error": abs(a_star - cfg.a),
        "h": grid.h,
        "within_epsilon": bool(abs(T_star - T_target) < cfg.epsilon
                               and abs(a_star - cfg.a) < cfg.epsilon),
        "a_within_2h": bool(abs(a_star - cfg.a) <= 2 * grid.h),
        "regular_region_ok": rr.ok, "regular_region_worst_slack": rr.worst_slack,
        "profile_error_nonincreasing": nonincreasing([s.sup_err for s in resolved]),
        "scaled_error_bounded": bool(ref is not None and all(
            s.scaled_err < 3 * ref.scaled_err for s in resolved)),
        "flatness_max_deviation": flat,
    })
    series["profile_error"] = [(s.t, s.sup_err, s.scaled_err, int(s.resolved)) for s in pe]
    t_nl = times[nl]
    series["regular_region"] = [(t, int(ok), sl) for t, ok, sl in zip(t_nl, rr.passed, rr.slack)]
    return out, series


def save_run(res, setup, out, plan=None, extra=None):
    os.makedirs(out, exist_ok=True)
    times, states = res.trajectory
    write_trajectory(os.path.join(out, "trajectory.csv"), setup.grid, times, states,
                     res.phases)
    t, sup, xs = res.sup_series
    write_csv(os.path.join(out, "sup_series.csv"), ["t", "sup", "argmax"], zip(t, sup, xs))
    summary, series = analyze_run(setup, times, states, res.phases, (t, sup, xs))
    write_series(out, series)
    summary.update({
        "provenance": provenance(setup.cfg),
        "failed": res.failed, "message": res.message,
        "phase_log": res.phase_log, "T_target": setup.cfg.T, "a_target": setup.cfg.a,
        "epsilon": setup.cfg.epsilon,
    })
    if plan is not None:
        summary["phase_plan"] = {"T": plan.T, "T1": plan.T1, "eps_hat": plan.eps_hat,
                                 "eps_hat1": plan.eps_hat1,
                                 "riccati_end": plan.riccati_end, "zero_end": plan.zero_end}
    if extra:
        summary.update(extra)
    write_json(os.path.join(out, "summary.json"), summary)
    return summary


def write_series(out, series):
    if "profile_error" in series:
        write_csv(os.path.join(out, "profile_error.csv"),
                  ["t", "sup_err", "scaled_err", "resolved"], series["profile_error"])
    if "regular_region" in series:
        write_csv(os.path.join(out, "regular_region.csv"), ["t", "pass", "slack"],
                  series["regular_region"])


def diagnose(setup, out):
    """Recompute the diagnostics of a stored control run."""
    x, times, states, phases = read_trajectory(os.path.join(out, "trajectory.csv"))
    if x.shape != setup.grid.nodes.shape or not np.allclose(x, setup.grid.nodes, atol=1e-12):
        raise ConfigError("stored trajectory does not match the configured grid")
    with open(os.path.join(out, "sup_series.csv")) as fh:
        rows = list(csv.reader(fh))[1:]
    sup = tuple(np.array([float(r[i]) for r in rows]) for i in range(3))
    summary, series = analyze_run(setup, times, states, phases, sup)
    write_series(out, series)
    summary["provenance"] = provenance(setup.cfg)
    write_json(os.path.join(out, "diagnostics.json"), summary)
    return summary


# ---- stability ------------------------------------------------------------------------

def w2inf_norm(grid, v):
    """max(|v|, |Dv|, |D^2 v|) with one-sided and central differences (zero ends)."""
    vv = np.concatenate(([0.0], np.asarray(v, dtype=float), [0.0]))
    d1 = np.diff(vv) / grid.h
    d2 = np.diff(vv, 2) / grid.h**2
    return float(max(np.max(np.abs(vv)), np.max(np.abs(d1)), np.max(np.abs(d2))))


def perturbation_bump(setup):
    """Fixed smooth bump inside omega, normalized to unit discrete W^{2,inf} norm."""
    cfg = setup.cfg
    c, w = cfg.bump_center_value, cfg.bump_width_value
    if not (cfg.omega[0] <= c - 2 * w and c + 2 * w <= cfg.omega[1]):
        raise ConfigError("perturbation bump must lie inside omega")
    v = cutoff_chi0((setup.grid.nodes - c) / w)
    return v / w2inf_norm(setup.grid, v)


def _aux_row(args):
    setup, y0 = args
    res = run_auxiliary(y0, Plant(setup.grid, setup.region.mask, setup.cfg.p, setup.sim))
    trend = None
    if res.blowup:
        times, states = res.trajectory
        pe = [s for s in profile_error_series(times, states, setup.grid, res.T_star,
                                              res.a_star, 1.0, setup.profile,
                                              setup.cfg.floor_eps) if s.resolved]
        trend = nonincreasing([s.sup_err for s in pe]) if pe else None
    return res.blowup, res.T_star, res.a_star, trend, res.message


@dataclass
class StabilityReport:
    sizes: list
    rows: list
    T_hat: float
    a_hat: float
    shifts: list = field(default_factory=list)

    def deltas(self):
        return [(r["dT"], r["da"]) for r in self.rows]


def stability(setup, target, sizes, T_hat=None, a_hat=None):
    """Perturb the constructed data by size * ||target|| * bump and rerun."""
    sizes = sorted(float(s) for s in sizes)
    if T_hat is None:
        base = run_auxiliary(target, Plant(setup.grid, setup.region.mask, setup.cfg.p,
                                           setup.sim))
        T_hat, a_hat = base.T_star, base.a_star
    bump = perturbation_bump(setup)
    scale = w2inf_norm(setup.grid, target)
    jobs = [(setup, target + s * scale * bump) for s in sizes]
    if setup.cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=setup.cfg.workers) as pool:
            results = list(pool.map(_aux_row, jobs))
    else:
        results = [_aux_row(j) for j in jobs]
    rows = []
    for s, (ok, T, a, trend, msg), (_, y0) in zip(sizes, results, jobs):
        rows.append({
            "size": s, "norm": w2inf_norm(setup.grid, y0 - target), "converged": bool(ok),
            "T": T, "a": a, "dT": abs(T - T_hat) if ok else float("nan"),
            "da": abs(a - a_hat) if ok else float("nan"),
            "inside_box": bool(ok and abs(T - T_hat) < setup.cfg.epsilon
                               and abs(a - a_hat) < setup.cfg.epsilon),
            "profile_trend_ok": trend, "message": msg,
        })
    return StabilityReport(sizes, rows, T_hat, a_hat)


def recenter_shifts(setup, target, sizes):
    """Mode responses of the recentered data to shifts of the target time and point.

    The baseline is the constructed data at s0 in its own frame (T1, a).
    Returns rows (kind, size, measured shift, leading-order prediction,
    first-order prediction).
    """
    cfg = setup.cfg
    s0, T1, a = cfg.s0, cfg.T1, cfg.a
    pr = setup.profile

    def modes(T, aa):
        sig = s0 - np.log1p((T - T1) * np.exp(s0))
        zg = uniform_z_grid(sig, cfg.K0, cfg.z_spacing)
        psi, _ = recenter(target, target, setup.grid, T, aa, T1, a, s0, cfg.epsilon0, zg, pr)
        return project_modes(psi, zg, sig, cfg.K0)

    base = modes(T1, a)
    # first-order oracle for the alpha response: twice the mode-2 coefficient
    # of w_hat = q_hat + phi at s0
    zg = uniform_z_grid(s0, cfg.K0, cfg.z_spacing)
    phi2 = project_modes(phi(zg, s0, pr), zg, s0, cfg.K0).q2
    lead_tau = pr.kappa / (pr.p - 1.0)
    lead_alpha = -2.0 * pr.b * pr.kappa / ((pr.p - 1.0) ** 2 * s0)
    rows = []
    for size in sorted(sizes):
        m = modes(T1 + size * np.exp(-s0), a)
        rows.append(("tau", size, m.q0 - base.q0, lead_tau * size, lead_tau * size))
    for size in sorted(sizes):
        m = modes(T1, a + size * np.exp(-s0 / 2.0))
        rows.append(("alpha", size, m.q1 - base.q1, lead_alpha * size,
                     2.0 * (base.q2 + phi2) * size))
    return rows


def save_stability(rep, setup, out):
    os.makedirs(out, exist_ok=True)
    keys = ["size", "norm", "converged", "T", "a", "dT", "da", "inside_box",
            "profile_trend_ok"]
    write_csv(os.path.join(out, "stability.csv"), keys,
              ([r[k] if not isinstance(r[k], bool) else int(r[k]) for k in keys]
               for r in rep.rows))
    write_csv(os.path.join(out, "recenter.csv"),
              ["kind", "size", "shift", "leading_order", "first_order"], rep.shifts)
    d = np.array([[r["dT"], r["da"]] for r in rep.rows if r["converged"]])
    monotone = bool(d.size and np.all(np.diff(d, axis=0) >= 0))
    summary = {
        "provenance": provenance(setup.cfg),
        "T_hat": rep.T_hat, "a_hat": rep.a_hat, "rows": rep.rows,
        "deltas_monotone": monotone,
        "recenter": [dict(zip(["kind", "size", "shift", "leading_order", "first_order"], r))
                     for r in rep.shifts],
    }
    write_json(os.path.join(out, "stability.json"), summary)
    return summary
