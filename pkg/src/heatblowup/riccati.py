"""Steering kernel for the phase-1 feedback.

The Riccati solution P with infinite terminal value is handled through its
inverse Q = P^-1, which solves the linear Lyapunov equation

    Q' = Q D + D Q - B B^T,   Q(T_h) = 0,

with D the discrete Dirichlet Laplacian and B the control mask.  Writing
tau = T_h - t and E = exp(D tau) gives Q = E^-1 G E^-1 where

    G(tau) = int_0^tau exp(D r) B B exp(D r) dr

is the controllability Gramian.  For the heat equation E^-1 overflows in
double precision long before tau reaches practical horizons, so the default
("modal") route stores G and evaluates P = E (G + reg I)^-1 E directly,
using the closed-form sine eigenbasis of D.  The "rk4" route integrates Q
itself with step-halving RK4 and is meant for small problems and for
cross-checking.
"""

from dataclasses import dataclass, field
import hashlib
import json

import numpy as np
from scipy import linalg

from heatblowup.errors import ConfigError, RangeError, SolverError
from heatblowup.numerics import laplacian_matrix


def dirichlet_eigensystem(n, h):
    """Eigenvalues and orthonormal eigenvectors of the 3-point Laplacian."""
    k = np.arange(1, n + 1)
    lam = -4.0 / h**2 * np.sin(k * np.pi / (2.0 * (n + 1))) ** 2
    V = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(k, k) * np.pi / (n + 1))
    return lam, V


def _gramian_kernel(lam, tau):
    """(exp((l_i + l_j) tau) - 1) / (l_i + l_j), with the tau limit at 0."""
    L = lam[:, None] + lam[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.expm1(L * tau) / L
    small = np.abs(L * tau) < 1e-14
    return np.where(small, tau + 0.5 * L * tau**2, g)


@dataclass
class RiccatiSolution:
    """Lyapunov solution on [0, T_h] with its feedback evaluator.

    `form` is "gramian" (knots hold G, Q = E^-1 G E^-1) or "Q" (knots hold Q).
    """

    horizon: float
    knots: np.ndarray
    mats: np.ndarray = field(repr=False)
    reg_eps: float
    form: str
    mask: np.ndarray = field(repr=False)
    lam: np.ndarray = field(default=None, repr=False)
    V: np.ndarray = field(default=None, repr=False)
    M: np.ndarray = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.mask.size

    def _check_t(self, t):
        if not 0.0 <= t < self.horizon:
            raise RangeError(
                f"feedback requested at t={t}, valid range is [0, {self.horizon})")

    def _interp(self, t):
        k = int(np.clip(np.searchsorted(self.knots, t, side="right") - 1,
                        0, len(self.knots) - 2))
        t0, t1 = self.knots[k], self.knots[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.mats[k] + w * self.mats[k + 1]

    def gramian(self, t):
        """G(T_h - t); exact in the modal route, interpolated otherwise."""
        if self.form != "gramian":
            raise ConfigError("this solution stores Q, not the Gramian")
        if self.lam is None:
            return self._interp(t)
        tau = self.horizon - t
        return self.V @ (self.M * _gramian_kernel(self.lam, tau)) @ self.V.T

    def Q(self, t):
        """Q(t) = P(t)^-1; may overflow for stiff problems in the gramian form."""
        if self.form == "Q":
            return self._interp(t)
        tau = self.horizon - t
        Einv = self.V @ (np.exp(-self.lam * tau)[:, None] * self.V.T)
        return Einv @ self.gramian(t) @ Einv

    def riccati_P(self, t):
        """Regularized P(t) = (Q + reg I)^-1 (gramian form: E (G + reg I)^-1 E)."""
        self._check_t(t)
        n = self.n
        if self.form == "Q":
            c = linalg.cho_factor(self._interp(t) + self.reg_eps * np.eye(n))
            P = linalg.cho_solve(c, np.eye(n))
        else:
            tau = self.horizon - t
            E = self.V @ (np.exp(self.lam * tau)[:, None] * self.V.T)
            c = linalg.cho_factor(self.gramian(t) + self.reg_eps * np.eye(n))
            P = E @ linalg.cho_solve(c, E)
        return 0.5 * (P + P.T)


def feedback_gain(sol, t):
    """K(t) = B^T P(t), as a dense n x n matrix."""
    return sol.mask[:, None] * sol.riccati_P(t)


@dataclass(frozen=True)
class FeedbackLaw:
    target: np.ndarray
    target_laplacian: np.ndarray
    mask: np.ndarray


def control_value(law, sol, y, t, gain=None):
    """u = -mask * K(t)(y - target) - Laplacian(target)."""
    K = feedback_gain(sol, t) if gain is None else gain
    return -law.mask * (K @ (np.asarray(y) - law.target)) - law.target_laplacian


def _rk4_lyapunov(D, BB, horizon, n_knots, tol, h0=None, max_steps=2_000_000):
    """Integrate dQ/dtau = -(Q D + D Q) + BB from Q = 0 by step-halving RK4.

    Returns Q at the uniform knots tau_k = k horizon / n_knots.
    """
    def rhs(Q):
        DQ = D @ Q
        return -(DQ + DQ.T) + BB

    def rk4(Q, dt):
        k1 = rhs(Q)
        k2 = rhs(Q + 0.5 * dt * k1)
        k3 = rhs(Q + 0.5 * dt * k2)
        k4 = rhs(Q + dt * k3)
        return Q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    taus = np.linspace(0.0, horizon, n_knots + 1)
    out = [np.zeros_like(BB)]
    Q = np.zeros_like(BB)
    tau = 0.0
    dt = h0 if h0 is not None else horizon / n_knots
    steps = 0
    for target in taus[1:]:
        while tau < target * (1 - 1e-14):
            step = min(dt, target - tau)
            full = rk4(Q, step)
            half = rk4(rk4(Q, 0.5 * step), 0.5 * step)
            err = np.max(np.abs(full - half)) / 15.0
            scale = max(1.0, np.max(np.abs(half)))
            steps += 1
            if steps > max_steps or step < 1e-14 * horizon:
                raise SolverError("RK4 step control failed to converge")
            if not np.all(np.isfinite(half)):
                raise SolverError("non-finite Lyapunov state (problem too stiff for RK4)")
            if err <= tol * scale:
                Q = half + (half - full) / 15.0
                Q = 0.5 * (Q + Q.T)
                tau += step
                if err < 0.1 * tol * scale:
                    dt = 2.0 * step
                else:
                    dt = step
            else:
                dt = 0.5 * step
        out.append(Q.copy())
    return taus, np.array(out)


def solve_lyapunov(D, b_diag, horizon, n_knots=64, method="modal", reg_eps=None,
                   tol=1e-12, reg_rel=1e-10, eig=None):
    """Lyapunov/Gramian solution for a symmetric operator D and diagonal B.

    `eig` may supply a precomputed (eigenvalues, orthonormal eigenvectors)
    pair of D for the modal route.
    """
    if not horizon > 0:
        raise ConfigError("horizon must be positive")
    if n_knots < 1:
        raise ConfigError("need at least one knot interval")
    D = np.atleast_2d(np.asarray(D, dtype=float))
    b = np.atleast_1d(np.asarray(b_diag, dtype=float))
    if method == "modal":
        lam, V = eig if eig is not None else linalg.eigh(D)
        M = V.T @ (b[:, None] ** 2 * V)
        taus = np.linspace(0.0, horizon, n_knots + 1)
        mats = np.array([V @ (M * _gramian_kernel(lam, tau)) @ V.T for tau in taus])
        form = "gramian"
    elif method == "rk4":
        lam = V = M = None
        taus, mats = _rk4_lyapunov(D, np.diag(b**2), horizon, n_knots, tol)
        form = "Q"
    else:
        raise ConfigError(f"unknown Lyapunov method {method!r}")
    # knots are physical times t = T_h - tau, stored increasing
    knots = horizon - taus[::-1]
    knots[-1] = horizon
    mats = mats[::-1].copy()
    asym = np.max(np.abs(mats - np.transpose(mats, (0, 2, 1))))
    if asym > 1e-8 * max(1.0, np.max(np.abs(mats))):
        raise SolverError(f"Lyapunov solution lost symmetry ({asym:.2e})")
    if reg_eps is None:
        reg_eps = reg_rel * np.linalg.norm(mats[0], 2)
    return RiccatiSolution(horizon, knots, mats, float(reg_eps), form, b.copy(),
                           lam, V, M, {"method": method, "n_knots": n_knots})


def solve_lyapunov_Q(grid, region, horizon, n_knots=64, method="modal", reg_eps=None,
                     tol=1e-12):
    """Lyapunov solution for the grid Laplacian and the control mask."""
    if n_knots < 64:
        raise ConfigError("use at least 64 knots")
    eig = dirichlet_eigensystem(grid.n, grid.h) if method == "modal" else None
    D = laplacian_matrix(grid, dense=True)
    sol = solve_lyapunov(D, region.mask, horizon, n_knots, method, reg_eps, tol, eig=eig)
    sol.meta.update(grid=grid.signature(), omega=[region.omega_lo, region.omega_hi])
    return sol


def p_form_reference(D, b_diag, horizon, t_eval, gamma=1e9, rtol=1e-11, atol=1e-14):
    """P(t) from the Riccati equation itself with terminal value gamma I.

    Stiff BDF integration backward in time; only sensible for small n.
    """
    from scipy.integrate import solve_ivp

    D = np.atleast_2d(np.asarray(D, dtype=float))
    n = D.shape[0]
    BB = np.diag(np.asarray(b_diag, dtype=float) ** 2)

    def rhs(tau, v):
        P = v.reshape(n, n)
        PD = P @ D
        # dP/dtau = P D + D P - P B B P   (tau = T_h - t)
        return (PD + PD.T - P @ BB @ P).ravel()

    taus = horizon - np.asarray(t_eval, dtype=float)
    order = np.argsort(taus)
    res = solve_ivp(rhs, (0.0, taus[order][-1]), (gamma * np.eye(n)).ravel(),
                    method="BDF", t_eval=taus[order], rtol=rtol, atol=atol)
    if not res.success:
        raise SolverError(res.message)
    out = np.empty((len(taus), n, n))
    out[order] = res.y.T.reshape(-1, n, n)
    return out


# ---- cache file -------------------------------------------------------------

CACHE_VERSION = 1


def grid_hash(grid, region):
    key = f"{grid.signature()}|{region.omega_lo!r}:{region.omega_hi!r}"
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def save_cache(path, sol, grid, region):
    """Write knots and packed upper triangles with a JSON header (.npz)."""
    iu = np.triu_indices(sol.n)
    header = {
        "version": CACHE_VERSION,
        "grid_hash": grid_hash(grid, region),
        "grid": grid.signature(),
        "omega": [region.omega_lo, region.omega_hi],
        "horizon": sol.horizon,
        "reg_eps": sol.reg_eps,
        "form": sol.form,
        "method": sol.meta.get("method"),
        "n_knots": len(sol.knots) - 1,
    }
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)),
                 knots=sol.knots, packed=sol.mats[:, iu[0], iu[1]])


def load_cache(path, grid, region, horizon=None):
    """Read a cache written by save_cache, checking it matches the grid."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        knots = data["knots"]
        packed = data["packed"]
    if header.get("version") != CACHE_VERSION:
        raise ConfigError(f"unsupported cache version {header.get('version')}")
    if header["grid_hash"] != grid_hash(grid, region):
        raise ConfigError("cache was built for a different grid or control region")
    if horizon is not None and not np.isclose(header["horizon"], horizon, rtol=1e-12):
        raise ConfigError(
            f"cache horizon {header['horizon']} does not match requested {horizon}")
    n = grid.n
    iu = np.triu_indices(n)
    mats = np.zeros((len(knots), n, n))
    mats[:, iu[0], iu[1]] = packed
    mats = mats + np.transpose(np.triu(mats, 1), (0, 2, 1))
    lam = V = M = None
    if header["form"] == "gramian":
        lam, V = dirichlet_eigensystem(n, grid.h)
        M = V.T @ (region.mask[:, None] * V)
    return RiccatiSolution(header["horizon"], knots, mats, header["reg_eps"],
                           header["form"], region.mask.copy(), lam, V, M,
                           {"method": header["method"], "n_knots": header["n_knots"],
                            "grid": header["grid"], "omega": header["omega"]})
