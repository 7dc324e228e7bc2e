"""Similarity variables, the localized field w, q = w - phi and recentering.

A physical field y(x, t) near the point a and the time T is written as
y = (T - t)^(-1/(p-1)) W(z, s) with z = (x - a) e^(s/2), s = -log(T - t).
"""

from dataclasses import dataclass

import numpy as np

from heatblowup.errors import FrameError, GeometryError, RecenterError
from heatblowup.numerics import cutoff_chi0
from heatblowup.profile import ProfileParams, phi

Z_DEFAULT_SPACING = 0.01


@dataclass(frozen=True)
class SimilarityFrame:
    a: float
    T: float
    t: float

    def __post_init__(self):
        if not self.t < self.T:
            raise FrameError(f"physical time t={self.t} is not before T={self.T}")

    @classmethod
    def at_s(cls, a, T, s):
        """Frame whose logarithmic time is s, i.e. t = T - exp(-s)."""
        return cls(a, T, T - np.exp(-s))

    @property
    def s(self):
        return -np.log(self.T - self.t)

    @property
    def scale(self):
        return (self.T - self.t) ** -0.5


def _exponent(params):
    p = params.p if isinstance(params, ProfileParams) else float(params)
    return 1.0 / (p - 1.0)


def to_similarity(y, grid, frame, params=ProfileParams()):
    """Return (z, W) on the physical nodes; no interpolation."""
    z = frame.scale * (grid.nodes - frame.a)
    W = (frame.T - frame.t) ** _exponent(params) * np.asarray(y, dtype=float)
    return z, W


def from_similarity(W, frame, params=ProfileParams()):
    return (frame.T - frame.t) ** (-_exponent(params)) * np.asarray(W, dtype=float)


def z_bounds(grid, frame):
    """Images of the domain endpoints in the z variable."""
    return (frame.scale * (grid.x_lo - frame.a), frame.scale * (grid.x_hi - frame.a))


def uniform_z_grid(s, K0, dz=Z_DEFAULT_SPACING):
    """Symmetric uniform grid covering [-Z, Z], Z = max(12, 2 K0 sqrt(s) + 2)."""
    zmax = max(12.0, 2.0 * K0 * np.sqrt(s) + 2.0)
    m = int(np.ceil(zmax / dz))
    return dz * np.arange(-m, m + 1)


def monitor_z_grid(grid, frame, K0, dz=Z_DEFAULT_SPACING):
    """Fine uniform core plus the physical nodes (and domain ends) beyond it.

    The core resolves the mode integrals; the outer points let sup-norm
    checks on the outer part see every grid value.
    """
    core = uniform_z_grid(frame.s, K0, dz)
    zn = frame.scale * (grid.nodes - frame.a)
    zlo, zhi = z_bounds(grid, frame)
    left = np.concatenate(([zlo], zn[zn < core[0]]))
    right = np.concatenate((zn[zn > core[-1]], [zhi]))
    return np.concatenate((left[left < core[0]], core, right[right > core[-1]]))


def localize_w(W, z, s, epsilon0, z_out, bounds=None):
    """w = W chi0(z e^(-s/2) / epsilon0), resampled onto z_out.

    W is given at the physical nodes z (uniform); Dirichlet zeros sit at the
    domain ends `bounds` (inferred from the node spacing when omitted).
    w vanishes outside the image of the domain.
    """
    z = np.asarray(z, dtype=float)
    if bounds is None:
        dz = z[1] - z[0]
        bounds = (z[0] - dz, z[-1] + dz)
    zlo, zhi = bounds
    reach = 2.0 * epsilon0 * np.exp(s / 2.0)
    if zlo > -reach * (1 + 1e-12) or zhi < reach * (1 - 1e-12):
        raise GeometryError(
            "cut-off window (a - 2 epsilon0, a + 2 epsilon0) leaves the domain")
    zz = np.concatenate(([zlo], z, [zhi]))
    WW = np.concatenate(([0.0], np.asarray(W, dtype=float), [0.0]))
    z_out = np.asarray(z_out, dtype=float)
    Wi = np.interp(z_out, zz, WW, left=0.0, right=0.0)
    return Wi * cutoff_chi0(z_out * np.exp(-s / 2.0) / epsilon0)


def q_of_w(w, z, s, params=ProfileParams()):
    return np.asarray(w, dtype=float) - phi(z, s, params)


def field_to_q(y, grid, frame, epsilon0, z_out, params=ProfileParams()):
    """Physical field -> q = w - phi on z_out at the frame's similarity time."""
    z, W = to_similarity(y, grid, frame, params)
    w = localize_w(W, z, frame.s, epsilon0, z_out, z_bounds(grid, frame))
    return q_of_w(w, z_out, frame.s, params)


@dataclass(frozen=True)
class RecenterParams:
    tau: float
    alpha: float
    s0: float

    @classmethod
    def from_targets(cls, T, a, T_hat, a_hat, s0):
        return cls((T - T_hat) * np.exp(s0), (a - a_hat) * np.exp(s0 / 2.0), s0)

    @property
    def sigma0(self):
        return self.s0 - np.log1p(self.tau)

    def z_tilde(self, z):
        return np.asarray(z) * np.sqrt(1.0 + self.tau) + self.alpha

    def validate(self):
        if abs(self.tau) > 1.0 / 16.0 or abs(self.alpha) > 0.25:
            raise RecenterError(
                f"need |tau| <= 1/16 and |alpha| <= 1/4, got tau={self.tau:.3g}, "
                f"alpha={self.alpha:.3g}")
        if not self.sigma0 > 0:
            raise RecenterError("sigma0 must be positive")


def _sample(field, grid, x):
    """Piecewise-linear interpolant of a grid field with Dirichlet zeros."""
    xx = np.concatenate(([grid.x_lo], grid.nodes, [grid.x_hi]))
    ff = np.concatenate(([0.0], np.asarray(field, dtype=float), [0.0]))
    return np.interp(x, xx, ff, left=0.0, right=0.0)


def recenter(y, y_hat, grid, T, a, T_hat, a_hat, s0, epsilon0, z_out,
             params=ProfileParams()):
    """Perturbation q for the target (T, a) at sigma0, built from (T_hat, a_hat).

    y and y_hat are both given at the physical time T_hat - exp(-s0).  The
    result is expressed through the baseline quantities (q_hat, phi) at z_tilde
    and the difference y - y_hat, then shifted to the new profile phi(., sigma0).
    """
    rp = RecenterParams.from_targets(T, a, T_hat, a_hat, s0)
    rp.validate()
    pr = params if isinstance(params, ProfileParams) else ProfileParams(params)
    e = _exponent(pr)
    sig = rp.sigma0
    z = np.asarray(z_out, dtype=float)
    zt = rp.z_tilde(z)
    chi_new = cutoff_chi0(z * np.exp(-sig / 2.0) / epsilon0)
    chi_old = cutoff_chi0(zt * np.exp(-s0 / 2.0) / epsilon0)
    x_hat = np.exp(-s0 / 2.0) * zt + a_hat
    x_new = z * np.exp(-sig / 2.0) + a
    yh = np.asarray(y_hat, dtype=float)
    eps_tilde = np.asarray(y, dtype=float) - yh
    # baseline w_hat = q_hat + phi at (z_tilde, s0)
    w_hat = np.exp(-s0 * e) * _sample(yh, grid, x_hat) * chi_old
    bracket = w_hat + np.exp(-s0 * e) * _sample(eps_tilde, grid, x_hat) * chi_new
    out = ((1.0 + rp.tau) ** e * bracket - phi(z, sig, pr)
           + np.exp(-sig * e) * _sample(yh, grid, x_new) * (chi_new - chi_old))
    inside = (x_new > grid.x_lo) & (x_new < grid.x_hi)
    return np.where(inside, out, -phi(z, sig, pr)), rp


def recenter_direct(y, grid, T, a, T_hat, s0, epsilon0, z_out, params=ProfileParams()):
    """Same quantity as `recenter`, by composing the frame maps at (a, T)."""
    sig = s0 - np.log1p((T - T_hat) * np.exp(s0))
    frame = SimilarityFrame.at_s(a, T, sig)
    return field_to_q(y, grid, frame, epsilon0, z_out, params)
