"""Blowup profile, Gaussian-weighted Hermite system and the shrinking set.

Everything here lives in similarity variables: z is the rescaled space
variable and s = -log(T - t) the logarithmic time.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np

from heatblowup.errors import ConfigError, CoverageError, DimensionError
from heatblowup.numerics import cutoff_chi0, weighted_quadrature


@dataclass(frozen=True)
class ProfileParams:
    p: float = 2.0

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError(f"exponent p must exceed 1, got {self.p}")

    @property
    def kappa(self):
        return (self.p - 1.0) ** (-1.0 / (self.p - 1.0))

    @property
    def b(self):
        return (self.p - 1.0) ** 2 / (4.0 * self.p)


def _params(params):
    return params if isinstance(params, ProfileParams) else ProfileParams(float(params))


def profile_f(eta, params=ProfileParams()):
    """f(eta) = (p - 1 + b eta^2)^(-1/(p-1))."""
    pr = _params(params)
    eta = np.asarray(eta, dtype=float)
    return (pr.p - 1.0 + pr.b * eta**2) ** (-1.0 / (pr.p - 1.0))


def profile_f_prime(eta, params=ProfileParams()):
    pr = _params(params)
    eta = np.asarray(eta, dtype=float)
    return -(2.0 * pr.b * eta / (pr.p - 1.0)) * profile_f(eta, pr) ** pr.p


def _check_s(s):
    if np.any(np.asarray(s) <= 1.0):
        raise ConfigError(f"similarity time must exceed 1, got s={s}")


def phi(z, s, params=ProfileParams()):
    """Corrected profile f(z/sqrt(s)) + kappa/(2ps)."""
    _check_s(s)
    pr = _params(params)
    z = np.asarray(z, dtype=float)
    return profile_f(z / np.sqrt(s), pr) + pr.kappa / (2.0 * pr.p * s)


def potential_V(z, s, params=ProfileParams()):
    pr = _params(params)
    return pr.p * phi(z, s, pr) ** (pr.p - 1.0) - pr.p / (pr.p - 1.0)


def nonlinear_B(q, z, s, params=ProfileParams()):
    """Quadratic remainder |phi+q|^(p-1)(phi+q) - phi^p - p phi^(p-1) q."""
    pr = _params(params)
    ph = phi(z, s, pr)
    w = ph + np.asarray(q, dtype=float)
    return np.abs(w) ** (pr.p - 1.0) * w - ph**pr.p - pr.p * ph ** (pr.p - 1.0) * q


def residual_R(z, s, params=ProfileParams()):
    """How far phi is from solving the similarity equation, in closed form."""
    _check_s(s)
    pr = _params(params)
    p, b = pr.p, pr.b
    z = np.asarray(z, dtype=float)
    rs = np.sqrt(s)
    xi = z / rs
    f = profile_f(xi, pr)
    f1 = profile_f_prime(xi, pr)
    f2 = -(2.0 * b / (p - 1.0)) * (f**p + p * xi * f ** (p - 1.0) * f1)
    ph = f + pr.kappa / (2.0 * p * s)
    ph_z = f1 / rs
    ph_zz = f2 / s
    ph_s = -f1 * z / (2.0 * s * rs) - pr.kappa / (2.0 * p * s**2)
    return ph_zz - 0.5 * z * ph_z - ph / (p - 1.0) + ph**p - ph_s


def gaussian_weight(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-(z**2) / 4.0) / np.sqrt(4.0 * np.pi)


def hermite_h(m, z):
    """Eigenfunction of d^2 - (z/2) d + 1 with eigenvalue 1 - m/2."""
    if m < 0:
        raise ValueError("mode index must be nonnegative")
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for j in range(m // 2 + 1):
        c = factorial(m) / (factorial(j) * factorial(m - 2 * j))
        out = out + c * (-1) ** j * z ** (m - 2 * j)
    return out


def linear_operator_L(w, z):
    """d^2 w - (z/2) dw + w by central differences on a uniform z-grid.

    The two end values use second-order one-sided differences.
    """
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    if w.shape != z.shape or w.size < 4:
        raise ValueError("w and z must be equal-length arrays with at least 4 samples")
    dz = z[1] - z[0]
    d1 = np.gradient(w, dz, edge_order=2)
    d2 = np.empty_like(w)
    d2[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / dz**2
    d2[0] = (2.0 * w[0] - 5.0 * w[1] + 4.0 * w[2] - w[3]) / dz**2
    d2[-1] = (2.0 * w[-1] - 5.0 * w[-2] + 4.0 * w[-3] - w[-4]) / dz**2
    return d2 - 0.5 * z * d1 + w


def dual_k(m, z):
    """h_m normalized so that the rho-weighted pairing with h_m is 1."""
    return hermite_h(m, z) / (2.0**m * factorial(m))


def cutoff_chi1(z, s, K0):
    return cutoff_chi0(np.abs(np.asarray(z, dtype=float)) / (K0 * np.sqrt(s)))


@dataclass(frozen=True)
class SpectralDecomposition:
    q0: float
    q1: float
    q2: float
    q_minus: np.ndarray
    q_e: np.ndarray
    s: float
    K0: float

    def reconstruct(self, z_grid):
        """q_0 h_0 + q_1 h_1 + q_2 h_2 + q_minus (equals chi_1 q)."""
        return (self.q0 + self.q1 * hermite_h(1, z_grid)
                + self.q2 * hermite_h(2, z_grid) + self.q_minus)


def project_modes(q, z_grid, s, K0):
    """Split q into the three leading modes, the remainder and the outer part.

    The mode integrals use the trapezoid rule on z_grid, which may be
    nonuniform outside the support of chi_1.
    """
    q = np.asarray(q, dtype=float)
    z = np.asarray(z_grid, dtype=float)
    if q.shape != z.shape:
        raise DimensionError("q and z_grid differ in shape")
    reach = 2.0 * K0 * np.sqrt(s) + 2.0
    if z[0] > -reach or z[-1] < reach:
        raise CoverageError(
            f"z-grid [{z[0]:.3g}, {z[-1]:.3g}] does not cover +-{reach:.3g}")
    chi1 = cutoff_chi1(z, s, K0)
    qb = chi1 * q
    rho = gaussian_weight(z)
    coeffs = [weighted_quadrature(dual_k(m, z) * qb, rho, z) for m in range(3)]
    q_minus = qb - sum(c * hermite_h(m, z) for m, c in enumerate(coeffs))
    return SpectralDecomposition(coeffs[0], coeffs[1], coeffs[2], q_minus,
                                 (1.0 - chi1) * q, float(s), float(K0))


@dataclass(frozen=True)
class ShrinkingSetParams:
    K0: float = 1.75
    epsilon0: float = 0.24
    A: float = 20.0
    mu: float = 0.5
    eta0: float = 1.0

    def __post_init__(self):
        if self.K0 < 1 or self.epsilon0 <= 0 or self.A <= 0:
            raise ConfigError("need K0 >= 1, epsilon0 > 0, A > 0")
        if not 0 < self.mu < 1 or not 0 < self.eta0 <= 1:
            raise ConfigError("need mu in (0,1) and eta0 in (0,1]")


BOUND_NAMES = ("q0", "q1", "q2", "q_minus", "q_e")


@dataclass(frozen=True)
class MembershipReport:
    """Each bound as (value, limit); slack = 1 - value/limit."""

    s: float
    values: dict
    limits: dict

    @property
    def ratios(self):
        return {k: self.values[k] / self.limits[k] for k in BOUND_NAMES}

    @property
    def slacks(self):
        return {k: 1.0 - r for k, r in self.ratios.items()}

    @property
    def passed(self):
        return {k: self.values[k] <= self.limits[k] for k in BOUND_NAMES}

    @property
    def ok(self):
        return all(self.passed.values())

    def first_failure(self):
        """Name of the most violated bound, or None."""
        bad = {k: r for k, r in self.ratios.items() if r > 1.0}
        return max(bad, key=bad.get) if bad else None


def membership_limits(s, A):
    return {
        "q0": A / s**2,
        "q1": A / s**2,
        "q2": A**2 * np.log(s) / s**2,
        "q_minus": A / s**2,
        "q_e": A**2 / np.sqrt(s),
    }


def shrinking_membership(dec, z_grid, params, s, A=None):
    """Check the five bounds of the shrinking set at similarity time s.

    The q_minus entry is the sup of |q_minus| / (1 + |z|^3); its limit is
    A / s^2.  Passing `A` overrides params.A (used for the tighter bounds
    satisfied by the initial data).
    """
    A = params.A if A is None else A
    z = np.asarray(z_grid, dtype=float)
    values = {
        "q0": abs(dec.q0),
        "q1": abs(dec.q1),
        "q2": abs(dec.q2),
        "q_minus": float(np.max(np.abs(dec.q_minus) / (1.0 + np.abs(z) ** 3))),
        "q_e": float(np.max(np.abs(dec.q_e))) if dec.q_e.size else 0.0,
    }
    return MembershipReport(float(s), values, membership_limits(s, A))
