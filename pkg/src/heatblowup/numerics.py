"""Uniform grid, Dirichlet Laplacian, quadrature and the smooth cut-off."""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import trapezoid

from heatblowup.errors import ConfigError, DimensionError


@dataclass(frozen=True)
class Grid:
    """Interior nodes of a uniform grid on (x_lo, x_hi).

    Dirichlet boundary values are implicit zeros at x_lo and x_hi.
    """

    x_lo: float
    x_hi: float
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = (self.x_hi - self.x_lo) / (self.n + 1)
        nodes = self.x_lo + h * np.arange(1, self.n + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)

    def signature(self):
        """Short string identifying the grid (used in cache headers)."""
        return f"{self.x_lo!r}:{self.x_hi!r}:{self.n}"


def build_grid(x_lo, x_hi, n):
    x_lo, x_hi = float(x_lo), float(x_hi)
    if not np.isfinite(x_lo) or not np.isfinite(x_hi) or not x_lo < x_hi:
        raise ConfigError(f"degenerate interval ({x_lo}, {x_hi})")
    if int(n) != n or n < 3:
        raise ConfigError(f"need at least 3 interior nodes, got n={n}")
    return Grid(x_lo, x_hi, int(n))


@dataclass(frozen=True)
class ControlRegion:
    omega_lo: float
    omega_hi: float
    mask: np.ndarray = field(repr=False)


def build_region(grid, omega_lo, omega_hi):
    """Indicator of the control region omega on the grid nodes."""
    if not grid.x_lo < omega_lo < omega_hi < grid.x_hi:
        raise ConfigError(
            f"control region ({omega_lo}, {omega_hi}) must lie strictly inside "
            f"({grid.x_lo}, {grid.x_hi})")
    x = grid.nodes
    mask = ((x >= omega_lo) & (x <= omega_hi)).astype(float)
    if mask.min() == mask.max():
        raise ConfigError("control mask is identically 0 or 1 on this grid")
    mask.setflags(write=False)
    return ControlRegion(float(omega_lo), float(omega_hi), mask)


def _check_len(grid, f):
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise DimensionError(f"field has shape {f.shape}, grid has n={grid.n}")
    return f


def laplacian_apply(grid, field):
    """Three-point Laplacian with zero ghost values at both ends."""
    f = _check_len(grid, field)
    out = -2.0 * f
    out[1:] += f[:-1]
    out[:-1] += f[1:]
    return out / grid.h**2


def laplacian_matrix(grid, dense=False):
    """The symmetric tridiagonal matrix of laplacian_apply."""
    n, h2 = grid.n, grid.h**2
    L = sparse.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)],
                     [-1, 0, 1], format="csr") / h2
    return L.toarray() if dense else L


def _g(r):
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = np.exp(-1.0 / r[pos])
    return out


def cutoff_chi0(xi):
    """Smooth cut-off: 1 on |xi| <= 1, 0 on |xi| >= 2.

    In between, g(2-|xi|) / (g(2-|xi|) + g(|xi|-1)) with g(r) = exp(-1/r).
    """
    xi = np.asarray(xi, dtype=float)
    a = np.abs(xi)
    out = np.where(a <= 1.0, 1.0, 0.0)
    mid = (a > 1.0) & (a < 2.0)
    if np.any(mid):
        g1 = _g(2.0 - a[mid])
        g2 = _g(a[mid] - 1.0)
        out = np.asarray(out)
        out[mid] = g1 / (g1 + g2)
    return out[()] if out.ndim == 0 else out


def weighted_quadrature(values, weights, h):
    """Trapezoid rule for the integral of values * weights.

    `h` is either the uniform spacing or the array of sample coordinates.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape:
        raise DimensionError(f"values {v.shape} and weights {w.shape} differ")
    if np.ndim(h) == 0:
        return float(trapezoid(v * w, dx=float(h)))
    x = np.asarray(h, dtype=float)
    if x.shape != v.shape:
        raise DimensionError("coordinate array does not match the samples")
    return float(trapezoid(v * w, x=x))
