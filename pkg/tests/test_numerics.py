import numpy as np
import pytest

from heatblowup.errors import ConfigError, DimensionError
from heatblowup.numerics import (
    build_grid,
    build_region,
    cutoff_chi0,
    laplacian_apply,
    laplacian_matrix,
    weighted_quadrature,
)
from heatblowup.profile import gaussian_weight


def test_build_grid_examples():
    g = build_grid(0, 1, 3)
    assert g.h == 0.25
    np.testing.assert_allclose(g.nodes, [0.25, 0.5, 0.75])
    assert build_grid(0, 1, 99).h == pytest.approx(0.01)
    g = build_grid(-1, 1, 199)
    assert g.h == pytest.approx(0.01)
    np.testing.assert_allclose(g.nodes, -g.nodes[::-1], atol=1e-15)


@pytest.mark.parametrize("args", [(1, 0, 10), (0, 0, 10), (0, 1, 2), (0, 1, 2.5)])
def test_build_grid_rejects(args):
    with pytest.raises(ConfigError):
        build_grid(*args)


def test_grid_nodes_read_only():
    g = build_grid(0, 1, 5)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0


def test_region_mask():
    g = build_grid(0, 1, 9)
    r = build_region(g, 0.2, 0.8)
    np.testing.assert_array_equal(r.mask, (g.nodes >= 0.2) & (g.nodes <= 0.8))
    with pytest.raises(ConfigError):
        build_region(g, 0.0, 0.5)
    with pytest.raises(ConfigError):
        build_region(g, 0.01, 0.99)     # covers every node
    with pytest.raises(ConfigError):
        build_region(g, 0.51, 0.52)     # covers no node


def test_laplacian_examples():
    g = build_grid(0, 1, 199)
    assert np.all(laplacian_apply(g, np.zeros(g.n)) == 0)
    x = g.nodes
    lap = laplacian_apply(g, np.sin(np.pi * x))
    exact = -np.pi**2 * np.sin(np.pi * x)
    inner = (x > 0.05) & (x < 0.95)
    assert np.max(np.abs(lap[inner] / exact[inner] - 1)) <= 2e-3
    # x: only the two boundary-adjacent nodes see the zero ghosts
    lap = laplacian_apply(g, x)
    assert np.max(np.abs(lap[1:-1])) < 1e-8
    assert lap[0] == pytest.approx((0.0 - 2 * x[0] + x[1]) / g.h**2)
    assert lap[-1] == pytest.approx((x[-2] - 2 * x[-1]) / g.h**2)
    assert abs(lap[-1]) > 1e3


def test_laplacian_matrix_matches_apply():
    g = build_grid(0, 2, 17)
    f = np.cos(g.nodes) + g.nodes**3
    np.testing.assert_allclose(laplacian_matrix(g) @ f, laplacian_apply(g, f), rtol=1e-13)
    np.testing.assert_allclose(laplacian_matrix(g, dense=True) @ f,
                               laplacian_apply(g, f), rtol=1e-13)


def test_laplacian_dimension_error():
    g = build_grid(0, 1, 10)
    with pytest.raises(DimensionError):
        laplacian_apply(g, np.zeros(9))


def test_cutoff_examples():
    assert cutoff_chi0(0.5) == 1.0
    assert cutoff_chi0(2.5) == 0.0
    assert 0.0 < cutoff_chi0(1.5) < 1.0
    assert cutoff_chi0(1.2) > cutoff_chi0(1.8)
    assert cutoff_chi0(1.5) == pytest.approx(0.5)     # the blend is symmetric about 1.5
    assert cutoff_chi0(-1.0) == 1.0 and cutoff_chi0(2.0) == 0.0


def test_cutoff_c1_at_junctions():
    for xi0 in (1.0, 2.0):
        for d in (1e-3, 1e-4):
            left = (cutoff_chi0(xi0) - cutoff_chi0(xi0 - d)) / d
            right = (cutoff_chi0(xi0 + d) - cutoff_chi0(xi0)) / d
            assert abs(left) < 1e-6 and abs(right) < 1e-6


def test_quadrature_examples():
    z = np.linspace(-12, 12, 4001)
    rho = gaussian_weight(z)
    h = z[1] - z[0]
    assert weighted_quadrature(np.ones_like(z), rho, h) == pytest.approx(1.0, abs=1e-8)
    assert abs(weighted_quadrature(z, rho, h)) <= 1e-10
    assert weighted_quadrature(z**2, rho, h) == pytest.approx(2.0, abs=1e-6)
    assert weighted_quadrature(z**2, rho, z) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(DimensionError):
        weighted_quadrature(z[:-1], rho, h)
