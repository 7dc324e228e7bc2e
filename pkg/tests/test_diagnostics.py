import numpy as np
import pytest

from heatblowup.diagnostics import (
    U_K0,
    fit_quality,
    flat_scale,
    flatness_check,
    intermediate_time,
    profile_error,
    profile_error_series,
    regular_region_bound,
)
from heatblowup.errors import RangeError
from heatblowup.numerics import build_grid
from heatblowup.profile import ProfileParams, profile_f

GRID = build_grid(0, 1, 4001)


def ansatz(t, T, a, pr=ProfileParams(2)):
    Tm = T - t
    width = np.sqrt(Tm * abs(np.log(Tm)))
    return Tm ** (-1 / (pr.p - 1)) * profile_f((GRID.nodes - a) / width, pr)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_profile_error_exact_on_ansatz(p):
    pr = ProfileParams(p)
    T, a, t = 0.1, 0.5, 0.1 - 1e-3
    s = profile_error(ansatz(t, T, a, pr), GRID, t, T, a, 1.0, pr)
    assert s.sup_err <= 1e-14 and s.resolved and s.nodes >= 8
    assert s.Tm_t == pytest.approx(1e-3)


def test_profile_error_constant_offset():
    T, a, t = 0.1, 0.5, 0.1 - 1e-3
    y = ansatz(t, T, a) + (T - t) ** -1 * 1e-3
    s = profile_error(y, GRID, t, T, a)
    assert s.sup_err == pytest.approx(1e-3, rel=1e-9)
    assert s.scaled_err == pytest.approx(1e-3 * np.sqrt(abs(np.log(1e-3))), rel=1e-9)


def test_profile_error_unresolved_and_range():
    coarse = build_grid(0, 1, 101)
    T, t = 0.1, 0.1 - 1e-5
    s = profile_error(np.zeros(coarse.n), coarse, t, T, 0.5)
    assert not s.resolved
    with pytest.raises(RangeError):
        profile_error(np.zeros(coarse.n), coarse, T - 1e-7, T, 0.5)
    series = profile_error_series([0.0, T - 1e-3, T - 1e-7], [np.zeros(coarse.n)] * 3,
                                  coarse, T, 0.5)
    assert [round(x.Tm_t, 9) for x in series] == [1e-3]


def test_flatness_formulas():
    assert U_K0(1.0, 2.0) / U_K0(1.0, 2.0) == 1.0
    assert U_K0(0.0, 2.0, ProfileParams(2)) == pytest.approx(1 / 1.5)
    d = 0.01
    assert flat_scale(0.5 + d, 0.5) == pytest.approx(
        (d**2 / (16 * abs(np.log(d)))) ** -1)


@pytest.mark.parametrize("x0", [0.51, 0.52, 0.55])
def test_intermediate_time_solves_definition(x0):
    T, K0 = 0.1, 1.75
    t0 = intermediate_time(x0, 0.5, T, K0)
    u = T - t0
    assert abs(K0 * np.sqrt(u * abs(np.log(u))) - abs(x0 - 0.5)) <= 1e-10


def test_flatness_range_error():
    T = 0.1
    with pytest.raises(RangeError):
        flatness_check([0.0, 0.01], [np.zeros(GRID.n)] * 2, GRID, 0.51, 0.5, T, 1.75)
    with pytest.raises(RangeError):
        intermediate_time(0.5, 0.5, T, 1.75)


def test_flatness_on_flat_data():
    # a field whose value at x0 follows y*(x0) U(tau)/U(1) exactly
    T, K0, a, x0 = 0.1, 1.75, 0.5, 0.52
    i = np.argmin(np.abs(GRID.nodes - x0))
    x0 = GRID.nodes[i]
    t0 = intermediate_time(x0, a, T, K0)
    ts = np.linspace(t0, T - 1e-6, 20)
    states = []
    for t in ts:
        y = np.zeros(GRID.n)
        tau = (t - t0) / (T - t0)
        y[i] = flat_scale(x0, a) * U_K0(tau, K0) / U_K0(1.0, K0)
        states.append(y)
    rep = flatness_check(ts, states, GRID, x0, a, T, K0)
    assert rep.max_deviation <= 1e-12 and rep.taus[0] == 0.0


def test_regular_region_examples():
    a, e0 = 0.5, 0.24
    rep = regular_region_bound([np.zeros(GRID.n)] * 3, GRID, a, e0, 0.5, 1.0)
    assert rep.ok and rep.worst_slack == 1.0 and rep.first_failure() is None
    x_bad = a + 0.9 * (GRID.x_hi - a)
    bump = 2.0 * np.exp(-((GRID.nodes - x_bad) / 0.01) ** 2)
    rep = regular_region_bound([np.zeros(GRID.n), bump, np.zeros(GRID.n)],
                               GRID, a, e0, 0.5, 1.0)
    assert not rep.ok and rep.first_failure() == 1
    np.testing.assert_array_equal(rep.passed, [True, False, True])
    assert rep.worst_slack == pytest.approx(-1.0, abs=1e-3)


def test_regular_region_monotone_in_mu():
    a, e0 = 0.5, 0.24
    y = np.exp(-((GRID.nodes - a) / 0.05) ** 2) * 3
    results = [regular_region_bound([y], GRID, a, e0, mu, 1.0).ok
               for mu in (0.1, 0.3, 0.5, 0.7, 0.9)]
    first_pass = results.index(True)
    assert all(results[first_pass:])


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_fit_quality_exact_model(p):
    pr = ProfileParams(p)
    t = 0.3 - np.logspace(-2, -6, 200)
    sup = pr.kappa * (0.3 - t) ** (-1 / (p - 1))
    fq = fit_quality(t, sup, p)
    assert fq.kappa_hat == pytest.approx(pr.kappa, rel=1e-10)
    assert fq.T_star == pytest.approx(0.3, abs=1e-12)
    assert fq.residual <= 1e-10


def test_fit_quality_closed_form_and_shift():
    t = 1 - np.logspace(-1, -5, 100)
    fq = fit_quality(t, 1 / (1 - t), 2.0)
    assert fq.kappa_hat == pytest.approx(1.0) and fq.T_star == pytest.approx(1.0)
    shifted = fit_quality(t + 3.25, 1 / (1 - t), 2.0)
    assert shifted.T_star - fq.T_star == pytest.approx(3.25, abs=1e-12)


def test_fit_quality_rejects():
    t = np.linspace(0, 1, 50)
    sup = np.linspace(10, 100, 50)
    sup[-5] = sup[-4]
    with pytest.raises(ValueError):
        fit_quality(t, sup, 2.0)
    with pytest.raises(ValueError):
        fit_quality(t[:5], sup[:5] + np.arange(5), 2.0)
