import numpy as np
import pytest
from scipy.integrate import solve_ivp

from heatblowup.errors import ConfigError, RangeError
from heatblowup.numerics import build_grid, build_region, laplacian_apply, laplacian_matrix
from heatblowup.riccati import (
    FeedbackLaw,
    control_value,
    dirichlet_eigensystem,
    feedback_gain,
    load_cache,
    p_form_reference,
    save_cache,
    solve_lyapunov,
    solve_lyapunov_Q,
)


def q_closed(lam, t, Th):
    if lam == 0:
        return Th - t
    return (1 - np.exp(2 * lam * (t - Th))) / (2 * lam)


@pytest.mark.parametrize("method", ["modal", "rk4"])
@pytest.mark.parametrize("lam", [0.0, 1.0, -1.0])
def test_scalar_surrogate_closed_form(method, lam):
    Th = 1.0
    sol = solve_lyapunov([[lam]], [1.0], Th, n_knots=64, method=method)
    ts = np.linspace(0, Th * 0.999, 23)
    if method == "rk4":
        ts = sol.knots[:-1]        # knot values themselves
    for t in ts:
        assert sol.Q(t)[0, 0] == pytest.approx(q_closed(lam, t, Th), abs=1e-8)


def test_scalar_gain_closed_form():
    sol = solve_lyapunov([[0.0]], [1.0], 2.0, reg_eps=0.0)
    for t in (0.0, 0.5, 1.9, 1.999):
        assert feedback_gain(sol, t)[0, 0] == pytest.approx(1 / (2.0 - t), rel=1e-10)
    with pytest.raises(RangeError):
        feedback_gain(sol, 2.0)
    with pytest.raises(RangeError):
        feedback_gain(sol, -0.1)


@pytest.mark.parametrize("lam", [0.0, 1.0, -1.0])
def test_scalar_closed_loop_steering(lam):
    Th, y0 = 1.0, 0.7
    sol = solve_lyapunov([[lam]], [1.0], Th, reg_eps=0.0)

    def rhs(t, y):
        return lam * y - feedback_gain(sol, t)[0, 0] * y

    t_end = 0.99 * Th
    res = solve_ivp(rhs, (0, t_end), [y0], rtol=1e-11, atol=1e-13, dense_output=True)
    ts = np.linspace(0, t_end, 12)
    # y = y0 exp(-lam t) Q(t)/Q(0), which is y0 (Th - t)/Th when lam = 0
    exact = y0 * np.exp(-lam * ts) * np.array([q_closed(lam, t, Th) for t in ts]) \
        / q_closed(lam, 0.0, Th)
    np.testing.assert_allclose(res.sol(ts)[0], exact, atol=1e-6)
    if lam == 0:
        np.testing.assert_allclose(res.sol(ts)[0], y0 * (Th - ts) / Th, atol=1e-6)


def _small_problem(n=15):
    g = build_grid(0, 1, n)
    r = build_region(g, 0.3, 0.7)
    return g, r


def test_modal_and_rk4_agree():
    g, r = _small_problem()
    Th = 0.05
    a = solve_lyapunov_Q(g, r, Th, 64, method="modal")
    b = solve_lyapunov_Q(g, r, Th, 64, method="rk4")
    np.testing.assert_allclose(a.knots, b.knots, rtol=0, atol=1e-15)
    for t in b.knots[:-1:8]:
        Qa, Qb = a.Q(t), b.Q(t)
        assert np.max(np.abs(Qa - Qb)) <= 1e-8 * max(1.0, np.max(np.abs(Qb)))


def _check_q_order(sol, tol):
    mins = []
    for k in range(len(sol.knots)):
        Q = sol.mats[k]
        assert np.max(np.abs(Q - Q.T)) <= 1e-8
        mins.append(np.linalg.eigvalsh(Q).min())
        if k + 1 < len(sol.knots):
            assert np.linalg.eigvalsh(Q - sol.mats[k + 1]).min() >= -1e-8
    assert min(mins) >= -tol
    return mins


def test_q_form_structure():
    # a long domain keeps exp(-D tau) representable, so Q itself is storable
    g = build_grid(0, 10, 31)
    r = build_region(g, 3, 7)
    sol = solve_lyapunov_Q(g, r, 0.05, 64, method="rk4")
    # partial control: the Gramian is numerically singular, PSD to round-off
    _check_q_order(sol, 1e-12 * np.abs(sol.mats[0]).max())
    # full control: strictly SPD before T_h and degenerating at T_h
    D = laplacian_matrix(g, dense=True)
    full = solve_lyapunov(D, np.ones(g.n), 0.05, 64, method="rk4")
    mins = _check_q_order(full, 0.0)
    assert all(m > 0 for m in mins[:-1])
    assert mins[-1] == 0.0
    assert np.all(np.diff(mins) < 0)


def test_gramian_structure_on_stiff_grid():
    # Q = E^-1 G E^-1 overflows here; the stored Gramian carries the same order
    g, r = _small_problem(61)
    sol = solve_lyapunov_Q(g, r, 0.1, 64)
    for k in range(len(sol.knots) - 1):
        G0, G1 = sol.mats[k], sol.mats[k + 1]
        assert np.max(np.abs(G0 - G0.T)) <= 1e-12
        assert np.linalg.eigvalsh(G0 - G1).min() >= -1e-12 * np.abs(G0).max()
    assert np.linalg.eigvalsh(sol.mats[0]).min() >= -1e-12 * np.abs(sol.mats[0]).max()
    assert not sol.mats[-1].any()


def test_gain_bounded_at_start():
    g, r = _small_problem(31)
    sol = solve_lyapunov_Q(g, r, 0.05, 64)
    K0 = feedback_gain(sol, 0.0)
    K1 = feedback_gain(sol, 0.05 * 0.99)
    assert np.all(np.isfinite(K0))
    assert np.linalg.norm(K0, 2) < np.linalg.norm(K1, 2)


def test_q_form_matches_riccati_p_form():
    g = build_grid(0, 10, 5)
    r = build_region(g, 3, 7)
    D = laplacian_matrix(g, dense=True)
    Th = 0.5
    sol = solve_lyapunov(D, r.mask + 0.5 * (r.mask == 0), Th, 64, method="rk4")
    idx = [0, 20, 51]                    # knots up to T_h - 0.1
    assert sol.knots[idx[-1]] <= Th - 0.1
    Ps = p_form_reference(D, r.mask + 0.5 * (r.mask == 0), Th, sol.knots[idx])
    for k, P in zip(idx, Ps):
        Q = sol.mats[k]
        assert np.max(np.abs(np.linalg.inv(P) - Q)) <= 1e-4 * np.max(np.abs(Q))


def test_control_value_examples():
    g, r = _small_problem(31)
    sol = solve_lyapunov_Q(g, r, 0.05, 64)
    target = np.sin(np.pi * (g.nodes - 0.3) / 0.4) ** 2 * r.mask
    lap = laplacian_apply(g, target)
    law = FeedbackLaw(target, lap, r.mask)
    np.testing.assert_allclose(control_value(law, sol, target, 0.01), -lap)
    zero = FeedbackLaw(np.zeros(g.n), np.zeros(g.n), r.mask)
    assert not control_value(zero, sol, np.zeros(g.n), 0.01).any()
    u = control_value(law, sol, np.ones(g.n), 0.01) + lap
    assert not u[r.mask == 0].any()


def test_dirichlet_eigensystem():
    g = build_grid(0, 1, 20)
    lam, V = dirichlet_eigensystem(g.n, g.h)
    D = laplacian_matrix(g, dense=True)
    np.testing.assert_allclose(D @ V, V * lam, atol=1e-9)
    np.testing.assert_allclose(V.T @ V, np.eye(g.n), atol=1e-12)


def test_cache_round_trip(tmp_path):
    g, r = _small_problem(31)
    for method in ("modal", "rk4"):
        sol = solve_lyapunov_Q(g, r, 0.05, 64, method=method)
        path = tmp_path / f"{method}.npz"
        save_cache(path, sol, g, r)
        back = load_cache(path, g, r, horizon=0.05)
        assert back.form == sol.form and back.reg_eps == sol.reg_eps
        np.testing.assert_allclose(back.mats, sol.mats, rtol=0, atol=1e-14 * np.abs(sol.mats).max())
        np.testing.assert_allclose(feedback_gain(back, 0.02), feedback_gain(sol, 0.02))
    with pytest.raises(ConfigError):
        load_cache(path, g, r, horizon=0.06)
    other = build_region(g, 0.2, 0.7)
    with pytest.raises(ConfigError):
        load_cache(path, g, other)


def test_solver_validation():
    g, r = _small_problem()
    with pytest.raises(ConfigError):
        solve_lyapunov_Q(g, r, 0.05, 32)
    with pytest.raises(ConfigError):
        solve_lyapunov([[0.0]], [1.0], 0.0)
    with pytest.raises(ConfigError):
        solve_lyapunov([[0.0]], [1.0], 1.0, method="euler")
