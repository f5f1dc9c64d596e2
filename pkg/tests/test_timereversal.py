import numpy as np
import pytest

from bsdelab import (
    ControlLaw,
    DriverKind,
    LinearFn,
    LQProblem,
    QuadraticFn,
    SingularCovarianceError,
    builtin_2d,
    correction_c,
    fit_scores,
    make_affine_score,
    reverse_step,
    simulate_forward,
    solve_riccati,
    tr_solve,
    uniform_grid,
)
from bsdelab.approx import fit_linear, fit_quadratic
from bsdelab.simulate import brownian_increments


def _raw_problem(A, B, sigma, Q, R, Qf, m0, Sigma0, T):
    arr = lambda a: np.asarray(a, dtype=float)
    return LQProblem(A=arr(A), B=arr(B), sigma=arr(sigma), Q=arr(Q), R=arr(R),
                     Qf=arr(Qf), m0=arr(m0).ravel(), Sigma0=arr(Sigma0), T=float(T))


@pytest.fixture(scope="module")
def setup_2d():
    prob = builtin_2d()
    grid = uniform_grid(4.0, 0.1)
    law = ControlLaw.zero(prob, grid)
    batch = simulate_forward(prob, law, N=400, grid=grid, seed=5)
    scores = fit_scores(prob, batch)
    return prob, grid, law, batch, scores


def test_terminal_identification_bitwise(setup_2d):
    prob, grid, law, batch, scores = setup_2d
    for kind in (DriverKind.VALUE, DriverKind.COSTATE):
        sol = tr_solve(prob, law, batch, scores, kind, seed_backward=77, keep_paths=True)
        rb = sol.reversed
        assert np.array_equal(rb.Xrev[-1], batch.X[-1])
        if kind is DriverKind.VALUE:
            expected = 0.5 * np.sum((batch.X[-1] @ prob.Qf) * batch.X[-1], axis=1)
            assert np.array_equal(rb.Yrev[-1][:, 0], expected)
        else:
            assert np.array_equal(rb.Yrev[-1], batch.X[-1] @ prob.Qf)


def test_reversal_marginal_round_trip():
    prob = builtin_2d()
    grid = uniform_grid(4.0, 0.01)
    law = ControlLaw.zero(prob, grid)
    N = 10_000
    batch = simulate_forward(prob, law, N=N, grid=grid, seed=314)
    scores = fit_scores(prob, batch)
    sol = tr_solve(prob, law, batch, scores, DriverKind.COSTATE,
                   seed_backward=2718, keep_paths=True)
    X0 = sol.reversed.Xrev[0]
    mean_err = np.linalg.norm(X0.mean(axis=0) - prob.m0)
    assert mean_err < 3.0 * np.sqrt(np.trace(prob.Sigma0) / N)
    cov_emp = np.cov(X0.T, ddof=0)
    assert np.linalg.norm(cov_emp - prob.Sigma0) <= 0.1 * np.linalg.norm(prob.Sigma0)


def test_backward_seed_determinism(setup_2d):
    prob, grid, law, batch, scores = setup_2d
    s1 = tr_solve(prob, law, batch, scores, DriverKind.VALUE, seed_backward=123)
    s2 = tr_solve(prob, law, batch, scores, DriverKind.VALUE, seed_backward=123)
    s3 = tr_solve(prob, law, batch, scores, DriverKind.VALUE, seed_backward=124)
    for k in range(grid.K + 1):
        assert np.array_equal(s1.params[k].G, s2.params[k].G)
    assert not np.array_equal(s1.params[0].G, s3.params[0].G)


def test_reverse_step_frozen_dynamics():
    prob = _raw_problem(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((2, 2)),
                        np.eye(2), [[1.0]], np.eye(2), [0.5, 0.5], np.eye(2), 1.0)
    grid = uniform_grid(1.0, 0.25)
    law = ControlLaw.zero(prob, grid)
    zero_score = make_affine_score([0.0, 0.0], np.eye(2), np.zeros((2, 2)))
    x = np.array([[1.0, -2.0], [0.3, 0.4]])
    out = reverse_step(prob, law, 2, zero_score, x, np.ones((2, 2)))
    np.testing.assert_array_equal(out, x)


def test_correction_c_values():
    D = np.eye(2)
    # quadratic with zero score: only the trace term survives
    quad = QuadraticFn(G=np.eye(2), g=0.0)
    zero_score = make_affine_score([0.0, 0.0], np.eye(2), np.zeros((2, 2)))
    c = correction_c(quad, zero_score, D, np.array([[3.0, 1.0]]))
    np.testing.assert_allclose(c, [2.0])

    # at the score's mean the gradient term vanishes for any model
    score = make_affine_score([1.0, -1.0], 0.5 * np.eye(2), D)
    c_at_mean = correction_c(quad, score, D, np.array([[1.0, -1.0]]))
    np.testing.assert_allclose(c_at_mean, [2.0])

    # linear class: zero Hessian, c = -G b row-wise
    rng = np.random.default_rng(0)
    G = rng.standard_normal((2, 2))
    lin = LinearFn(G=G)
    xs = rng.standard_normal((40, 2))
    b = score.eval(xs)
    np.testing.assert_allclose(correction_c(lin, score, D, xs), -b @ G.T, atol=1e-14)


def test_noise_sharing_replay_bitwise(setup_2d):
    # reimplement the backward pass outside the solver; paths agree bitwise
    # only if the same increment drives the state and the Y update
    prob, _, _, _, _ = setup_2d
    grid = uniform_grid(0.6, 0.2)
    law = ControlLaw.zero(prob, grid)
    batch = simulate_forward(prob, law, N=16, grid=grid, seed=9)
    scores = fit_scores(prob, batch)
    seed_b = 555
    K, dt, n = grid.K, grid.dt, prob.n
    sigma = prob.sigma

    sol = tr_solve(prob, law, batch, scores, DriverKind.COSTATE, seed_b, keep_paths=True)
    rb = sol.reversed

    _, dWb = brownian_increments(seed_b, K, batch.N, n, dt)
    Xr = batch.X[K].copy()
    Yr = Xr @ prob.Qf
    G_k = prob.Qf.copy()
    for k in range(K, 0, -1):
        dW = dWb[k - 1]
        b = scores[k].eval(Xr)
        Xprev = Xr - (Xr @ prob.A.T) * dt - b * dt - dW @ sigma.T
        g = Xr @ prob.Q + Yr @ prob.A
        c = -b @ G_k.T
        Ynew = Yr + g * dt + c * dt - dW @ sigma.T @ G_k.T
        fit = fit_linear(Xprev, Ynew)
        assert np.array_equal(rb.Xrev[k - 1], Xprev)
        assert np.array_equal(rb.Yrev[k - 1], fit.value(Xprev))
        assert np.array_equal(sol.params[k - 1].G, fit.G)
        Xr, Yr, G_k = Xprev, fit.value(Xprev), fit.G


def test_noise_sharing_replay_value_kind(setup_2d):
    prob, _, _, _, _ = setup_2d
    grid = uniform_grid(0.6, 0.2)
    law = ControlLaw.zero(prob, grid)
    batch = simulate_forward(prob, law, N=32, grid=grid, seed=10)
    scores = fit_scores(prob, batch)
    seed_b = 556
    K, dt = grid.K, grid.dt
    sigma = prob.sigma
    D = sigma @ sigma.T

    sol = tr_solve(prob, law, batch, scores, DriverKind.VALUE, seed_b, keep_paths=True)
    rb = sol.reversed

    from bsdelab import control_affine_parts, driver_value

    _, Btilde = control_affine_parts(prob)
    _, dWb = brownian_increments(seed_b, K, batch.N, prob.n, dt)
    Xr = batch.X[K].copy()
    Yr = 0.5 * np.sum((Xr @ prob.Qf) * Xr, axis=1)
    Zr = Xr @ prob.Qf @ sigma
    G_k, g_k = prob.Qf.copy(), 0.0
    for k in range(K, 0, -1):
        dW = dWb[k - 1]
        b = scores[k].eval(Xr)
        Xprev = Xr - (Xr @ prob.A.T) * dt - b * dt - dW @ sigma.T
        g = driver_value(prob, Btilde, law.gains[k], Xr, Yr, Zr)
        c = np.trace(D @ G_k) - np.sum((Xr @ G_k) * b, axis=1)
        Ynew = Yr + g * dt + c * dt - np.sum(Zr * dW, axis=1)
        fit = fit_quadratic(Xprev, Ynew)
        assert np.array_equal(rb.Xrev[k - 1], Xprev)
        assert np.array_equal(sol.params[k - 1].G, fit.G)
        Xr = Xprev
        Yr = fit.value(Xprev)
        Zr = Xprev @ fit.G @ sigma
        G_k = fit.G


def test_single_step_recovery_with_exact_score():
    prob = builtin_2d(T=1e-3)
    grid = uniform_grid(1e-3, 1e-3)
    law = ControlLaw.zero(prob, grid)
    N = 10_000
    batch = simulate_forward(prob, law, N=N, grid=grid, seed=21)
    oracle = solve_riccati(prob, grid)
    D = prob.sigma @ prob.sigma.T

    # Euler-exact Gaussian marginal after one step
    F = np.eye(2) + prob.A * grid.dt
    m1 = F @ prob.m0
    S1 = F @ prob.Sigma0 @ F.T + D * grid.dt
    scores = [
        make_affine_score(prob.m0, prob.Sigma0, D),
        make_affine_score(m1, S1, D),
    ]
    for kind in (DriverKind.VALUE, DriverKind.COSTATE):
        sol = tr_solve(prob, law, batch, scores, kind, seed_backward=31)
        assert np.abs(sol.params[0].G - oracle.G[0]).max() < 5e-2


def test_degenerate_diffusion_raises():
    prob = _raw_problem([[0.0, 1.0], [-1.0, -0.1]], [[0.0], [1.0]],
                        np.zeros((2, 2)), np.eye(2), [[1.0]], np.eye(2),
                        [1.0, 0.0], np.zeros((2, 2)), 1.0)
    grid = uniform_grid(1.0, 0.25)
    law = ControlLaw.zero(prob, grid)
    batch = simulate_forward(prob, law, N=50, grid=grid, seed=2)
    with pytest.raises(SingularCovarianceError):
        fit_scores(prob, batch)


def test_scores_fitted_at_all_grid_times(setup_2d):
    prob, grid, law, batch, scores = setup_2d
    assert len(scores) == grid.K + 1
    with pytest.raises(ValueError):
        tr_solve(prob, law, batch, scores[:-1], DriverKind.VALUE, seed_backward=1)


def test_auto_jitter_flag(setup_2d):
    prob, grid, law, batch, _ = setup_2d
    plain = fit_scores(prob, batch)
    jittered = fit_scores(prob, batch, auto=True)
    assert all(s.jitter == 0.0 for s in plain)
    assert all(s.jitter > 0.0 for s in jittered)
    # trace-scaled: tiny relative to the covariance itself
    for s in jittered:
        assert s.jitter < 1e-6 * np.trace(s.Sigma_hat)
