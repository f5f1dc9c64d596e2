import numpy as np
import pytest

from bsdelab import (
    LinearFn,
    NonFiniteError,
    QuadraticFn,
    TooFewSamplesError,
    fit_linear,
    fit_quadratic,
)
from bsdelab.approx import n_quad_params, quad_features


def test_quadratic_exact_recovery():
    rng = np.random.default_rng(0)
    G = np.array([[2.0, 1.0], [1.0, 3.0]])
    g = 0.7
    xs = rng.standard_normal((10, 2))
    ys = 0.5 * np.sum((xs @ G) * xs, axis=1) + g
    fit = fit_quadratic(xs, ys)
    np.testing.assert_allclose(fit.G, G, atol=1e-8)
    assert fit.g == pytest.approx(g, abs=1e-8)
    assert not fit.rank_deficient


def test_quadratic_zero_targets():
    rng = np.random.default_rng(1)
    fit = fit_quadratic(rng.standard_normal((20, 2)), np.zeros(20))
    np.testing.assert_allclose(fit.G, 0.0, atol=1e-12)
    assert fit.g == pytest.approx(0.0, abs=1e-12)


def test_quadratic_1d_normal_equations_oracle():
    xs = np.array([-1.0, 0.0, 1.0, 2.0]).reshape(-1, 1)
    eps = 0.01
    ys = 0.5 * xs[:, 0] ** 2 + 1.0 + np.array([eps, -eps, eps, -eps])
    # independent oracle: explicit 2x2 normal equations on [x^2/2, 1]
    A = np.column_stack([0.5 * xs[:, 0] ** 2, np.ones(4)])
    theta = np.linalg.solve(A.T @ A, A.T @ ys)
    fit = fit_quadratic(xs, ys)
    assert fit.G[0, 0] == pytest.approx(theta[0], abs=1e-12)
    assert fit.g == pytest.approx(theta[1], abs=1e-12)


def test_linear_exact_recovery():
    rng = np.random.default_rng(2)
    G = np.array([[0.0, 1.0], [-2.0, -1.0]])
    xs = rng.standard_normal((12, 2))
    Ys = xs @ G.T
    fit = fit_linear(xs, Ys)
    np.testing.assert_allclose(fit.G, G, atol=1e-8)
    assert not fit.rank_deficient

    zero = fit_linear(xs, np.zeros_like(Ys))
    np.testing.assert_allclose(zero.G, 0.0, atol=1e-12)


def test_linear_rank_deficient_minimum_norm():
    # all samples on the 1-D subspace spanned by (1, 1)
    t = np.linspace(-2.0, 2.0, 9)
    xs = np.column_stack([t, t])
    Ys = np.column_stack([2.0 * t, -t])
    fit = fit_linear(xs, Ys)
    assert fit.rank_deficient
    # predictions still correct on the subspace
    np.testing.assert_allclose(fit.value(xs), Ys, atol=1e-10)
    # minimum-norm coefficient: rows split equally across the two columns
    np.testing.assert_allclose(fit.G, [[1.0, 1.0], [-0.5, -0.5]], atol=1e-10)


def test_eval_grad_hess_values():
    f = QuadraticFn(G=np.eye(2), g=0.0)
    assert f.value([3.0, 4.0]) == pytest.approx(12.5)
    np.testing.assert_allclose(f.grad([3.0, 4.0]), [3.0, 4.0])
    np.testing.assert_allclose(f.hess(), np.eye(2))

    g = QuadraticFn(G=np.eye(2), g=0.3)
    assert g.value(np.zeros(2)) == pytest.approx(0.3)
    np.testing.assert_allclose(g.grad(np.zeros(2)), [0.0, 0.0])

    lin = LinearFn(G=np.array([[0.0, 1.0], [-2.0, -1.0]]))
    np.testing.assert_allclose(lin.value(np.zeros(2)), [0.0, 0.0])
    np.testing.assert_allclose(lin.value([1.0, 2.0]), [2.0, -4.0])
    np.testing.assert_allclose(lin.grad(), lin.G)
    assert np.all(lin.hess() == 0.0)


def _central_diff_grad(fn, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    G = rng.standard_normal((3, 3))
    G = 0.5 * (G + G.T)
    f = QuadraticFn(G=G, g=rng.standard_normal())
    for _ in range(20):
        x = rng.standard_normal(3)
        fd = _central_diff_grad(f.value, x)
        assert np.abs(f.grad(x) - fd).max() < 1e-6

    L = LinearFn(G=rng.standard_normal((3, 3)))
    for _ in range(20):
        x = rng.standard_normal(3)
        for r in range(3):
            fd = _central_diff_grad(lambda z: L.value(z)[r], x)
            assert np.abs(L.grad()[r] - fd).max() < 1e-6


def test_residual_orthogonality():
    rng = np.random.default_rng(6)
    xs = rng.standard_normal((50, 2))
    ys = rng.standard_normal(50)
    fit = fit_quadratic(xs, ys)
    A = quad_features(xs)
    resid = ys - fit.value(xs)
    assert np.abs(A.T @ resid).max() <= 1e-8 * np.linalg.norm(ys)

    Ys = rng.standard_normal((50, 2))
    lfit = fit_linear(xs, Ys)
    lresid = Ys - lfit.value(xs)
    assert np.abs(xs.T @ lresid).max() <= 1e-8 * np.linalg.norm(Ys)


def test_fitted_G_exactly_symmetric():
    rng = np.random.default_rng(7)
    xs = rng.standard_normal((30, 3))
    ys = rng.standard_normal(30)
    fit = fit_quadratic(xs, ys)
    assert np.array_equal(fit.G, fit.G.T)


def test_too_few_samples_and_nonfinite():
    xs = np.ones((3, 2))
    with pytest.raises(TooFewSamplesError):
        fit_quadratic(xs, np.ones(3))  # needs n(n+1)/2 + 1 = 4
    with pytest.raises(TooFewSamplesError):
        fit_linear(np.ones((1, 2)), np.ones((1, 2)))
    bad = np.ones((10, 2))
    bad[0, 0] = np.nan
    with pytest.raises(NonFiniteError):
        fit_quadratic(bad, np.ones(10))
    with pytest.raises(NonFiniteError):
        fit_linear(np.ones((10, 2)), bad)


def test_param_count():
    assert n_quad_params(1) == 2
    assert n_quad_params(2) == 4
    assert n_quad_params(20) == 211
