import numpy as np
import pytest

from bsdelab import (
    SingularCovarianceError,
    eval_score,
    fit_affine_score,
    make_affine_score,
    score_matching_objective,
)


def test_two_point_fit_by_hand():
    samples = np.array([[-1.0], [1.0]])
    score = fit_affine_score(samples, D=np.array([[1.0]]))
    assert score.m_hat[0] == 0.0
    assert score.Sigma_hat[0, 0] == pytest.approx(1.0)
    assert eval_score(score, np.array([1.0]))[0] == pytest.approx(1.0)
    assert eval_score(score, np.array([2.0]))[0] == pytest.approx(2.0)


def test_identical_samples_singular():
    samples = np.ones((10, 2))
    with pytest.raises(SingularCovarianceError):
        fit_affine_score(samples, D=np.eye(2))


def test_large_sample_recovers_population_coefficients():
    rng = np.random.default_rng(8)
    m0 = np.array([1.0, -0.5])
    samples = rng.standard_normal((100_000, 2)) + m0
    D = np.eye(2)
    score = fit_affine_score(samples, D)
    # population: b(x) = D I^{-1} (x - m0)
    assert np.abs(score.coef - np.eye(2)).max() < 0.05
    assert np.abs(score.m_hat - m0).max() < 0.05


def test_score_vanishes_at_mean_and_empirical_centering():
    rng = np.random.default_rng(9)
    samples = rng.standard_normal((500, 3)) @ (np.eye(3) + 0.2)
    score = fit_affine_score(samples, D=np.eye(3))
    np.testing.assert_allclose(score.eval(score.m_hat), np.zeros(3), atol=1e-14)
    mean_score = score.eval(samples).mean(axis=0)
    assert np.abs(mean_score).max() < 1e-10


def test_linearity_in_D():
    rng = np.random.default_rng(10)
    samples = rng.standard_normal((200, 2))
    s1 = fit_affine_score(samples, D=np.eye(2))
    s2 = fit_affine_score(samples, D=2.0 * np.eye(2))
    x = np.array([0.7, -0.3])
    np.testing.assert_allclose(s2.eval(x), 2.0 * s1.eval(x), rtol=1e-12)


def test_objective_zero_for_zero_score():
    samples = np.array([[-1.0], [1.0]])
    zero = (lambda x: np.zeros_like(np.atleast_2d(x)), np.zeros((1, 1)))
    assert score_matching_objective(zero, samples, D=np.array([[1.0]])) == 0.0


def test_objective_hand_value_both_signs():
    samples = np.array([[-1.0], [1.0]])
    D = np.array([[1.0]])
    ident = (lambda x: np.atleast_2d(x), np.array([[1.0]]))
    # displayed formula with +trace: (1/2)*1 + 1 = 1.5
    assert score_matching_objective(ident, samples, D, trace_sign=+1.0) == pytest.approx(1.5)
    # minimizing convention (default): (1/2)*1 - 1 = -0.5
    assert score_matching_objective(ident, samples, D) == pytest.approx(-0.5)


def test_closed_form_fit_is_local_minimum():
    rng = np.random.default_rng(11)
    samples = rng.standard_normal((2000, 2)) @ np.array([[1.0, 0.3], [0.0, 0.8]])
    D = np.eye(2)
    score = fit_affine_score(samples, D)
    base = score_matching_objective(score, samples, D)
    coef, off = score.coef, -score.coef @ score.m_hat
    for i in range(2):
        for j in range(2):
            for s in (+0.1, -0.1):
                C = coef.copy()
                C[i, j] *= 1.0 + s
                cand = (lambda x, C=C: np.atleast_2d(x) @ C.T + off, C)
                assert score_matching_objective(cand, samples, D) >= base - 1e-12
        for s in (+0.1, -0.1):
            d = off.copy()
            d[i] = off[i] * (1.0 + s) if off[i] != 0 else 0.1 * s
            cand = (lambda x, d=d: np.atleast_2d(x) @ coef.T + d, coef)
            assert score_matching_objective(cand, samples, D) >= base - 1e-12


def test_translation_invariance_bitwise():
    # dyadic samples, dyadic shift and power-of-two N keep every mean exact
    rng = np.random.default_rng(12)
    samples = np.round(rng.standard_normal((64, 2)) * 4) / 4
    v = np.array([2.5, -1.25])
    s0 = fit_affine_score(samples, D=np.eye(2))
    s1 = fit_affine_score(samples + v, D=np.eye(2))
    assert np.array_equal(s1.m_hat, s0.m_hat + v)
    assert np.array_equal(s1.Sigma_hat, s0.Sigma_hat)
    assert np.array_equal(s1.coef, s0.coef)


def test_make_affine_score_from_exact_moments():
    score = make_affine_score([1.0, 0.0], np.eye(2), 2.0 * np.eye(2))
    np.testing.assert_allclose(score.eval(np.array([2.0, 1.0])), [2.0, 2.0])
