"""Affine score models fitted from empirical moments.

For a Gaussian marginal the drift correction of the reversed dynamics is
affine, b(x) = D Sigma^{-1} (x - m) with D = sigma sigma', so the empirical
minimizer over the affine class is available in closed form from the sample
mean and covariance.  The score-matching objective itself is exposed for
validation only; fitting always uses the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularCovarianceError, TooFewSamplesError

COND_LIMIT = 1e12


@dataclass(frozen=True)
class AffineScore:
    """b(x) = coef @ (x - m_hat) with coef = D (Sigma_hat + jitter I)^{-1}."""

    m_hat: np.ndarray
    Sigma_hat: np.ndarray
    D: np.ndarray
    jitter: float
    coef: np.ndarray

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.m_hat) @ self.coef.T

    def jacobian(self) -> np.ndarray:
        return self.coef


def make_affine_score(m, Sigma, D, jitter: float = 0.0) -> AffineScore:
    """Build a score model from given moments (no fitting)."""
    m = np.asarray(m, dtype=float).ravel()
    Sigma = np.asarray(Sigma, dtype=float)
    D = np.asarray(D, dtype=float)
    n = m.size
    Sj = 0.5 * (Sigma + Sigma.T) + jitter * np.eye(n)
    cond = np.linalg.cond(Sj)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularCovarianceError(
            f"covariance condition estimate {cond:.3e} exceeds {COND_LIMIT:.0e}"
        )
    coef = np.linalg.solve(Sj, D.T).T
    return AffineScore(m_hat=m, Sigma_hat=0.5 * (Sigma + Sigma.T), D=D, jitter=float(jitter), coef=coef)


def fit_affine_score(samples: np.ndarray, D: np.ndarray, jitter: float = 0.0) -> AffineScore:
    """Closed-form affine fit from the sample mean and MLE covariance.

    The covariance uses the 1/N normalization.  A numerically singular
    Sigma_hat + jitter I (condition estimate above 1e12) is surfaced as
    SingularCovarianceError rather than silently regularized.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    N = samples.shape[0]
    if N < 2:
        raise TooFewSamplesError("score fit needs at least 2 samples")
    m = samples.mean(axis=0)
    centered = samples - m
    Sigma = centered.T @ centered / N
    return make_affine_score(m, Sigma, D, jitter)


def auto_jitter(samples: np.ndarray) -> float:
    """Trace-scaled regularizer 1e-9 * tr(Sigma_hat)/n used when the jitter
    flag is on."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    return 1e-9 * float(samples.var(axis=0).mean())


def eval_score(score: AffineScore, x):
    """D (Sigma_hat + jitter I)^{-1} (x - m_hat)."""
    return score.eval(x)


def score_matching_objective(score_fn, samples, D, trace_sign: float = -1.0):
    """Empirical objective (1/N) sum_i [ (1/2)||b(x_i)||^2 + s tr(D J(x_i)) ].

    With the default s = -1 the affine minimizer is the closed-form fit
    b = D Sigma_hat^{-1}(x - m_hat); pass trace_sign=+1 for the variant with
    the opposite trace sign.  `score_fn` is either an AffineScore or a pair
    (fn, jac) where fn maps a batch to values and jac is a constant Jacobian
    matrix or a callable returning per-sample Jacobians.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    D = np.asarray(D, dtype=float)
    if isinstance(score_fn, AffineScore):
        vals = score_fn.eval(samples)
        jac = score_fn.jacobian()
    else:
        fn, jac = score_fn
        vals = np.asarray(fn(samples), dtype=float)
    quad = 0.5 * np.mean(np.sum(vals**2, axis=1))
    if callable(jac):
        traces = [np.trace(D @ np.asarray(jac(x))) for x in samples]
        tr = float(np.mean(traces))
    else:
        tr = float(np.trace(D @ np.asarray(jac, dtype=float)))
    return float(quad + trace_sign * tr)
