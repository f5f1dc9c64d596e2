"""Parametric function classes for the BSDE regressions.

Two classes are implemented: symmetric quadratic plus constant,
x -> (1/2) x'Gx + g, used for the scalar value recursion, and linear,
x -> Gx with unconstrained G, used for the vector co-state recursion.
Fitting is ordinary least squares through a rank-revealing factorization;
on rank deficiency the minimum-norm solution is returned and flagged rather
than raised, so that deliberately tiny sample sizes can be studied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, TooFewSamplesError


@dataclass(frozen=True)
class QuadraticFn:
    """x -> (1/2) x'Gx + g with G symmetric."""

    G: np.ndarray
    g: float
    rank_deficient: bool = False

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum((x @ self.G) * x, axis=-1) + self.g

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.G.T

    def hess(self, x=None):
        return self.G


@dataclass(frozen=True)
class LinearFn:
    """x -> Gx with unconstrained square G (no offset)."""

    G: np.ndarray
    rank_deficient: bool = False

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.G.T

    def grad(self, x=None):
        # Jacobian, constant in x
        return self.G

    def hess(self, x=None):
        n = self.G.shape[0]
        return np.zeros((n, n, n))


def n_quad_params(n: int) -> int:
    return n * (n + 1) // 2 + 1


def _lstsq_minnorm(A: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, int]:
    """Minimum-norm least squares via eigendecomposition of the Gram matrix.

    The eigendecomposition reveals rank through the cutoff
    w > w_max * max(A.shape) * eps; directions below it are dropped, which
    yields the minimum-norm solution on deficiency.  Several times faster
    than LAPACK's gelsd at the feature counts used here; the squared
    conditioning is harmless at the design conditioning these regressions
    produce (exactly collinear designs still factor cleanly).
    """
    AtA = A.T @ A
    AtY = A.T @ Y
    w, V = np.linalg.eigh(AtA)
    if w.size == 0 or w[-1] <= 0.0:
        return np.zeros_like(AtY, dtype=float), 0
    keep = w > w[-1] * max(A.shape) * np.finfo(float).eps
    rank = int(np.count_nonzero(keep))
    Vk = V[:, keep]
    wk = w[keep]
    proj = Vk.T @ AtY
    coef = Vk @ (proj / (wk if AtY.ndim == 1 else wk[:, None]))
    return coef, rank


def quad_features(xs: np.ndarray) -> np.ndarray:
    """Feature matrix for the quadratic class.

    Columns follow the upper triangle in row-major order: (1/2) x_i^2 on the
    diagonal, x_i x_j for i < j (the doubling of off-diagonal terms is folded
    into the feature so the coefficient equals G_ij directly), then 1.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    N, n = xs.shape
    cols = []
    for i in range(n):
        cols.append(0.5 * xs[:, i] ** 2)
        for j in range(i + 1, n):
            cols.append(xs[:, i] * xs[:, j])
    cols.append(np.ones(N))
    return np.column_stack(cols)


def _unpack_quad(theta: np.ndarray, n: int) -> tuple[np.ndarray, float]:
    G = np.zeros((n, n))
    idx = 0
    for i in range(n):
        G[i, i] = theta[idx]
        idx += 1
        for j in range(i + 1, n):
            G[i, j] = G[j, i] = theta[idx]
            idx += 1
    return G, float(theta[idx])


def fit_quadratic(xs: np.ndarray, ys: np.ndarray) -> QuadraticFn:
    """Least-squares fit of (1/2) x'Gx + g to scalar targets."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).ravel()
    N, n = xs.shape
    p = n_quad_params(n)
    if N < p:
        raise TooFewSamplesError(f"need at least {p} samples for n={n}, got {N}")
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise NonFiniteError("regression inputs contain non-finite values")
    A = quad_features(xs)
    theta, rank = _lstsq_minnorm(A, ys)
    G, g = _unpack_quad(theta, n)
    return QuadraticFn(G=G, g=g, rank_deficient=rank < p)


def fit_linear(xs: np.ndarray, Ys: np.ndarray) -> LinearFn:
    """Least-squares fit of Gx to vector targets, each output row solved
    independently on the shared design matrix."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    Ys = np.atleast_2d(np.asarray(Ys, dtype=float))
    N, n = xs.shape
    if N < n:
        raise TooFewSamplesError(f"need at least {n} samples for n={n}, got {N}")
    if not (np.isfinite(xs).all() and np.isfinite(Ys).all()):
        raise NonFiniteError("regression inputs contain non-finite values")
    coef, rank = _lstsq_minnorm(xs, Ys)
    return LinearFn(G=coef.T, rank_deficient=rank < n)
