"""Exact LQ ground truth via the backward matrix Riccati equation.

Solves -dG/dt = G A + A'G + Q - G B R^{-1} B' G with G(T) = Qf together
with the scalar offset -dg/dt = (1/2) tr(sigma sigma' G), g(T) = 0, so the
optimal value function is V(t, x) = (1/2) x'G_t x + g_t and the optimal
feedback gain is K_t = -R^{-1} B' G_t.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError
from .lq import LQProblem, TimeGrid

DEFAULT_REFINE = 20


@dataclass(frozen=True)
class RiccatiSolution:
    """G (K+1, n, n) and g (K+1,) sampled on the grid times."""

    grid: TimeGrid
    G: np.ndarray
    g: np.ndarray


def solve_riccati(prob: LQProblem, grid: TimeGrid, refine: int = DEFAULT_REFINE) -> RiccatiSolution:
    """Integrate the Riccati pair backward from T with classical RK4.

    Each grid step is split into `refine` RK4 substeps and G is
    re-symmetrized after every substep to suppress asymmetric drift.
    """
    if refine < 1:
        raise ValueError("refine must be >= 1")
    A, Q, Qf = prob.A, prob.Q, prob.Qf
    S = prob.B @ np.linalg.solve(prob.R, prob.B.T)
    D = prob.sigma @ prob.sigma.T
    K, n = grid.K, prob.n
    h = grid.dt / refine

    def f_G(G):
        # equals -dG/dt, i.e. dG/d(tau) for backward time tau = T - t
        return G @ A + A.T @ G + Q - G @ S @ G

    def f_g(G):
        return 0.5 * np.trace(D @ G)

    Gs = np.empty((K + 1, n, n))
    gs = np.empty(K + 1)
    G = Qf.copy()
    g = 0.0
    Gs[K] = G
    gs[K] = g
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K, 0, -1):
            for _ in range(refine):
                k1 = f_G(G)
                l1 = f_g(G)
                G2 = G + 0.5 * h * k1
                k2 = f_G(G2)
                l2 = f_g(G2)
                G3 = G + 0.5 * h * k2
                k3 = f_G(G3)
                l3 = f_g(G3)
                G4 = G + h * k3
                k4 = f_G(G4)
                l4 = f_g(G4)
                G = G + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                G = 0.5 * (G + G.T)
                g = g + (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
            if not (np.isfinite(G).all() and np.isfinite(g)):
                raise NonFiniteError(
                    f"Riccati integration became non-finite at step {k - 1}"
                )
            Gs[k - 1] = G
            gs[k - 1] = g
    Gs.setflags(write=False)
    gs.setflags(write=False)
    return RiccatiSolution(grid=grid, G=Gs, g=gs)


def optimal_gain(prob: LQProblem, sol: RiccatiSolution, t_index: int) -> np.ndarray:
    """Feedback gain K_t = -R^{-1} B' G_t at one grid index."""
    return -np.linalg.solve(prob.R, prob.B.T @ sol.G[t_index])


def optimal_gains(prob: LQProblem, sol: RiccatiSolution) -> np.ndarray:
    """Stacked gains (K+1, m, n) on the whole grid."""
    RinvBt = np.linalg.solve(prob.R, prob.B.T)
    return -np.einsum("ij,kjl->kil", RinvBt, sol.G)


def exact_value(prob: LQProblem, sol: RiccatiSolution, t_index: int, x):
    """V(t, x) = (1/2) x'G_t x + g_t (single point or batch of rows)."""
    x = np.asarray(x, dtype=float)
    return 0.5 * np.sum((x @ sol.G[t_index]) * x, axis=-1) + sol.g[t_index]


def exact_costate(prob: LQProblem, sol: RiccatiSolution, t_index: int, x):
    """Gradient of the value function, G_t x."""
    x = np.asarray(x, dtype=float)
    return x @ sol.G[t_index].T


def optimal_expected_cost(prob: LQProblem, sol: RiccatiSolution) -> float:
    """E[V(0, X0)] = (1/2) m0'G0 m0 + (1/2) tr(Sigma0 G0) + g0."""
    G0 = sol.G[0]
    return float(
        0.5 * prob.m0 @ G0 @ prob.m0 + 0.5 * np.trace(prob.Sigma0 @ G0) + sol.g[0]
    )


def riccati_to_csv(sol: RiccatiSolution, path) -> None:
    """Dump columns t, G flattened row-major, g."""
    n = sol.G.shape[1]
    header = ["t"] + [f"G_{i}{j}" for i in range(n) for j in range(n)] + ["g"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, t in enumerate(sol.grid.times):
            row = [f"{t:.17e}"]
            row += [f"{v:.17e}" for v in sol.G[k].ravel()]
            row.append(f"{sol.g[k]:.17e}")
            w.writerow(row)
