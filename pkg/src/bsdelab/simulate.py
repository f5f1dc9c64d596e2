"""Euler-Maruyama simulation of the controlled SDE and Monte-Carlo cost.

All randomness comes from the counter-based Philox generator keyed by the
caller's seed: the initial draw occupies the first counter block and the
increments of sample i live at fixed offsets dW[:, i, :], so each path owns
an independent substream of (seed, i) and results are bit-identical no
matter how consumers are parallelized.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .lq import LQProblem, TimeGrid

OVERFLOW_GUARD = 1e15


@dataclass(frozen=True)
class ControlLaw:
    """Time-indexed linear feedback u = gains[k] @ x on a grid.

    gains has shape (K+1, m, n); the terminal gain is stored for
    completeness but never used by the simulation.
    """

    gains: np.ndarray
    grid: TimeGrid

    @classmethod
    def zero(cls, prob: LQProblem, grid: TimeGrid) -> "ControlLaw":
        return cls(gains=np.zeros((grid.K + 1, prob.m, prob.n)), grid=grid)


@dataclass(frozen=True)
class TrajectoryBatch:
    """N state paths on a grid, X of shape (K+1, N, n)."""

    X: np.ndarray
    seed: int
    grid: TimeGrid
    N: int
    diverged: bool


def psd_factor(Sigma: np.ndarray) -> np.ndarray:
    """A matrix L with L L' = Sigma; Cholesky when possible, otherwise a
    symmetric eigenfactor with negative eigenvalues clamped to zero."""
    try:
        return np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (Sigma + Sigma.T))
        return V * np.sqrt(np.clip(w, 0.0, None))


def derive_seed(*parts: int) -> int:
    """Deterministic 128-bit child seed from a tuple of integers."""
    words = np.random.SeedSequence([int(p) for p in parts]).generate_state(2, np.uint64)
    return int(words[0]) | (int(words[1]) << 64)


def brownian_increments(seed: int, K: int, N: int, n: int, dt: float):
    """Initial standard-normal draw (N, n) and increments (K, N, n) with
    variance dt, in the fixed Philox counter order described above."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    xi = rng.standard_normal((N, n))
    dW = rng.standard_normal((K, N, n)) * np.sqrt(dt)
    return xi, dW


def simulate_forward(
    prob: LQProblem, law: ControlLaw, N: int, grid: TimeGrid, seed: int
) -> TrajectoryBatch:
    """Simulate N Euler-Maruyama paths under the feedback law.

    X[k+1] = X[k] + (A X[k] + B u_k) dt + sigma dW_k with u_k given by the
    law's gain at index k and X[0] = m0 + L xi, L L' = Sigma0.  The batch is
    flagged diverged if any entry exceeds the overflow guard or becomes
    non-finite.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if law.grid != grid:
        raise ValueError("control law grid does not match the simulation grid")
    n = prob.n
    K, dt = grid.K, grid.dt
    xi, dW = brownian_increments(seed, K, N, n, dt)
    L = psd_factor(prob.Sigma0)
    X = np.empty((K + 1, N, n))
    X[0] = prob.m0 + xi @ L.T
    noise = dW @ prob.sigma.T
    At, Bt = prob.A.T, prob.B.T
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            U = X[k] @ law.gains[k].T
            X[k + 1] = X[k] + (X[k] @ At + U @ Bt) * dt + noise[k]
    finite = bool(np.isfinite(X).all())
    too_big = bool((np.abs(X) > OVERFLOW_GUARD).any())
    X.setflags(write=False)
    return TrajectoryBatch(X=X, seed=seed, grid=grid, N=N, diverged=(not finite) or too_big)


def cost_samples(prob: LQProblem, law: ControlLaw, batch: TrajectoryBatch) -> np.ndarray:
    """Per-path cost: left-endpoint Riemann sum of the running cost plus the
    terminal cost, matching the Euler time alignment."""
    X = batch.X
    K, dt = batch.grid.K, batch.grid.dt
    total = np.zeros(batch.N)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            U = X[k] @ law.gains[k].T
            run = 0.5 * np.sum((X[k] @ prob.Q) * X[k], axis=1)
            run += 0.5 * np.sum((U @ prob.R) * U, axis=1)
            total += run * dt
        total += 0.5 * np.sum((X[K] @ prob.Qf) * X[K], axis=1)
    return total


def estimate_cost(prob: LQProblem, law: ControlLaw, batch: TrajectoryBatch) -> float:
    """Monte-Carlo estimate of the control cost; NaN for diverged batches."""
    if batch.diverged:
        return float("nan")
    return float(cost_samples(prob, law, batch).mean())


def batch_to_csv(batch: TrajectoryBatch, path) -> None:
    """Debug dump with columns t, sample, x_0..x_{n-1}."""
    n = batch.X.shape[2]
    header = ["t", "sample"] + [f"x_{j}" for j in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, t in enumerate(batch.grid.times):
            for i in range(batch.N):
                w.writerow([f"{t:.17e}", i] + [f"{v:.17e}" for v in batch.X[k, i]])
