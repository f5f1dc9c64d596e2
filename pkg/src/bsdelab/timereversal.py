"""Time-reversal BSDE solver.

The state diffusion is rerun backward from its terminal samples using the
fitted affine score as drift correction; the backward unknown is integrated
along the reversed paths with the Ito correction term
c(t, x) = tr(D hess phi) - grad phi . b and a fresh Brownian stream, and the
parametric fit is refreshed by regression at every step.  The same noise
increment drives both the reversed state step and the Z-weighted update of
the backward variable at each (sample, step), which is what removes most of
the regression noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approx import LinearFn, QuadraticFn
from .errors import NonFiniteError, TooFewSamplesError
from .lq import LQProblem, control_affine_parts
from .lsmc import (
    ApproxSolution,
    DriverKind,
    SolveFlags,
    _fit,
    driver_costate,
    driver_value,
    terminal_function,
)
from .score import AffineScore, auto_jitter, fit_affine_score
from .simulate import ControlLaw, TrajectoryBatch, brownian_increments


@dataclass(frozen=True)
class ReversedBatch:
    """Reversed state and backward-variable paths.

    Xrev[K] coincides sample-for-sample with the forward batch's terminal
    states; Yrev[K] is the exact terminal data evaluated there.
    """

    Xrev: np.ndarray
    Yrev: np.ndarray
    seed_backward: int


def fit_scores(
    prob: LQProblem, batch: TrajectoryBatch, jitter: float = 0.0, auto: bool = False
) -> list[AffineScore]:
    """Fit one affine score per grid time, 0..K inclusive, from the forward
    samples.  With auto=True the jitter is the trace-scaled default."""
    D = prob.sigma @ prob.sigma.T
    scores = []
    for k in range(batch.grid.K + 1):
        xs = batch.X[k]
        j = auto_jitter(xs) if auto else jitter
        scores.append(fit_affine_score(xs, D, j))
    return scores


def reverse_step(
    prob: LQProblem,
    law: ControlLaw,
    t_index: int,
    score_t: AffineScore,
    x: np.ndarray,
    dW: np.ndarray,
) -> np.ndarray:
    """One Euler step of the reversed dynamics from grid index t_index:
    x - (A x + B u) dt - b(t, x) dt - sigma dW with u = gain @ x."""
    dt = law.grid.dt
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = x @ law.gains[t_index].T
    drift = x @ prob.A.T + u @ prob.B.T
    return x - drift * dt - score_t.eval(x) * dt - dW @ prob.sigma.T


def correction_c(phi_t, score_t: AffineScore, D: np.ndarray, x: np.ndarray):
    """Ito correction per component: tr(D hess phi_i) - grad phi_i . b.

    For the quadratic class this is tr(D G) - (Gx) . b(x); for the linear
    class the Hessian vanishes and c = -G b(x) row-wise.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    b = score_t.eval(x)
    if isinstance(phi_t, QuadraticFn):
        return np.trace(D @ phi_t.G) - np.sum((x @ phi_t.G) * b, axis=1)
    if isinstance(phi_t, LinearFn):
        return -b @ phi_t.G.T
    raise TypeError(f"unsupported function class {type(phi_t).__name__}")


def tr_solve(
    prob: LQProblem,
    law: ControlLaw,
    batch: TrajectoryBatch,
    scores: list[AffineScore],
    kind: DriverKind,
    seed_backward: int,
    keep_paths: bool = False,
) -> ApproxSolution:
    """Backward time-reversal pass over a simulated forward batch.

    Requires one fitted score per grid time.  Returns the fitted parameters
    per time step; when keep_paths is set the reversed paths are attached to
    the returned solution as `.reversed`.
    """
    if law.grid != batch.grid:
        raise ValueError("law and batch grids differ")
    grid = batch.grid
    K, dt = grid.K, grid.dt
    N, n = batch.N, prob.n
    if len(scores) != K + 1:
        raise ValueError(f"need {K + 1} scores, got {len(scores)}")
    sigma = prob.sigma
    D = sigma @ sigma.T
    flags = SolveFlags()
    params: list = [None] * (K + 1)
    params[K] = terminal_function(prob, kind)
    sol = ApproxSolution(kind=kind, grid=grid, params=params, flags=flags)
    if batch.diverged:
        flags.unstable = True
        flags.abort_index = K
        return sol

    _, Btilde = control_affine_parts(prob)
    _, dWb = brownian_increments(seed_backward, K, N, n, dt)

    Xr = np.array(batch.X[K])
    if kind is DriverKind.VALUE:
        Yr = params[K].value(Xr)
        Zr = Xr @ params[K].G @ sigma
    else:
        Yr = params[K].value(Xr)
        Gz = params[K].G  # Z' dW = G sigma dW for the linear class

    if keep_paths:
        dim_y = 1 if kind is DriverKind.VALUE else n
        Xrev = np.empty((K + 1, N, n))
        Yrev = np.empty((K + 1, N, dim_y))
        Xrev[K] = Xr
        Yrev[K] = Yr.reshape(N, dim_y)

    for k in range(K, 0, -1):
        dW = dWb[k - 1]
        b = scores[k].eval(Xr)
        u = Xr @ law.gains[k].T
        drift = Xr @ prob.A.T + u @ prob.B.T
        with np.errstate(over="ignore", invalid="ignore"):
            Xprev = Xr - drift * dt - b * dt - dW @ sigma.T
            if kind is DriverKind.VALUE:
                g = driver_value(prob, Btilde, law.gains[k], Xr, Yr, Zr)
                c = np.trace(D @ params[k].G) - np.sum((Xr @ params[k].G) * b, axis=1)
                Ynew = Yr + g * dt + c * dt - np.sum(Zr * dW, axis=1)
            else:
                g = driver_costate(prob, law.gains[k], Xr, Yr)
                c = -b @ params[k].G.T
                Ynew = Yr + g * dt + c * dt - dW @ sigma.T @ Gz.T
        if not (np.isfinite(Xprev).all() and np.isfinite(Ynew).all()):
            flags.unstable = True
            flags.abort_index = k - 1
            return sol
        try:
            fit = _fit(kind, Xprev, Ynew)
        except (NonFiniteError, TooFewSamplesError):
            flags.unstable = True
            flags.nonfinite_fit = True
            flags.abort_index = k - 1
            return sol
        if not np.isfinite(fit.G).all() or (
            kind is DriverKind.VALUE and not np.isfinite(fit.g)
        ):
            flags.unstable = True
            flags.nonfinite_fit = True
            flags.abort_index = k - 1
            return sol
        if fit.rank_deficient:
            flags.rank_deficient_steps += 1
        params[k - 1] = fit
        Xr = Xprev
        Yr = fit.value(Xr)
        if kind is DriverKind.VALUE:
            Zr = Xr @ fit.G @ sigma
        else:
            Gz = fit.G
        if keep_paths:
            Xrev[k - 1] = Xr
            Yrev[k - 1] = Yr.reshape(N, -1)

    if keep_paths:
        sol.reversed = ReversedBatch(Xrev=Xrev, Yrev=Yrev, seed_backward=seed_backward)
    return sol
