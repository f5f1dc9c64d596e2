"""Backward-recursive least-squares Monte-Carlo BSDE solver.

The unified backward equation -dY = g(t, X, Y, Z) dt - Z' dW is solved on a
forward sample batch by regressing Y_t + g dt onto X_{t-dt} in a parametric
class, one grid step at a time.  Two drivers are supported: the scalar
value-function driver and the vector co-state driver of the maximum
principle; the latter holds the control fixed under the x-derivative, so
with constant sigma it reduces to Qx + A'y and is independent of z and of
the feedback gain.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .approx import LinearFn, QuadraticFn, fit_linear, fit_quadratic
from .errors import NonFiniteError, TooFewSamplesError
from .lq import LQProblem, TimeGrid, control_affine_parts
from .simulate import ControlLaw, TrajectoryBatch


class DriverKind(enum.Enum):
    VALUE = "value"
    COSTATE = "costate"


@dataclass
class SolveFlags:
    """Per-run stability bookkeeping for a backward pass."""

    unstable: bool = False
    abort_index: int | None = None
    rank_deficient_steps: int = 0
    nonfinite_fit: bool = False


@dataclass
class ApproxSolution:
    """Fitted per-time-step parameters of the backward unknown.

    params[k] is a QuadraticFn (value kind) or LinearFn (co-state kind) at
    grid index k; entries before an aborted step are None.  params[K] is the
    exact terminal function by construction.
    """

    kind: DriverKind
    grid: TimeGrid
    params: list
    flags: SolveFlags = field(default_factory=SolveFlags)
    reversed: object | None = None  # ReversedBatch when a TR pass keeps paths

    def G_stack(self) -> np.ndarray:
        """All fitted G matrices, (K+1, n, n); NaN where a step is missing."""
        n = next(p.G.shape[0] for p in self.params if p is not None)
        out = np.full((len(self.params), n, n), np.nan)
        for k, p in enumerate(self.params):
            if p is not None:
                out[k] = p.G
        return out


def terminal_function(prob: LQProblem, kind: DriverKind):
    """Exact terminal data: (1/2) x'Qf x for the value BSDE, Qf x for the
    co-state BSDE."""
    if kind is DriverKind.VALUE:
        return QuadraticFn(G=prob.Qf.copy(), g=0.0)
    return LinearFn(G=prob.Qf.copy())


def driver_value(prob: LQProblem, Btilde: np.ndarray, gain: np.ndarray, x, y, z):
    """h(x, u, y, z) = (1/2) x'Qx - (1/2) z'M z - z'Btilde u with
    M = Btilde R^{-1} Btilde' and u = gain @ x.  Batch aware."""
    single = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    M = Btilde @ np.linalg.solve(prob.R, Btilde.T)
    u = x @ gain.T
    out = 0.5 * np.sum((x @ prob.Q) * x, axis=1)
    out -= 0.5 * np.sum((z @ M) * z, axis=1)
    out -= np.sum((z @ Btilde) * u, axis=1)
    return float(out[0]) if single else out


def driver_costate(prob: LQProblem, gain: np.ndarray, x, y, z=None):
    """dH/dx at fixed control: Qx + A'y.  Independent of z and of the gain
    because sigma is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x @ prob.Q + y @ prob.A


def _fit(kind: DriverKind, xs, targets):
    if kind is DriverKind.VALUE:
        return fit_quadratic(xs, targets)
    return fit_linear(xs, targets)


def lsmc_solve(
    prob: LQProblem, law: ControlLaw, batch: TrajectoryBatch, kind: DriverKind
) -> ApproxSolution:
    """Backward LSMC pass over a simulated batch.

    At the terminal index Y and Z come from the exact terminal function; at
    each earlier step the regression target is Y_t + g(t, X_t, Y_t, Z_t) dt,
    fitted against X_{t-dt}, and Y, Z are refreshed from the new fit.  A
    non-finite fit aborts the pass and marks the run unstable.
    """
    if law.grid != batch.grid:
        raise ValueError("law and batch grids differ")
    grid = batch.grid
    K, dt = grid.K, grid.dt
    X = batch.X
    sigma = prob.sigma
    flags = SolveFlags()
    params: list = [None] * (K + 1)
    params[K] = terminal_function(prob, kind)
    sol = ApproxSolution(kind=kind, grid=grid, params=params, flags=flags)
    if batch.diverged:
        flags.unstable = True
        flags.abort_index = K
        return sol

    _, Btilde = control_affine_parts(prob)
    if kind is DriverKind.VALUE:
        Y = params[K].value(X[K])
        Z = X[K] @ params[K].G @ sigma  # rows are sigma' grad phi
    else:
        Y = params[K].value(X[K])
        Z = sigma.T @ params[K].G.T

    for k in range(K, 0, -1):
        gain = law.gains[k]
        with np.errstate(over="ignore", invalid="ignore"):
            if kind is DriverKind.VALUE:
                g = driver_value(prob, Btilde, gain, X[k], Y, Z)
            else:
                g = driver_costate(prob, gain, X[k], Y, Z)
            target = Y + g * dt
        try:
            fit = _fit(kind, X[k - 1], target)
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
        Y = fit.value(X[k - 1])
        if kind is DriverKind.VALUE:
            Z = X[k - 1] @ fit.G @ sigma
        else:
            Z = sigma.T @ fit.G.T
    return sol
