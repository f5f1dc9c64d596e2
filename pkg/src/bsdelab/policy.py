"""Outer loop: solve the BSDE, extract a feedback gain, re-simulate, repeat.

Four method tags are supported, pairing a solver (LSMC or time-reversal)
with a driver kind (value or co-state).  Accuracy is scored against the
Riccati reference with the time-averaged, entry-normalized squared
Frobenius error of the fitted G_t.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import BsdeLabError
from .lq import LQProblem, TimeGrid
from .lsmc import ApproxSolution, DriverKind, lsmc_solve
from .riccati import RiccatiSolution
from .simulate import ControlLaw, TrajectoryBatch, cost_samples, derive_seed, simulate_forward
from .timereversal import fit_scores, tr_solve

METHODS = ("ls-v", "ls-c", "tr-v", "tr-c")

_METHOD_KIND = {
    "ls-v": DriverKind.VALUE,
    "ls-c": DriverKind.COSTATE,
    "tr-v": DriverKind.VALUE,
    "tr-c": DriverKind.COSTATE,
}


def method_kind(method: str) -> DriverKind:
    try:
        return _METHOD_KIND[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}") from None


def gain_from_G(prob: LQProblem, G: np.ndarray) -> np.ndarray:
    """K = -R^{-1} B' G; shared by both driver kinds so the two extraction
    formulas agree bitwise on identical input."""
    return -np.linalg.solve(prob.R, prob.B.T @ G)


def extract_gain(prob: LQProblem, approx: ApproxSolution) -> ControlLaw:
    """Feedback law from a fitted solution, one gain per grid time.

    Both kinds reduce to K_t = -R^{-1} B' G_t in the LQ setting: the value
    form through -R^{-1} Btilde' sigma' grad phi and the co-state form
    through the Hamiltonian minimizer.  Missing (aborted) steps yield NaN
    gains.
    """
    K = approx.grid.K
    m, n = prob.m, prob.n
    gains = np.full((K + 1, m, n), np.nan)
    for k, p in enumerate(approx.params):
        if p is not None:
            gains[k] = gain_from_G(prob, p.G)
    return ControlLaw(gains=gains, grid=approx.grid)


def mse_vs_oracle(approx_or_history, oracle: RiccatiSolution) -> float:
    """Left-endpoint Riemann sum of ||G_t - G*_t||_F^2 over [0, T), divided
    by T n^2.  The terminal index is excluded since every method matches it
    by construction.  NaN if the solution is missing steps or non-finite."""
    approx = approx_or_history
    if isinstance(approx_or_history, IterationHistory):
        approx = approx_or_history.final
    if approx is None:
        return float("nan")
    Gs = approx.G_stack()
    K = approx.grid.K
    n = Gs.shape[1]
    diff = Gs[:K] - oracle.G[:K]
    if not np.isfinite(diff).all():
        return float("nan")
    with np.errstate(over="ignore"):
        sq = np.sum(diff**2, axis=(1, 2))
        out = float(sq.sum() * approx.grid.dt / (approx.grid.K * approx.grid.dt * n * n))
    return out


@dataclass
class IterationHistory:
    """Everything recorded along one policy-iteration run.

    costs[k] is the Monte-Carlo cost of the law after k solves (k = 0 is the
    zero law); the final entry comes from one extra evaluation rollout.
    mses[k] scores the solution produced by solve k+1 (NaN without an
    oracle).  gains[k] is the gain sequence in force after k solves.
    """

    method: str
    costs: np.ndarray
    cost_ses: np.ndarray
    mses: np.ndarray
    gains: list
    unstable_flags: np.ndarray
    aborted: bool
    abort_iteration: int | None
    final: ApproxSolution | None
    config: dict = field(default_factory=dict)

    @property
    def unstable(self) -> bool:
        return self.aborted or bool(self.unstable_flags.any())


def run_policy_iteration(
    prob: LQProblem,
    method: str,
    N: int,
    grid: TimeGrid,
    iters: int,
    seed: int,
    oracle: RiccatiSolution | None = None,
    jitter: bool = False,
    early_stop_tol: float | None = None,
) -> IterationHistory:
    """Iterate simulate -> solve -> extract gain, starting from the zero law.

    Each iteration uses a fresh sub-seed derived from (seed, iteration).  A
    failed solve or a non-finite gain is recorded as an unstable iteration
    and the last finite law is kept; a diverged forward batch aborts the
    run.  With early_stop_tol set, the loop stops once the gain update falls
    below the tolerance in relative Frobenius norm.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    kind = method_kind(method)
    use_tr = method.startswith("tr")
    law = ControlLaw.zero(prob, grid)
    costs = np.full(iters + 1, np.nan)
    cost_ses = np.full(iters + 1, np.nan)
    mses = np.full(iters, np.nan)
    flags = np.zeros(iters, dtype=bool)
    gains_hist = [law.gains]
    final: ApproxSolution | None = None
    aborted = False
    abort_iteration: int | None = None
    stopped_at = iters

    for it in range(1, iters + 1):
        batch = simulate_forward(prob, law, N, grid, derive_seed(seed, it, 0))
        if batch.diverged:
            flags[it - 1] = True
            aborted = True
            abort_iteration = it
            stopped_at = it
            break
        cs = cost_samples(prob, law, batch)
        costs[it - 1] = cs.mean()
        cost_ses[it - 1] = cs.std(ddof=1) / np.sqrt(N) if N > 1 else 0.0

        try:
            if use_tr:
                scores = fit_scores(prob, batch, auto=jitter)
                approx = tr_solve(
                    prob, law, batch, scores, kind, derive_seed(seed, it, 1)
                )
            else:
                approx = lsmc_solve(prob, law, batch, kind)
        except BsdeLabError:
            flags[it - 1] = True
            gains_hist.append(law.gains)
            continue
        if approx.flags.unstable:
            flags[it - 1] = True
            gains_hist.append(law.gains)
            continue
        final = approx
        if oracle is not None:
            mses[it - 1] = mse_vs_oracle(approx, oracle)
        new_law = extract_gain(prob, approx)
        if np.isfinite(new_law.gains).all():
            prev = law.gains
            law = new_law
            if early_stop_tol is not None:
                delta = np.linalg.norm(law.gains - prev) / (1.0 + np.linalg.norm(prev))
                if delta < early_stop_tol:
                    gains_hist.append(law.gains)
                    stopped_at = it
                    break
        else:
            flags[it - 1] = True
        gains_hist.append(law.gains)
    else:
        stopped_at = iters

    if not aborted:
        batch = simulate_forward(prob, law, N, grid, derive_seed(seed, iters + 1, 0))
        if batch.diverged:
            costs[stopped_at] = np.nan
        else:
            cs = cost_samples(prob, law, batch)
            costs[stopped_at] = cs.mean()
            cost_ses[stopped_at] = cs.std(ddof=1) / np.sqrt(N) if N > 1 else 0.0

    return IterationHistory(
        method=method,
        costs=costs[: stopped_at + 1],
        cost_ses=cost_ses[: stopped_at + 1],
        mses=mses[:stopped_at],
        gains=gains_hist,
        unstable_flags=flags[:stopped_at],
        aborted=aborted,
        abort_iteration=abort_iteration,
        final=final,
        config={
            "method": method,
            "N": N,
            "dt": grid.dt,
            "T": grid.T,
            "iters": iters,
            "seed": seed,
            "jitter": jitter,
        },
    )


def history_to_csv(history: IterationHistory, path) -> None:
    """Rows iter, cost, mse, unstable_flag; iteration 0 is the zero law."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "cost", "mse", "unstable_flag"])
        for k in range(len(history.costs)):
            mse = history.mses[k - 1] if k >= 1 else float("nan")
            flag = int(history.unstable_flags[k - 1]) if k >= 1 else 0
            w.writerow([k, f"{history.costs[k]:.17e}", f"{mse:.17e}", flag])
