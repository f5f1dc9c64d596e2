"""Dimension scaling on the mass-spring chain.

The chain of p coupled mass-springs gives a 2p-dimensional problem.  The
co-state solvers fit n^2 linear coefficients per step and scale gracefully;
the value solvers fit n(n+1)/2 + 1 quadratic coefficients and degrade as
the dimension grows (run the full sweep with `bsde-lab sweep-dim`).
"""

import time

from bsdelab import (
    mass_spring,
    mse_vs_oracle,
    run_policy_iteration,
    solve_riccati,
    uniform_grid,
)

print(f"{'n':>3s} {'method':8s} {'mse':>10s} {'unstable':>9s} {'time':>6s}")
for p in (1, 2, 4):
    prob = mass_spring(p)
    grid = uniform_grid(prob.T, 0.02)
    oracle = solve_riccati(prob, grid)
    for method in ("tr-c", "ls-c", "tr-v"):
        t0 = time.time()
        hist = run_policy_iteration(prob, method, N=1000, grid=grid, iters=15,
                                    seed=1, oracle=oracle)
        mse = mse_vs_oracle(hist, oracle)
        print(f"{2 * p:3d} {method:8s} {mse:10.2e} {str(hist.unstable):>9s} "
              f"{time.time() - t0:5.1f}s")
