"""Exact LQ ground truth from the backward Riccati equation.

A scalar instance with A=0, B=R=Qf=1, Q=0 has the closed form
G_t = 1/(1 + (T - t)) and g_0 = (1/2) ln 2, which pins down the
integrator's accuracy; the 2-D benchmark instance then shows the kind of
G_t trajectories every solver in this package is measured against.
"""

import math

import numpy as np

from bsdelab import (
    builtin_2d,
    make_lq,
    optimal_expected_cost,
    optimal_gain,
    solve_riccati,
    uniform_grid,
)

# scalar instance with a known closed form
scalar = make_lq([[0.0]], [[1.0]], [[1.0]], [[0.0]], [[1.0]], [[1.0]],
                 [0.0], [[0.0]], 1.0)
sol = solve_riccati(scalar, uniform_grid(1.0, 1e-3), refine=10)
print("scalar closed-form check")
print(f"  G_0 = {sol.G[0, 0, 0]:.10f}   (exact 0.5)")
print(f"  g_0 = {sol.g[0]:.10f}   (exact {0.5 * math.log(2):.10f})")

# the 2-D benchmark used throughout
prob = builtin_2d()
grid = uniform_grid(prob.T, 0.02)
sol2 = solve_riccati(prob, grid)
print("\n2-D benchmark instance")
print(f"  G at t=0:\n{np.array_str(sol2.G[0], precision=4)}")
print(f"  optimal gain at t=0: {np.array_str(optimal_gain(prob, sol2, 0), precision=4)}")
print(f"  optimal expected cost E[V(0, X0)] = {optimal_expected_cost(prob, sol2):.4f}")

# G_t relaxes from Qf backward toward the quasi-stationary solution
for k in (grid.K, grid.K // 2, 0):
    print(f"  t = {grid.times[k]:.2f}: diag(G) = {np.diag(sol2.G[k]).round(4)}")
