"""Knot escalation and knot relocation.

Escalation solves on a coarse grid, resamples the result onto a finer grid
and continues there. Relocation moves the interior knots to the extrema and
inflection points of the current spline. Both keep the boundary conditions
exact at every stage.
"""

import numpy as np

from splinebvp import Escalate, Relocate, SolverConfig, check_bc, compute_metrics, get_problem, solve

bp = get_problem("BVP1")
for label, cfg in [
    ("plain, 10 knots", SolverConfig(n=9, seed=0)),
    ("escalate 5 -> 10 knots", SolverConfig(n=4, seed=0, strategy=Escalate((9,), 30))),
]:
    sol = solve(bp.problem, bp.bc, cfg)
    print(f"{label:<24} loss {sol.loss:.4e}  iterations {sol.iterations:3d}  stages {len(sol.loss_history)}")

long = get_problem("BVP1_6PI")
sol = solve(long.problem, long.bc, SolverConfig(n=8, seed=0, strategy=Relocate()))
interior = sol.knots_used.knots[1:-1]
print("\nrelocated interior knots / (pi/2):")
print(np.round(interior / (np.pi / 2), 3))
m = compute_metrics(long, sol.spline)
print(f"L2 error {m.err_l2:.2f}%, max |BC residual| {check_bc(long.problem, long.bc, sol):.1e}")
