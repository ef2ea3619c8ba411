"""Quintic solve of the BVP2 benchmark and two-point convergence rates.

Quintic gradients are finite differences, so each solve takes a few seconds.
"""

from splinebvp import SolverConfig, best_of_seeds, compute_metrics, estimate_rate, get_problem

bp = get_problem("BVP2")
runs = {}
for knots in (5, 10):
    sol = best_of_seeds(bp.problem, bp.bc, SolverConfig(degree=5, n=knots - 1), range(3))
    runs[knots] = compute_metrics(bp, sol.spline)
    print(f"{knots:2d} knots: residual {runs[knots].residual_l2:.3e}, L2 error {runs[knots].err_l2:.3e}%")

for key in ("residual_l2", "err_l2", "err_h1", "err_h2"):
    rate = estimate_rate({k: getattr(m, key) for k, m in runs.items()}, *bp.domain, key)
    print(f"rate of {key:<11}: {rate.s:.2f}")
