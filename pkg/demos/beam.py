"""Fourth-order problem u'''' + u^3 = f on [0, pi] with u = u'' = 0 at both ends.

The exact solution is sin x. The end values are pinned and the curvature
conditions are imposed on the quintic's end derivatives.
"""

import numpy as np

from splinebvp import FourthOrderSet, OdeProblem, SolverConfig, bc_residuals, solve


def f(x):
    return np.sin(x) + np.sin(x) ** 3


problem = OdeProblem(lambda x, u, v, w, p, q: q + u**3 - f(x), (0.0, np.pi), order=4, affine_top=True)
bc = FourthOrderSet(
    g1=lambda x, u, v, w: w, g2=None, h1=lambda x, u, v, w: w, h2=None, pin_a=0.0, pin_b=0.0
)

x = np.linspace(0, np.pi, 200)
for n in (3, 5, 8):
    sol = solve(problem, bc, SolverConfig(degree=5, n=n, seed=0))
    err = np.max(np.abs(sol.spline(x) - np.sin(x)))
    bcr = np.max(np.abs(bc_residuals(problem, bc, sol.spline)))
    print(f"{n + 1:2d} knots: max error {err:.2e}, BC residual {bcr:.1e}, loss {sol.loss:.2e}")
