"""Spline solutions of nonlinear two-point boundary value problems.

The solution is an interpolating cubic or quintic spline whose end
derivatives are fixed by the boundary conditions (and, where needed, by the
ODE itself), so every candidate satisfies the BCs exactly. The knot values
are found by minimizing the ODE residual at collocation points.
"""

__version__ = "0.1.0"

from .boundary import (
    AlphaSession,
    AlphaSet,
    Dirichlet,
    FourthOrderSet,
    GeneralImplicit,
    Neumann,
    OdeProblem,
    Robin,
    bc_residuals,
    newton_solve,
    resolve_alphas_fourth_order,
    resolve_alphas_second_order,
)
from .bench import (
    BenchmarkProblem,
    build_exact_spline,
    builtin_problems,
    compute_metrics,
    estimate_rate,
    get_problem,
)
from .errors import SplineBVPError
from .gradient import coefficient_gradient_tape, fd_gradient, loss_and_gradient
from .optimize import OptimizeOptions, minimize, random_init
from .solver import (
    Escalate,
    Relocate,
    SolverConfig,
    SpinsSolution,
    best_of_seeds,
    check_bc,
    relocation_knots,
    solve,
    strategy_escalate,
    strategy_relocate,
)
from .spline import (
    ClampedSpace,
    KnotGrid,
    PiecewisePolynomial,
    basic_clamped_set,
    build_clamped,
    build_recursive,
    derivative_roots,
    evaluate,
    make_knots,
    resample,
)
