"""Built-in manufactured benchmark problems, error metrics and rate estimates.

Each problem is written as ``L(u, u', u'') = f(x)`` with ``f`` obtained by
substituting a known exact solution, so ``F = L - f`` vanishes on it. The
exact solutions are evaluated through complex closed forms, which give
every derivative without symbolic algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .boundary import (
    Dirichlet,
    EndpointModel,
    GeneralImplicit,
    Neumann,
    OdeProblem,
    Robin,
    solve_alphas,
)
from .errors import DivisionGuardError, DimensionError, LogDomainError
from .spline import ClampedSpace, KnotGrid, PiecewisePolynomial, evaluate

# ----------------------------------------------------------------------------
# exact solutions: callables (x, order) -> u^(order)(x)


def exact_sin(x, order=0):
    return np.sin(np.asarray(x, dtype=float) + order * np.pi / 2)


def exact_x_exp_sin(x, order=0):
    """``x exp(-x) sin(x)`` = Im(x exp(lam x)) with lam = -1 + i."""
    x = np.asarray(x, dtype=float)
    lam = -1.0 + 1.0j
    k = order
    val = (lam**k * x + (k * lam ** (k - 1) if k else 0.0)) * np.exp(lam * x)
    return np.imag(val)


def exact_sinpi_over(x, order=0):
    """``sin(pi x) / (1 + x)`` = Im(exp(i pi x) (1 + x)^-1), by Leibniz."""
    x = np.asarray(x, dtype=float)
    e = np.exp(1j * np.pi * x)
    total = np.zeros_like(x, dtype=complex)
    for j in range(order + 1):
        total += (
            math.comb(order, j)
            * (1j * np.pi) ** (order - j)
            * (-1) ** j
            * math.factorial(j)
            * (1.0 + x) ** (-1 - j)
        )
    return np.imag(e * total)


def exact_runge(x, order=0):
    """``1 / (1 + x^2)`` = Im(1 / (x - i))."""
    x = np.asarray(x, dtype=float)
    k = order
    return np.imag((-1) ** k * math.factorial(k) * (x - 1j) ** (-1 - k))


# ----------------------------------------------------------------------------
# left-hand sides: value and partials in (u, v, w)


@dataclass(frozen=True)
class Operator:
    L: Callable
    L_u: Callable
    L_v: Callable
    L_w: Callable
    affine_w: bool = False


OP_BVP1 = Operator(
    L=lambda u, v, w: w + v + np.sin(v * u),
    L_u=lambda u, v, w: np.cos(v * u) * v,
    L_v=lambda u, v, w: 1.0 + np.cos(v * u) * u,
    L_w=lambda u, v, w: np.ones_like(np.asarray(w, dtype=float)),
    affine_w=True,
)

OP_BVP2 = Operator(
    L=lambda u, v, w: w + v**2 - v**3 + v * u + np.sin(u) ** 3,
    L_u=lambda u, v, w: v + 3 * np.sin(u) ** 2 * np.cos(u),
    L_v=lambda u, v, w: 2 * v - 3 * v**2 + u,
    L_w=lambda u, v, w: np.ones_like(np.asarray(w, dtype=float)),
    affine_w=True,
)

OP_BVP3 = Operator(
    L=lambda u, v, w: -w + 1.0 / (1.0 + w**2) + u**3,
    L_u=lambda u, v, w: 3 * u**2,
    L_v=lambda u, v, w: np.zeros_like(np.asarray(v, dtype=float)),
    L_w=lambda u, v, w: -1.0 - 2 * w / (1.0 + w**2) ** 2,
)

OP_BVP4 = Operator(
    L=lambda u, v, w: w + v**2 + np.sin(v * u),
    L_u=lambda u, v, w: np.cos(v * u) * v,
    L_v=lambda u, v, w: 2 * v + np.cos(v * u) * u,
    L_w=lambda u, v, w: np.ones_like(np.asarray(w, dtype=float)),
    affine_w=True,
)

OP_BVP5 = Operator(
    L=lambda u, v, w: -w + v + np.sin(u),
    L_u=lambda u, v, w: np.cos(u),
    L_v=lambda u, v, w: np.ones_like(np.asarray(v, dtype=float)),
    L_w=lambda u, v, w: -np.ones_like(np.asarray(w, dtype=float)),
    affine_w=True,
)


def manufactured_problem(op: Operator, exact: Callable, domain, name="") -> OdeProblem:
    """``F(x, u, v, w) = L(u, v, w) - f(x)`` with ``f = L`` applied to ``exact``.

    ``dF/dx = -f'(x)`` comes from the chain rule along the exact solution,
    so every partial is analytic.
    """

    def along(x):
        return exact(x, 0), exact(x, 1), exact(x, 2)

    def f(x):
        return op.L(*along(x))

    def df(x):
        u, v, w = along(x)
        return op.L_u(u, v, w) * v + op.L_v(u, v, w) * w + op.L_w(u, v, w) * exact(x, 3)

    def F(x, u, v, w):
        return op.L(u, v, w) - f(x)

    def F_x(x, u, v, w):
        return -df(x) + 0.0 * u

    partials = (
        F_x,
        lambda x, u, v, w: op.L_u(u, v, w) + 0.0 * x,
        lambda x, u, v, w: op.L_v(u, v, w) + 0.0 * x,
        lambda x, u, v, w: op.L_w(u, v, w) + 0.0 * x,
    )
    prob = OdeProblem(F, tuple(domain), partials, order=2, affine_top=op.affine_w, name=name)
    prob.rhs = f
    return prob


@dataclass
class BenchmarkProblem:
    name: str
    problem: OdeProblem
    bc: object
    exact: Callable
    degree: int = 3
    knot_mode: str = "uniform"
    notes: str = ""

    @property
    def domain(self):
        return self.problem.domain


def _bvp5_bc(exact, a, b):
    ua, va = float(exact(a, 0)), float(exact(a, 1))
    ub, vb = float(exact(b, 0)), float(exact(b, 1))
    c_a = math.sqrt(1 + ua**2) + va
    c_b = ub + vb**3
    bc = GeneralImplicit(
        g=lambda x, u, v: np.sqrt(1 + u**2) + v - c_a,
        h=lambda x, u, v: u + v**3 - c_b,
        g_u=lambda x, u, v: u / np.sqrt(1 + u**2),
        g_v=lambda x, u, v: 1.0,
        h_u=lambda x, u, v: 1.0,
        h_v=lambda x, u, v: 3 * v**2,
    )
    return bc, c_a, c_b


def builtin_problems() -> list:
    """BVP1..BVP5 and the two BVP1 variants used for knot strategies."""
    out = []

    def dirichlet_from(exact, a, b):
        return Dirichlet(float(exact(a, 0)), float(exact(b, 0)))

    dom = (0.0, 2 * np.pi)
    out.append(
        BenchmarkProblem(
            "BVP1",
            manufactured_problem(OP_BVP1, exact_sin, dom, "BVP1"),
            Dirichlet(0.0, 0.0),
            exact_sin,
            degree=3,
        )
    )
    dom = (0.0, np.pi)
    out.append(
        BenchmarkProblem(
            "BVP2",
            manufactured_problem(OP_BVP2, exact_x_exp_sin, dom, "BVP2"),
            Dirichlet(0.0, 0.0),
            exact_x_exp_sin,
            degree=5,
        )
    )
    dom = (0.0, 2.0)
    out.append(
        BenchmarkProblem(
            "BVP3",
            manufactured_problem(OP_BVP3, exact_sinpi_over, dom, "BVP3"),
            Neumann(np.pi, np.pi / 3),
            exact_sinpi_over,
            degree=5,
            knot_mode="chebyshev",
            notes="F is nonlinear in u''; the endpoint equations are solved by "
            "warm-started Newton and have a unique root (F is monotone in u'').",
        )
    )
    dom = (-1.0, 1.0)
    out.append(
        BenchmarkProblem(
            "BVP4",
            manufactured_problem(OP_BVP4, exact_runge, dom, "BVP4"),
            Robin(gamma_a=1.0, c_a=1.0, gamma_b=-1.0, c_b=-1.0),
            exact_runge,
            degree=3,
        )
    )
    dom = (-np.pi, np.pi)
    bc5, _, _ = _bvp5_bc(exact_x_exp_sin, *dom)
    out.append(
        BenchmarkProblem(
            "BVP5",
            manufactured_problem(OP_BVP5, exact_x_exp_sin, dom, "BVP5"),
            bc5,
            exact_x_exp_sin,
            degree=5,
            notes="u'(pi)^3 makes dh/dv vanish at v = 0; Newton restarts away from it.",
        )
    )
    dom = (0.0, 6 * np.pi)
    out.append(
        BenchmarkProblem(
            "BVP1_6PI",
            manufactured_problem(OP_BVP1, exact_sin, dom, "BVP1_6PI"),
            dirichlet_from(exact_sin, *dom),
            exact_sin,
            degree=3,
        )
    )
    dom = (0.0, 3.0)
    out.append(
        BenchmarkProblem(
            "BVP1_SINPI",
            manufactured_problem(OP_BVP1, exact_sinpi_over, dom, "BVP1_SINPI"),
            dirichlet_from(exact_sinpi_over, *dom),
            exact_sinpi_over,
            degree=3,
        )
    )
    return out


def get_problem(name: str) -> BenchmarkProblem:
    table = {bp.name: bp for bp in builtin_problems()}
    try:
        return table[name.upper()]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(table)}") from None


def problem_names() -> list:
    return [bp.name for bp in builtin_problems()]


def bvp5_constants():
    """Right-hand sides ``(c_a, c_b)`` of the two nonlinear BVP5 conditions."""
    _, c_a, c_b = _bvp5_bc(exact_x_exp_sin, -np.pi, np.pi)
    return c_a, c_b


def build_exact_spline(
    bp: BenchmarkProblem, grid: KnotGrid, degree: int, space: Optional[ClampedSpace] = None
) -> PiecewisePolynomial:
    """Spline through the exact knot values, coupled to the BCs like a solver spline."""
    if space is None:
        space = ClampedSpace(grid, degree)
    y = np.asarray(bp.exact(grid.knots, 0), dtype=float)
    if isinstance(bp.bc, Dirichlet):
        y[0], y[-1] = bp.bc.ua, bp.bc.ub
    model = EndpointModel.from_space(space, y)
    alpha = solve_alphas(bp.problem, bp.bc, model, y[0], y[-1])
    return space.build(y, alpha.values)


# ----------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricsReport:
    """Residual and relative error norms; errors in percent.

    Norms are root-mean-squares over uniform samples. ``pieces`` holds the
    mean squares of ``u``, ``u'``, ``u''`` and of the corresponding errors.
    """

    residual_l2: float
    residual_linf: float
    err_l2: float
    err_h1: float
    err_h2: float
    sample_count: int
    pieces: Dict[str, float] = field(default_factory=dict)

    def as_row(self):
        return {
            "residual_l2": self.residual_l2,
            "residual_linf": self.residual_linf,
            "err_l2_pct": self.err_l2,
            "err_h1_pct": self.err_h1,
            "err_h2_pct": self.err_h2,
        }


def compute_metrics(bp: BenchmarkProblem, spline: PiecewisePolynomial, sample_count: int = 100) -> MetricsReport:
    if sample_count < 10:
        raise DimensionError("need at least 10 metric samples")
    a, b = bp.domain
    x = np.linspace(a, b, sample_count)
    derivs = [evaluate(spline, x, r) for r in range(3)]
    residual = np.asarray(bp.problem.F(x, *derivs), dtype=float)
    pieces = {}
    for r in range(3):
        u = np.asarray(bp.exact(x, r), dtype=float)
        pieces[f"u{r}"] = float(np.mean(u**2))
        pieces[f"e{r}"] = float(np.mean((u - derivs[r]) ** 2))
    if pieces["u0"] <= 1e-300:
        raise DivisionGuardError(f"{bp.name}: exact solution has (near) zero norm")

    def rel(k):
        num = sum(pieces[f"e{r}"] for r in range(k + 1))
        den = sum(pieces[f"u{r}"] for r in range(k + 1))
        return 100.0 * math.sqrt(num / den)

    return MetricsReport(
        residual_l2=float(np.sqrt(np.mean(residual**2))),
        residual_linf=float(np.max(np.abs(residual))),
        err_l2=rel(0),
        err_h1=rel(1),
        err_h2=rel(2),
        sample_count=sample_count,
        pieces=pieces,
    )


# ----------------------------------------------------------------------------
# convergence rate


@dataclass(frozen=True)
class RateReport:
    quantity: str
    error_5: float
    error_10: float
    h_5: float
    h_10: float
    s: float


def knot_spacing(a: float, b: float, knots: int) -> float:
    """``(b - a) / (knots - 1)``: spacing of ``knots`` uniform knots."""
    return (b - a) / (knots - 1)


def estimate_rate(errors: dict, a: float, b: float, quantity: str = "") -> RateReport:
    """Two-point rate ``s`` with ``error ~ C h^s`` from the 5- and 10-knot errors.

    Keys of ``errors`` are knot counts, and ``h_n = (b - a) / (n - 1)``.
    """
    if set(errors) != {5, 10}:
        raise DimensionError(f"need errors at exactly 5 and 10 knots, got {sorted(errors)}")
    e5, e10 = float(errors[5]), float(errors[10])
    if e5 <= 0 or e10 <= 0:
        raise LogDomainError(f"errors must be positive, got {e5}, {e10}")
    h5, h10 = knot_spacing(a, b, 5), knot_spacing(a, b, 10)
    s = (math.log(e10) - math.log(e5)) / (math.log(h10) - math.log(h5))
    return RateReport(quantity, e5, e10, h5, h10, s)
