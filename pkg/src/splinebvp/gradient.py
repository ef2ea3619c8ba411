"""Physics-informed loss and its gradient with respect to the knot values.

Every clamped spline is affine in the knot values once its end
derivatives are fixed, so the sensitivity of each local coefficient to
``y`` is a constant matrix per grid (the "tape"). For cubic splines the
full gradient then follows from the chain rule plus the sensitivity of the
end derivatives to ``y``; quintic gradients use central differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import perm
from typing import Callable, Optional

import numpy as np

from .boundary import (
    AlphaSet,
    Dirichlet,
    EndpointModel,
    FourthOrderSet,
    GeneralImplicit,
    Neumann,
    OdeProblem,
    Robin,
    pinned_ends,
    solve_alphas,
)
from .errors import DimensionError, EvaluationError, SingularSensitivityError
from .spline import ClampedSpace, KnotGrid, PiecewisePolynomial

DEFAULT_COLLOCATION = 100


def collocation_points(a: float, b: float, count: int = DEFAULT_COLLOCATION) -> np.ndarray:
    """``count`` uniform points on ``[a, b]``, endpoints included."""
    return np.linspace(a, b, count)


def free_mask(grid: KnotGrid, bc) -> np.ndarray:
    """Boolean mask of the knot values the optimizer controls."""
    mask = np.ones(grid.n + 1, dtype=bool)
    pa, pb = pinned_ends(bc)
    if pa is not None:
        mask[0] = False
    if pb is not None:
        mask[-1] = False
    return mask


def assemble_values(grid: KnotGrid, bc, y_free) -> np.ndarray:
    """Full knot-value vector from the free entries and any pinned ends."""
    mask = free_mask(grid, bc)
    y_free = np.asarray(y_free, dtype=float)
    if y_free.shape != (int(mask.sum()),):
        raise DimensionError(f"expected {int(mask.sum())} free values, got {y_free.shape}")
    y = np.empty(grid.n + 1)
    y[mask] = y_free
    pa, pb = pinned_ends(bc)
    if pa is not None:
        y[0] = pa
    if pb is not None:
        y[-1] = pb
    return y


def _recursion_matrices(h: np.ndarray):
    """The printed cubic recursion in matrix form.

    Returns ``A`` (n, 4, n+1), ``B`` (n-1, 4, 4) and ``C`` (4, 2) with

        V_0 = A_0 y + C (v_0, w_0),    V_i = A_i y + B_{i-1} V_{i-1}.
    """
    n = h.size
    A = np.zeros((n, 4, n + 1))
    for i, hi in enumerate(h):
        A[i, 0, i] = 1.0
        A[i, 3, i] = -1.0 / hi**3
        A[i, 3, i + 1] = 1.0 / hi**3
    B = np.zeros((max(n - 1, 0), 4, 4))
    for i in range(1, n):
        hp, hi = h[i - 1], h[i]
        B[i - 1] = [
            [0, 0, 0, 0],
            [0, 1, 2 * hp, 3 * hp**2],
            [0, 0, 1, 3 * hp],
            [0, -1 / hi**2, -(2 * hp + hi) / hi**2, -3 * hp * (hp + hi) / hi**2],
        ]
    h0 = h[0]
    C = np.array([[0, 0], [1, 0], [0, 0.5], [-1 / h0**2, -1 / (2 * h0)]])
    return A, B, C


@dataclass(frozen=True, eq=False)
class CoefficientTape:
    """Sensitivities of local spline coefficients to the free knot values.

    ``recursive[i]`` is the gradient of the coefficients of the forward
    (initial-value) cubic on interval ``i``; ``clamped`` is the same for
    the clamped spline with end derivatives held fixed. Both depend only on
    the knot geometry. ``space`` holds the clamped linear maps.
    """

    grid: KnotGrid
    free: np.ndarray
    degree: int
    space: ClampedSpace
    A: Optional[np.ndarray]
    B: Optional[np.ndarray]
    C0: Optional[np.ndarray]
    recursive: Optional[np.ndarray]
    clamped: np.ndarray
    pinned: np.ndarray
    end_grad_a: np.ndarray
    end_grad_b: np.ndarray

    @property
    def m(self) -> int:
        return int(self.free.sum())


def _end_rows(coeffs: np.ndarray, h_last: float, at: str) -> np.ndarray:
    """Derivatives 0..q at a or b for stacked coefficients (n, q+1, K) -> (q+1, K)."""
    q = coeffs.shape[1] - 1
    out = np.empty((q + 1, coeffs.shape[2]))
    for r in range(q + 1):
        j = np.arange(r, q + 1)
        if at == "a":
            out[r] = perm(r, r) * coeffs[0, r]
        else:
            w = np.array([perm(int(k), r) for k in j]) * h_last ** (j - r)
            out[r] = w @ coeffs[-1, r:]
    return out


def coefficient_gradient_tape(grid: KnotGrid, free, degree: int = 3, method=None) -> CoefficientTape:
    """Build the coefficient tape for a grid and a free-value pattern.

    ``free`` is a boolean mask over the ``n + 1`` knot values, or one of
    ``"all"`` / ``"interior"`` (Dirichlet pins both ends).
    """
    if isinstance(free, str):
        mask = np.ones(grid.n + 1, dtype=bool)
        if free == "interior":
            mask[[0, -1]] = False
        elif free != "all":
            raise ValueError(f"unknown free pattern {free!r}")
    else:
        mask = np.asarray(free, dtype=bool)
        if mask.shape != (grid.n + 1,):
            raise DimensionError(f"free mask must have {grid.n + 1} entries")
    space = ClampedSpace(grid, degree, method)
    A = B = C0 = recursive = None
    if degree == 3:
        A, B, C0 = _recursion_matrices(grid.spacings)
        grads = np.empty_like(A)
        grads[0] = A[0]
        for i in range(1, grid.n):
            grads[i] = A[i] + B[i - 1] @ grads[i - 1]
        recursive = grads[:, :, mask]
    h_last = grid.spacings[-1]
    clamped = space.value_map[:, :, mask]
    return CoefficientTape(
        grid=grid,
        free=mask,
        degree=degree,
        space=space,
        A=A,
        B=B,
        C0=C0,
        recursive=recursive,
        clamped=clamped,
        pinned=space.value_map[:, :, ~mask],
        end_grad_a=_end_rows(clamped, h_last, "a"),
        end_grad_b=_end_rows(clamped, h_last, "b"),
    )


class Collocation:
    """Design matrices mapping flattened spline coefficients to derivative
    values at fixed collocation points."""

    def __init__(self, grid: KnotGrid, degree: int, points):
        self.points = np.asarray(points, dtype=float)
        if self.points.min() < grid.a or self.points.max() > grid.b:
            raise DimensionError("collocation points must lie in [a, b]")
        self.grid = grid
        self.degree = degree
        q = degree
        idx = np.clip(np.searchsorted(grid.knots, self.points, side="right") - 1, 0, grid.n - 1)
        t = self.points - grid.knots[idx]
        N = self.points.size
        design = np.zeros((q + 1, N, grid.n, q + 1))
        rows = np.arange(N)
        for r in range(q + 1):
            for k in range(r, q + 1):
                design[r, rows, idx, k] = perm(k, r) * t ** (k - r)
        self.design = design.reshape(q + 1, N, grid.n * (q + 1))
        self._cache = {}

    def derivatives(self, coeffs: np.ndarray) -> np.ndarray:
        """(q+1, N) array of S^(r)(xi_j)."""
        return self.design @ coeffs.reshape(-1)

    def sensitivities(self, tape: CoefficientTape):
        """Per-order (N, m) gradients wrt free values and (N, k) end responses."""
        key = id(tape)
        if key not in self._cache:
            flat_free = tape.clamped.reshape(-1, tape.m)
            flat_end = tape.space.end_map.reshape(-1, tape.space.n_ends)
            self._cache[key] = (self.design @ flat_free, self.design @ flat_end, tape)
        dy, dalpha, _ = self._cache[key]
        return dy, dalpha


@dataclass(frozen=True, eq=False)
class LossReport:
    """Loss value and diagnostics for one set of knot values.

    With ``norm="Linf"`` the gradient is that of the largest residual term,
    a subgradient of the max-norm.
    """

    value: float
    gradient: np.ndarray
    residuals: np.ndarray
    alpha: AlphaSet
    norm: str
    spline: PiecewisePolynomial
    points: np.ndarray

    @property
    def residual_norm(self) -> float:
        """Root mean square of the residuals."""
        return float(np.sqrt(np.mean(self.residuals**2)))


def _loss_value(residuals, norm):
    if norm == "L2":
        return 0.5 * float(np.mean(residuals**2))
    if norm == "Linf":
        return float(np.max(np.abs(residuals)))
    raise ValueError(f"unknown norm {norm!r}")


def _evaluate(problem, bc, tape, y, colloc, alpha_guess):
    space = tape.space
    model = EndpointModel.from_space(space, y)
    alpha = solve_alphas(problem, bc, model, y[0], y[-1], alpha_guess)
    coeffs = space.value_map @ y + space.end_map @ alpha.values
    derivs = colloc.derivatives(coeffs)
    residuals = np.asarray(problem.residual(colloc.points, derivs), dtype=float)
    return alpha, coeffs, derivs, residuals, model


def loss_value(problem, bc, tape, y_free, colloc, norm="L2", alpha_guess=None):
    """Loss only; no gradient work."""
    y = assemble_values(tape.grid, bc, y_free)
    _, _, _, residuals, _ = _evaluate(problem, bc, tape, y, colloc, alpha_guess)
    return _loss_value(residuals, norm)


def _alpha_sensitivity(problem, bc, tape, y, alpha, model):
    """d alpha / d y_free for cubic splines, shape (2, m)."""
    m = tape.m
    free = tape.free
    out = np.zeros((2, m))
    # column positions of y_0 and y_n among the free values
    col0 = 0 if free[0] else None
    coln = m - 1 if free[-1] else None
    a, b = problem.a, problem.b
    if isinstance(bc, Neumann):
        return out
    if isinstance(bc, Robin):
        if col0 is not None:
            out[0, col0] = -bc.gamma_a
        if coln is not None:
            out[1, coln] = -bc.gamma_b
        return out
    if isinstance(bc, GeneralImplicit):
        gu, gv = bc.g_partials(a, y[0], alpha[0])
        hu, hv = bc.h_partials(b, y[-1], alpha[1])
        scale_g = max(abs(gu), 1.0)
        scale_h = max(abs(hu), 1.0)
        if abs(gv) <= 1e-12 * scale_g or abs(hv) <= 1e-12 * scale_h:
            raise SingularSensitivityError(
                f"boundary condition insensitive to the slope: dg/dv={gv}, dh/dv={hv}"
            )
        if col0 is not None:
            out[0, col0] = -gu / gv
        if coln is not None:
            out[1, coln] = -hu / hv
        return out
    if isinstance(bc, Dirichlet):
        P = problem.partials
        wa = model.at_a(alpha.values, 2)
        wb = model.at_b(alpha.values, 2)
        args_a = (a, y[0], alpha[0], wa)
        args_b = (b, y[-1], alpha[1], wb)
        fva, fwa = float(P[2](*args_a)), float(P[3](*args_a))
        fvb, fwb = float(P[2](*args_b)), float(P[3](*args_b))
        G_alpha = np.array(
            [
                [fva + fwa * model.resp_a[2, 0], fwa * model.resp_a[2, 1]],
                [fwb * model.resp_b[2, 0], fvb + fwb * model.resp_b[2, 1]],
            ]
        )
        G_y = np.vstack([fwa * tape.end_grad_a[2], fwb * tape.end_grad_b[2]])
        scale = np.max(np.abs(G_alpha)) if np.any(G_alpha) else 0.0
        if scale == 0.0 or abs(np.linalg.det(G_alpha)) <= 1e-13 * scale**2:
            raise SingularSensitivityError(
                f"end-derivative sensitivity system is singular: {G_alpha.tolist()}"
            )
        return -np.linalg.solve(G_alpha, G_y)
    raise TypeError(f"unsupported boundary spec {type(bc).__name__}")


def loss_and_gradient(
    problem: OdeProblem,
    bc,
    grid: KnotGrid,
    y_free,
    colloc: Collocation,
    degree: int,
    tape: CoefficientTape,
    norm: str = "L2",
    alpha_guess=None,
) -> LossReport:
    """Loss ``J`` and ``grad_y J`` at the free knot values ``y_free``.

    ``J = (1 / 2N) sum_j R_j**2`` for ``norm="L2"`` and ``max_j |R_j|`` for
    ``"Linf"``, where ``R_j = F(xi_j, S(xi_j), S'(xi_j), ...)``. The end
    derivatives are re-solved for every call (starting Newton from
    ``alpha_guess``) and their dependence on ``y`` enters the gradient.

    Cubic gradients are exact. Quintic gradients, and all fourth-order
    problems, use :func:`fd_gradient`.
    """
    if tape.grid != grid or tape.degree != degree:
        raise DimensionError("tape was built for a different grid or degree")
    if colloc.grid != grid or colloc.degree != degree:
        raise DimensionError("collocation set was built for a different grid or degree")
    y = assemble_values(grid, bc, y_free)
    alpha, coeffs, derivs, residuals, model = _evaluate(problem, bc, tape, y, colloc, alpha_guess)
    if not np.all(np.isfinite(residuals)):
        raise EvaluationError("non-finite residual at a collocation point")
    value = _loss_value(residuals, norm)
    N = residuals.size

    if degree == 3 and problem.order == 2 and not isinstance(bc, FourthOrderSet):
        dy, dalpha = colloc.sensitivities(tape)
        dalpha_dy = _alpha_sensitivity(problem, bc, tape, y, alpha, model)
        grad_r = np.zeros((N, tape.m))
        xi = colloc.points
        for r in range(3):
            Fr = np.asarray(problem.partial(r + 1, xi, derivs), dtype=float)
            grad_r += Fr[:, None] * (dy[r] + dalpha[r] @ dalpha_dy)
        if norm == "L2":
            gradient = grad_r.T @ residuals / N
        else:
            j = int(np.argmax(np.abs(residuals)))
            gradient = np.sign(residuals[j]) * grad_r[j]
    else:
        guess = alpha.values

        def scalar_loss(z):
            return loss_value(problem, bc, tape, z, colloc, norm, guess)

        gradient = fd_gradient(scalar_loss, np.asarray(y_free, dtype=float))

    return LossReport(
        value=value,
        gradient=np.asarray(gradient, dtype=float),
        residuals=residuals,
        alpha=alpha,
        norm=norm,
        spline=PiecewisePolynomial(grid, coeffs),
        points=colloc.points,
    )


def fd_gradient(loss: Callable, y_free, step_rule: Optional[Callable] = None) -> np.ndarray:
    """Central-difference gradient of a scalar function.

    The default step for component ``k`` is ``1e-6 (1 + |y_k|)``.
    """
    y = np.asarray(y_free, dtype=float)
    grad = np.empty_like(y)
    for k in range(y.size):
        step = step_rule(y[k]) if step_rule else 1e-6 * (1.0 + abs(y[k]))
        up = y.copy()
        dn = y.copy()
        up[k] += step
        dn[k] -= step
        fu, fd = loss(up), loss(dn)
        if not (np.isfinite(fu) and np.isfinite(fd)):
            raise EvaluationError(f"loss is not finite when perturbing component {k}")
        grad[k] = (fu - fd) / (2 * step)
    return grad
