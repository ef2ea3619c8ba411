"""Coupling boundary conditions to the spline's end derivatives.

A clamped spline on fixed data is fully determined by its end derivatives
``alpha`` (``S'(a), S'(b)`` for cubics; ``S'(a), S''(a), S'(b), S''(b)`` for
quintics). This module turns a boundary condition plus, where needed, the
ODE itself evaluated at ``a`` and ``b`` into those numbers.
"""

from __future__ import annotations

import logging
from math import factorial, perm
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionError,
    NoConvergenceError,
    SingularSystemError,
)
from .spline import ClampedSpace, KnotGrid, SplineBasisSet

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50

_EPS = np.finfo(float).eps


def _central_partial(fun, args, k, step=1e-6):
    args = [np.asarray(a, dtype=float) for a in args]
    h = step * (1.0 + np.abs(args[k]))
    up = list(args)
    dn = list(args)
    up[k] = args[k] + h
    dn[k] = args[k] - h
    return (fun(*up) - fun(*dn)) / (2 * h)


@dataclass
class OdeProblem:
    """``F(x, u, u', u'', ...) = 0`` on ``[a, b]``.

    ``F`` takes ``(x, u, v, w)`` for second-order problems and
    ``(x, u, v, w, p, q)`` for fourth-order ones (``p = u'''``,
    ``q = u''''``); it must accept numpy arrays. ``partials`` lists the
    partial derivatives in the same argument order, starting with the one
    in ``x``. Entries left as ``None`` are replaced by central differences.

    ``affine_top`` declares that ``F`` is affine in its highest derivative
    argument, which lets endpoint equations in that argument be solved in
    one step instead of by Newton iteration.
    """

    F: Callable
    domain: tuple
    partials: Sequence[Optional[Callable]] = ()
    order: int = 2
    affine_top: bool = False
    name: str = ""

    def __post_init__(self):
        if self.order not in (2, 4):
            raise DimensionError(f"only order 2 and 4 problems are supported, got {self.order}")
        a, b = (float(t) for t in self.domain)
        if not a < b:
            raise DimensionError(f"domain must satisfy a < b, got {self.domain}")
        self.domain = (a, b)
        nargs = self.order + 2
        parts = list(self.partials) + [None] * (nargs - len(self.partials))
        if len(parts) != nargs:
            raise DimensionError(f"expected {nargs} partials, got {len(self.partials)}")
        self.partials = tuple(
            p if p is not None else self._numeric_partial(k) for k, p in enumerate(parts)
        )
        self._probe()

    def _numeric_partial(self, k):
        F = self.F

        def partial(*args):
            return _central_partial(F, args, k)

        return partial

    def _probe(self):
        a, b = self.domain
        xs = np.linspace(a, b, 5)
        for state in (0.0, 0.5, -1.0):
            args = [xs] + [np.full_like(xs, state)] * (self.order + 1)
            for fun in (self.F, *self.partials):
                val = np.asarray(fun(*args), dtype=float)
                if not np.all(np.isfinite(val)):
                    raise ValueError(
                        f"problem {self.name or '<unnamed>'}: non-finite value when "
                        f"probing F or a partial at state {state}"
                    )

    @property
    def a(self) -> float:
        return self.domain[0]

    @property
    def b(self) -> float:
        return self.domain[1]

    def residual(self, x, derivs):
        """``F`` at points ``x`` given the stacked derivatives ``derivs[k] = u^(k)(x)``."""
        return self.F(x, *derivs[: self.order + 1])

    def partial(self, k, x, derivs):
        return self.partials[k](x, *derivs[: self.order + 1])


@dataclass(frozen=True)
class Dirichlet:
    ua: float
    ub: float


@dataclass(frozen=True)
class Neumann:
    va: float
    vb: float


@dataclass(frozen=True)
class Robin:
    """``u'(a) + gamma_a u(a) = c_a`` and ``u'(b) + gamma_b u(b) = c_b``."""

    gamma_a: float
    c_a: float
    gamma_b: float
    c_b: float


@dataclass(frozen=True)
class GeneralImplicit:
    """``g(a, u(a), u'(a)) = 0`` and ``h(b, u(b), u'(b)) = 0``.

    Partials are ``(d/du, d/dv)`` pairs; ``None`` falls back to central
    differences.
    """

    g: Callable
    h: Callable
    g_u: Optional[Callable] = None
    g_v: Optional[Callable] = None
    h_u: Optional[Callable] = None
    h_v: Optional[Callable] = None

    def g_partials(self, x, u, v):
        gu = self.g_u(x, u, v) if self.g_u else _central_partial(self.g, (x, u, v), 1)
        gv = self.g_v(x, u, v) if self.g_v else _central_partial(self.g, (x, u, v), 2)
        return float(gu), float(gv)

    def h_partials(self, x, u, v):
        hu = self.h_u(x, u, v) if self.h_u else _central_partial(self.h, (x, u, v), 1)
        hv = self.h_v(x, u, v) if self.h_v else _central_partial(self.h, (x, u, v), 2)
        return float(hu), float(hv)


@dataclass(frozen=True)
class FourthOrderSet:
    """Two conditions at each end of a fourth-order problem.

    Each condition is a callable ``(x, u, u', u'')``. When ``pin_a`` is set,
    ``u(a)`` is fixed to that value, the knot value ``y_0`` leaves the
    unknowns, and only ``g1`` is used at ``a``; the missing equation is the
    ODE itself at ``a``. ``pin_b`` and ``h1`` work the same way at ``b``.

    ``affine`` declares every condition affine in ``(u', u'')``.
    """

    g1: Callable
    g2: Optional[Callable]
    h1: Callable
    h2: Optional[Callable]
    pin_a: Optional[float] = None
    pin_b: Optional[float] = None
    affine: bool = False

    def __post_init__(self):
        if self.pin_a is None and self.g2 is None:
            raise DimensionError("two conditions are needed at a unless u(a) is pinned")
        if self.pin_b is None and self.h2 is None:
            raise DimensionError("two conditions are needed at b unless u(b) is pinned")


BoundarySpec = (Dirichlet, Neumann, Robin, GeneralImplicit, FourthOrderSet)


def pinned_ends(bc) -> tuple:
    """Fixed values of ``(y_0, y_n)``; ``None`` where the knot value is free."""
    if isinstance(bc, Dirichlet):
        return bc.ua, bc.ub
    if isinstance(bc, FourthOrderSet):
        return bc.pin_a, bc.pin_b
    return None, None


@dataclass
class AlphaSet:
    values: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape not in ((2,), (4,)):
            raise DimensionError(f"an alpha set has 2 or 4 entries, got {self.values.shape}")

    def __len__(self):
        return self.values.size

    def __getitem__(self, k):
        return self.values[k]


def newton_solve(system, jacobian, x0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Newton-Raphson for small square systems.

    ``jacobian`` may be ``None``, in which case central differences with
    step ``1e-7 (1 + |x_k|)`` are used. Steps that increase the residual are
    halved (up to 30 times). Returns ``(x, iterations)``.

    Raises :class:`SingularSystemError` when the Jacobian condition number
    exceeds 1e14 and :class:`NoConvergenceError` (carrying the best iterate)
    after ``max_iter`` iterations.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    m = x.size
    if m > 4:
        raise DimensionError(f"newton_solve handles at most 4 unknowns, got {m}")

    def fun(z):
        return np.atleast_1d(np.asarray(system(z), dtype=float))

    def jac(z):
        if jacobian is not None:
            return np.atleast_2d(np.asarray(jacobian(z), dtype=float))
        J = np.empty((m, m))
        for k in range(m):
            step = 1e-7 * (1.0 + abs(z[k]))
            up, dn = z.copy(), z.copy()
            up[k] += step
            dn[k] -= step
            J[:, k] = (fun(up) - fun(dn)) / (2 * step)
        return J

    r = fun(x)
    if r.shape != (m,):
        raise DimensionError(f"system returned shape {r.shape} for {m} unknowns")
    norm = np.max(np.abs(r))
    best, best_norm = x.copy(), norm
    for it in range(1, max_iter + 1):
        if not np.isfinite(norm):
            break
        if norm <= tol:
            return x, it - 1
        J = jac(x)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e14:
            raise SingularSystemError(f"singular Jacobian at {x}: {J.tolist()}")
        dx = np.linalg.solve(J, -r)
        lam = 1.0
        for _ in range(30):
            xn = x + lam * dx
            rn = fun(xn)
            nn = np.max(np.abs(rn))
            if np.isfinite(nn) and nn <= norm:
                break
            lam *= 0.5
        x, r, norm = xn, rn, nn
        if norm < best_norm:
            best, best_norm = x.copy(), norm
        if np.max(np.abs(lam * dx)) <= 4 * _EPS * (1.0 + np.max(np.abs(x))):
            # stalled at the rounding floor of the residual
            if norm <= max(tol, 1e3 * _EPS * (1.0 + np.max(np.abs(r)))):
                return x, it
            break
    if best_norm <= tol:
        return best, max_iter
    raise NoConvergenceError(
        f"Newton did not converge: residual {best_norm:.3e} after {max_iter} iterations",
        best=best,
        residual=best_norm,
    )


class EndpointModel:
    """End derivatives of ``S = W_0 + sum_k alpha_k P_k`` at ``a`` and ``b``.

    ``base_a[r]`` is ``W_0^(r)(a)``; ``resp_a[r, k]`` is ``P_k^(r)(a)`` where
    ``P_k = W_k - W_0`` does not depend on the knot values.
    """

    def __init__(self, degree, base_a, base_b, resp_a, resp_b):
        self.degree = degree
        self.base_a = np.asarray(base_a, dtype=float)
        self.base_b = np.asarray(base_b, dtype=float)
        self.resp_a = np.asarray(resp_a, dtype=float)
        self.resp_b = np.asarray(resp_b, dtype=float)

    @classmethod
    def from_basis(cls, basis: SplineBasisSet):
        grid = basis.grid
        q = basis.degree
        ends = np.array([grid.a, grid.b])
        vals = np.array([[m(ends, r) for r in range(q + 1)] for m in basis.members])
        # vals: (members, orders, 2)
        base = vals[0]
        resp = vals[1:] - vals[0]
        return cls(q, base[:, 0], base[:, 1], resp[:, :, 0].T, resp[:, :, 1].T)

    @classmethod
    def from_space(cls, space: ClampedSpace, y):
        resp_a, resp_b = space_end_responses(space)
        w0 = space.value_map @ np.asarray(y, dtype=float)
        base_a, base_b = _end_derivs(w0, space.grid.spacings[-1])
        return cls(space.degree, base_a, base_b, resp_a, resp_b)

    def at_a(self, alpha, order):
        return self.base_a[order] + self.resp_a[order] @ alpha

    def at_b(self, alpha, order):
        return self.base_b[order] + self.resp_b[order] @ alpha


def _end_derivs(coeffs, h_last):
    """All derivatives at a (first piece) and b (last piece) from local coefficients."""
    q = coeffs.shape[1] - 1
    first = coeffs[0]
    last = coeffs[-1]
    at_a = np.array([factorial(r) * first[r] for r in range(q + 1)])
    at_b = np.empty(q + 1)
    for r in range(q + 1):
        j = np.arange(r, q + 1)
        w = np.array([perm(int(k), r) for k in j]) * h_last ** (j - r)
        at_b[r] = w @ last[r:]
    return at_a, at_b


def space_end_responses(space: ClampedSpace):
    """``(resp_a, resp_b)``: end derivatives of each unit end-data response."""
    cached = getattr(space, "_end_responses", None)
    if cached is not None:
        return cached
    k = space.n_ends
    q = space.degree
    ra = np.empty((q + 1, k))
    rb = np.empty((q + 1, k))
    for j in range(k):
        ra[:, j], rb[:, j] = _end_derivs(space.end_map[:, :, j], space.grid.spacings[-1])
    space._end_responses = (ra, rb)
    return ra, rb


def _scalar_root(fun, dfun, guess, affine, label):
    """Solve ``fun(t) = 0``; one exact step when ``fun`` is affine."""
    if affine:
        d = dfun(guess)
        if d == 0 or not np.isfinite(d):
            raise SingularSystemError(f"{label}: zero derivative in closed-form solve")
        return guess - fun(guess) / d, 1
    # a start at a critical point (e.g. v**3 at v = 0) is retried nearby
    last = None
    for offset in (0.0, 1.0, -1.0, 10.0, -10.0):
        try:
            x, it = newton_solve(
                lambda z: [fun(z[0])], lambda z: [[dfun(z[0])]], [guess + offset]
            )
            return float(x[0]), it
        except SingularSystemError as exc:
            last = exc
        except NoConvergenceError as exc:
            raise NoConvergenceError(f"{label}: {exc}", best=exc.best, residual=exc.residual) from exc
    raise SingularSystemError(f"{label}: {last}")


def _guess(guess, size):
    if guess is None:
        return np.zeros(size)
    g = np.asarray(guess, dtype=float)
    if g.shape != (size,):
        return np.zeros(size)
    return g


def solve_alphas(problem: OdeProblem, bc, model: EndpointModel, y0, yn, guess=None) -> AlphaSet:
    """Dispatch on BC variant and spline degree; see :func:`resolve_alphas_second_order`."""
    q = model.degree
    a, b = problem.a, problem.b
    P = problem.partials
    if problem.order == 4:
        if not isinstance(bc, FourthOrderSet):
            raise TypeError("fourth-order problems take a FourthOrderSet boundary spec")
        return _fourth_order(problem, bc, model, y0, yn, guess)
    if isinstance(bc, FourthOrderSet):
        raise TypeError("a FourthOrderSet needs a fourth-order problem")

    if q == 3:
        if isinstance(bc, Neumann):
            return AlphaSet([bc.va, bc.vb])
        if isinstance(bc, Robin):
            return AlphaSet([bc.c_a - bc.gamma_a * y0, bc.c_b - bc.gamma_b * yn])
        if isinstance(bc, GeneralImplicit):
            return AlphaSet(_implicit_slopes(bc, a, b, y0, yn, guess), 0)
        if isinstance(bc, Dirichlet):
            g = _guess(guess, 2)

            def system(al):
                wa = model.at_a(al, 2)
                wb = model.at_b(al, 2)
                return [problem.F(a, y0, al[0], wa), problem.F(b, yn, al[1], wb)]

            def jacobian(al):
                wa = model.at_a(al, 2)
                wb = model.at_b(al, 2)
                fva, fwa = P[2](a, y0, al[0], wa), P[3](a, y0, al[0], wa)
                fvb, fwb = P[2](b, yn, al[1], wb), P[3](b, yn, al[1], wb)
                return [
                    [fva + fwa * model.resp_a[2, 0], fwa * model.resp_a[2, 1]],
                    [fwb * model.resp_b[2, 0], fvb + fwb * model.resp_b[2, 1]],
                ]

            x, it = _newton_labelled(system, jacobian, g, "Dirichlet (cubic)")
            return AlphaSet(x, it)
        raise TypeError(f"unsupported boundary spec {type(bc).__name__}")

    # quintic: alpha = (S'(a), S''(a), S'(b), S''(b))
    g = _guess(guess, 4)
    Fw_a = lambda v, w: P[3](a, y0, v, w)  # noqa: E731
    Fw_b = lambda v, w: P[3](b, yn, v, w)  # noqa: E731

    if isinstance(bc, (Neumann, Robin, GeneralImplicit)):
        if isinstance(bc, Neumann):
            va, vb = bc.va, bc.vb
            it = 0
        elif isinstance(bc, Robin):
            va, vb = bc.c_a - bc.gamma_a * y0, bc.c_b - bc.gamma_b * yn
            it = 0
        else:
            va, vb = _implicit_slopes(bc, a, b, y0, yn, g[[0, 2]])
            it = 0
        label = type(bc).__name__ + " (quintic)"
        wa, ia = _scalar_root(
            lambda w: problem.F(a, y0, va, w), lambda w: Fw_a(va, w), g[1],
            problem.affine_top, label + " at a",
        )
        wb, ib = _scalar_root(
            lambda w: problem.F(b, yn, vb, w), lambda w: Fw_b(vb, w), g[3],
            problem.affine_top, label + " at b",
        )
        return AlphaSet([va, wa, vb, wb], it + max(ia, ib))

    if isinstance(bc, Dirichlet):

        def system(al):
            va, wa, vb, wb = al
            sa3 = model.at_a(al, 3)
            sb3 = model.at_b(al, 3)
            da = (
                P[0](a, y0, va, wa) + va * P[1](a, y0, va, wa)
                + wa * P[2](a, y0, va, wa) + sa3 * P[3](a, y0, va, wa)
            )
            db = (
                P[0](b, yn, vb, wb) + vb * P[1](b, yn, vb, wb)
                + wb * P[2](b, yn, vb, wb) + sb3 * P[3](b, yn, vb, wb)
            )
            return [problem.F(a, y0, va, wa), problem.F(b, yn, vb, wb), da, db]

        x, it = _newton_labelled(system, None, g, "Dirichlet (quintic)")
        return AlphaSet(x, it)
    raise TypeError(f"unsupported boundary spec {type(bc).__name__}")


def _newton_labelled(system, jacobian, guess, label):
    try:
        return newton_solve(system, jacobian, guess)
    except NoConvergenceError as exc:
        raise NoConvergenceError(f"{label}: {exc}", best=exc.best, residual=exc.residual) from exc
    except SingularSystemError as exc:
        raise SingularSystemError(f"{label}: {exc}") from exc


def _implicit_slopes(bc: GeneralImplicit, a, b, y0, yn, guess):
    g = _guess(guess, 2)
    va, _ = _scalar_root(
        lambda v: bc.g(a, y0, v), lambda v: bc.g_partials(a, y0, v)[1], g[0], False,
        "GeneralImplicit at a",
    )
    vb, _ = _scalar_root(
        lambda v: bc.h(b, yn, v), lambda v: bc.h_partials(b, yn, v)[1], g[1], False,
        "GeneralImplicit at b",
    )
    return va, vb


def _fourth_order(problem, bc: FourthOrderSet, model, y0, yn, guess):
    a, b = problem.a, problem.b
    g = _guess(guess, 4)

    def ode_at(side, al):
        if side == "a":
            d = [model.at_a(al, r) for r in range(5)]
            return problem.F(a, *d)
        d = [model.at_b(al, r) for r in range(5)]
        return problem.F(b, *d)

    if bc.pin_a is None and bc.pin_b is None:
        # two independent 2x2 systems
        def sys_a(z):
            return [bc.g1(a, y0, z[0], z[1]), bc.g2(a, y0, z[0], z[1])]

        def sys_b(z):
            return [bc.h1(b, yn, z[0], z[1]), bc.h2(b, yn, z[0], z[1])]

        if bc.affine:
            za, ia = _affine_solve(sys_a, g[:2], "fourth-order set at a")
            zb, ib = _affine_solve(sys_b, g[2:], "fourth-order set at b")
        else:
            za, ia = _newton_labelled(sys_a, None, g[:2], "fourth-order set at a")
            zb, ib = _newton_labelled(sys_b, None, g[2:], "fourth-order set at b")
        return AlphaSet(np.concatenate([za, zb]), max(ia, ib))

    # a pinned end borrows the ODE at that end, which couples all four unknowns
    def system(al):
        out = [bc.g1(a, y0, al[0], al[1])]
        out.append(ode_at("a", al) if bc.pin_a is not None else bc.g2(a, y0, al[0], al[1]))
        out.append(bc.h1(b, yn, al[2], al[3]))
        out.append(ode_at("b", al) if bc.pin_b is not None else bc.h2(b, yn, al[2], al[3]))
        return out

    x, it = _newton_labelled(system, None, g, "fourth-order set")
    return AlphaSet(x, it)


def _affine_solve(system, x0, label):
    """Exact solve of an affine 2x2 system from unit differences."""
    x0 = np.asarray(x0, dtype=float)
    r0 = np.asarray(system(x0), dtype=float)
    J = np.empty((2, 2))
    for k in range(2):
        e = x0.copy()
        e[k] += 1.0
        J[:, k] = np.asarray(system(e), dtype=float) - r0
    if np.linalg.cond(J) > 1e14:
        raise SingularSystemError(f"{label}: singular affine system {J.tolist()}")
    return x0 + np.linalg.solve(J, -r0), 1


def resolve_alphas_second_order(
    problem: OdeProblem, bc, grid: KnotGrid, y, basis: SplineBasisSet, guess=None
) -> AlphaSet:
    """End derivatives for a second-order problem.

    * Neumann, cubic: the prescribed slopes.
    * Robin: closed form ``S'(a) = c_a - gamma_a y_0`` (and at ``b``).
    * GeneralImplicit: scalar solves of ``g(a, y_0, S'(a)) = 0`` and
      ``h(b, y_n, S'(b)) = 0``.
    * Dirichlet, cubic: the ODE at both ends, with ``S''`` expanded in the
      basis, as a 2x2 Newton system.
    * quintic, slope known (Neumann/Robin/GeneralImplicit): scalar solves
      of the ODE at each end for ``S''``.
    * Dirichlet, quintic: the ODE and its x-derivative at both ends, a
      coupled 4x4 system (``S'''`` expanded in the basis).
    """
    if problem.order != 2:
        raise DimensionError("use resolve_alphas_fourth_order for fourth-order problems")
    y = np.asarray(y, dtype=float)
    if y.shape != (grid.n + 1,):
        raise DimensionError(f"expected {grid.n + 1} knot values, got {y.shape}")
    model = EndpointModel.from_basis(basis)
    return solve_alphas(problem, bc, model, y[0], y[-1], guess)


def resolve_alphas_fourth_order(
    problem: OdeProblem, bc: FourthOrderSet, grid: KnotGrid, y, basis: SplineBasisSet, guess=None
) -> AlphaSet:
    """End derivatives for a fourth-order problem from two conditions per end."""
    if problem.order != 4:
        raise DimensionError("resolve_alphas_fourth_order needs an order-4 problem")
    if basis.degree != 5:
        raise DimensionError("fourth-order problems need a quintic basis")
    y = np.asarray(y, dtype=float)
    model = EndpointModel.from_basis(basis)
    return solve_alphas(problem, bc, model, y[0], y[-1], guess)


def bc_residuals(problem: OdeProblem, bc, spline) -> np.ndarray:
    """Residuals of the boundary conditions for an assembled spline."""
    a, b = problem.a, problem.b
    ua, va, wa = (spline(a, r) for r in range(3))
    ub, vb, wb = (spline(b, r) for r in range(3))
    if isinstance(bc, Dirichlet):
        return np.array([ua - bc.ua, ub - bc.ub])
    if isinstance(bc, Neumann):
        return np.array([va - bc.va, vb - bc.vb])
    if isinstance(bc, Robin):
        return np.array([va + bc.gamma_a * ua - bc.c_a, vb + bc.gamma_b * ub - bc.c_b])
    if isinstance(bc, GeneralImplicit):
        return np.array([bc.g(a, ua, va), bc.h(b, ub, vb)], dtype=float)
    if isinstance(bc, FourthOrderSet):
        out = [bc.g1(a, ua, va, wa), bc.h1(b, ub, vb, wb)]
        out.append(ua - bc.pin_a if bc.pin_a is not None else bc.g2(a, ua, va, wa))
        out.append(ub - bc.pin_b if bc.pin_b is not None else bc.h2(b, ub, vb, wb))
        return np.array(out, dtype=float)
    raise TypeError(f"unsupported boundary spec {type(bc).__name__}")


@dataclass
class AlphaSession:
    """Warm-started alpha resolution for one solve.

    The previous solution seeds the next Newton solve; the first call
    starts from zeros. Not shared between solves.
    """

    problem: OdeProblem
    bc: object
    last: Optional[np.ndarray] = None
    iterations: list = field(default_factory=list)

    def solve(self, model: EndpointModel, y0, yn) -> AlphaSet:
        alpha = solve_alphas(self.problem, self.bc, model, y0, yn, self.last)
        self.last = alpha.values.copy()
        self.iterations.append(alpha.iterations)
        return alpha
