"""Interpolating cubic and quintic splines with prescribed end derivatives.

Splines are stored piecewise in local coordinates: on ``[x_i, x_{i+1}]``

    S_i(x) = sum_k coeffs[i, k] * (x - x_i)**k,   k = 0..q

Two construction routes are provided:

* the forward recursion, which starts from the value and the ``q - 1``
  derivatives at ``x_0`` and marches knot by knot without any linear solve;
* clamped construction, which fixes first (cubic) or first and second
  (quintic) derivatives at both ends.

Every clamped spline is affine in the knot values and the end data, so a
:class:`ClampedSpace` precomputes the two linear maps once per grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateGeometryError,
    DerivativeOrderError,
    DimensionError,
    InvalidDomainError,
    OutOfDomainError,
)

DEGREES = (3, 5)

# relative slack when deciding whether a point lies inside [a, b]
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class KnotGrid:
    knots: np.ndarray

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        if knots.ndim != 1 or knots.size < 2:
            raise InvalidDomainError("a knot grid needs at least two knots")
        if not np.all(np.isfinite(knots)):
            raise InvalidDomainError("knots must be finite")
        if np.any(np.diff(knots) <= 0):
            raise InvalidDomainError("knots must be strictly increasing")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.knots)

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.knots.size - 1

    @property
    def a(self) -> float:
        return float(self.knots[0])

    @property
    def b(self) -> float:
        return float(self.knots[-1])

    def __len__(self):
        return self.knots.size

    def __eq__(self, other):
        if not isinstance(other, KnotGrid):
            return NotImplemented
        return np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash(self.knots.tobytes())

    def __repr__(self):
        return f"KnotGrid(n={self.n}, a={self.a:g}, b={self.b:g})"


def make_knots(a: float, b: float, n: int, mode: str = "uniform") -> KnotGrid:
    """Return a grid with ``n`` intervals on ``[a, b]``.

    ``mode="chebyshev"`` gives the Chebyshev-Lobatto points, which include
    both endpoints.
    """
    if not a < b:
        raise InvalidDomainError(f"need a < b, got a={a}, b={b}")
    if int(n) != n or n < 1:
        raise InvalidDomainError(f"need at least one interval, got n={n}")
    n = int(n)
    i = np.arange(n + 1)
    if mode == "uniform":
        x = a + i * (b - a) / n
    elif mode == "chebyshev":
        x = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(i * np.pi / n)
        # the cosine does not hit 0 exactly at the midpoint
        if n % 2 == 0:
            x[n // 2] = 0.5 * (a + b)
    else:
        raise ValueError(f"unknown knot mode {mode!r}")
    x[0], x[-1] = a, b
    return KnotGrid(x)


def _derivative_factors(degree: int, order: int) -> np.ndarray:
    """Factors k!/(k-order)! applied to coefficient k when differentiating."""
    k = np.arange(order, degree + 1)
    return np.array([math.perm(int(j), order) for j in k], dtype=float)


@dataclass(frozen=True, eq=False)
class PiecewisePolynomial:
    grid: KnotGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != self.grid.n:
            raise DimensionError(
                f"expected {self.grid.n} coefficient rows, got shape {c.shape}"
            )
        if c.shape[1] - 1 not in DEGREES:
            raise DimensionError(f"unsupported degree {c.shape[1] - 1}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    def __call__(self, x, order: int = 0):
        return evaluate(self, x, order)

    def derivative_coeffs(self, order: int) -> np.ndarray:
        """Local coefficients of the ``order``-th derivative, shape (n, q+1-order)."""
        return self.coeffs[:, order:] * _derivative_factors(self.degree, order)

    def left_limit(self, i: int, order: int = 0) -> float:
        """Value of the piece on interval ``i`` at its right end ``x_{i+1}``."""
        h = self.grid.spacings[i]
        c = self.derivative_coeffs(order)[i]
        return float(np.polynomial.polynomial.polyval(h, c))

    def right_limit(self, i: int, order: int = 0) -> float:
        """Value of the piece on interval ``i`` at its left end ``x_i``."""
        return float(self.derivative_coeffs(order)[i, 0])


@dataclass(frozen=True)
class SplineBasisSet:
    degree: int
    members: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.members) != self.degree:
            raise DimensionError(
                f"a degree-{self.degree} basis has {self.degree} members, "
                f"got {len(self.members)}"
            )

    def __getitem__(self, k):
        return self.members[k]

    def __len__(self):
        return len(self.members)

    @property
    def grid(self) -> KnotGrid:
        return self.members[0].grid


def _locate(grid: KnotGrid, x: np.ndarray) -> np.ndarray:
    a, b = grid.a, grid.b
    slack = _DOMAIN_SLACK * (b - a)
    if np.any(x < a - slack) or np.any(x > b + slack) or np.any(np.isnan(x)):
        bad = x[(x < a - slack) | (x > b + slack) | np.isnan(x)]
        raise OutOfDomainError(f"points {bad[:5]} lie outside [{a}, {b}]")
    idx = np.searchsorted(grid.knots, x, side="right") - 1
    return np.clip(idx, 0, grid.n - 1)


def evaluate(spline: PiecewisePolynomial, x, order: int = 0):
    """Evaluate the ``order``-th derivative of ``spline`` at ``x``.

    Interior knots belong to the interval on their right, and ``x = b``
    belongs to the last interval. Scalars in, scalar out.
    """
    q = spline.degree
    if int(order) != order or order < 0 or order > q:
        raise DerivativeOrderError(f"derivative order must be in 0..{q}, got {order}")
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    idx = _locate(spline.grid, xs)
    t = xs - spline.grid.knots[idx]
    c = spline.derivative_coeffs(order)[idx]
    out = c[:, -1].copy()
    for k in range(c.shape[1] - 2, -1, -1):
        out = out * t + c[:, k]
    return float(out[0]) if scalar else out


def evaluate_all(spline: PiecewisePolynomial, x, max_order: int | None = None) -> np.ndarray:
    """Rows ``S(x), S'(x), ...`` up to ``max_order`` (default: the degree)."""
    if max_order is None:
        max_order = spline.degree
    return np.vstack([evaluate(spline, x, k) for k in range(max_order + 1)])


def _check_degree(degree):
    if degree not in DEGREES:
        raise DimensionError(f"degree must be 3 or 5, got {degree}")


def _as_values(grid: KnotGrid, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (grid.n + 1,):
        raise DimensionError(f"expected {grid.n + 1} knot values, got shape {y.shape}")
    return y


def _march(h: np.ndarray, y: np.ndarray, init: np.ndarray, degree: int) -> np.ndarray:
    """Forward recursion on stacked right-hand sides.

    ``y`` has shape (n+1, K) and ``init`` shape (q-1, K); returns the
    coefficient array of shape (n, q+1, K). Linear in (y, init) column by
    column, which is what the linear-map builders rely on.
    """
    q = degree
    n = h.size
    K = y.shape[1]
    coeffs = np.empty((n, q + 1, K))
    fact = np.array([math.factorial(k) for k in range(q + 1)], dtype=float)
    derivs = init.copy()  # derivatives 1..q-1 at the current knot
    for i in range(n):
        hi = h[i]
        c = coeffs[i]
        c[0] = y[i]
        c[1:q] = derivs / fact[1:q, None]
        powers = hi ** np.arange(q)
        c[q] = (y[i + 1] - powers @ c[:q]) / hi**q
        # derivatives 1..q-1 at x_{i+1}
        for r in range(1, q):
            j = np.arange(r, q + 1)
            w = np.array([math.perm(int(k), r) for k in j]) * hi ** (j - r)
            derivs[r - 1] = w @ c[r:]
    return coeffs


def build_recursive(grid: KnotGrid, y, init_derivs) -> PiecewisePolynomial:
    """Spline with value and derivatives fixed at ``x_0``, built forward.

    ``init_derivs`` holds ``(S'(x_0), S''(x_0))`` for a cubic and
    ``(S'(x_0), ..., S''''(x_0))`` for a quintic; its length fixes the degree.

    The march amplifies rounding by roughly 3.7 per interval (cubic) and 23
    per interval (quintic), so it is only suitable for short grids.
    """
    y = _as_values(grid, y)
    init = np.asarray(init_derivs, dtype=float)
    if init.shape not in ((2,), (4,)):
        raise DimensionError(
            f"need 2 (cubic) or 4 (quintic) initial derivatives, got {init.shape}"
        )
    degree = init.size + 1
    coeffs = _march(grid.spacings, y[:, None], init[:, None], degree)
    return PiecewisePolynomial(grid, coeffs[:, :, 0])


def _end_derivatives(coeffs: np.ndarray, h_last: float, orders: Sequence[int]) -> np.ndarray:
    """Derivatives at x_n of the last piece for stacked coefficients (n, q+1, K)."""
    q = coeffs.shape[1] - 1
    last = coeffs[-1]
    rows = []
    for r in orders:
        j = np.arange(r, q + 1)
        w = np.array([math.perm(int(k), r) for k in j]) * h_last ** (j - r)
        rows.append(w @ last[r:])
    return np.array(rows)


def _hermite_quintic_maps(grid: KnotGrid):
    """Linear maps of the clamped quintic via a global Hermite solve.

    Unknowns are S' and S'' at the interior knots; the equations are
    continuity of S''' and S'''' there. Returns (value_map, end_map) of
    shapes (n, 6, n+1) and (n, 6, 4).
    """
    h = grid.spacings
    n = grid.n
    # global data vector: y_0..y_n, m_0..m_n, k_0..k_n
    size = 3 * (n + 1)

    def col(kind, j):
        return kind * (n + 1) + j

    # local map: (y_i, m_i, k_i, y_{i+1}, m_{i+1}, k_{i+1}) -> c_0..c_5
    local = np.zeros((n, 6, 6))
    for i, hi in enumerate(h):
        M = np.array(
            [
                [hi**3, hi**4, hi**5],
                [3 * hi**2, 4 * hi**3, 5 * hi**4],
                [6 * hi, 12 * hi**2, 20 * hi**3],
            ]
        )
        # r = R @ d with d the six local data
        R = np.array(
            [
                [-1, -hi, -hi**2 / 2, 1, 0, 0],
                [0, -1, -hi, 0, 1, 0],
                [0, 0, -1, 0, 0, 1],
            ]
        )
        L = local[i]
        L[0, 0] = 1.0
        L[1, 1] = 1.0
        L[2, 2] = 0.5
        L[3:] = np.linalg.solve(M, R)

    def gather(i):
        # (6, size) selector of local data for interval i
        P = np.zeros((6, size))
        for r, (kind, j) in enumerate(
            [(0, i), (1, i), (2, i), (0, i + 1), (1, i + 1), (2, i + 1)]
        ):
            P[r, col(kind, j)] = 1.0
        return P

    coef_of_global = np.stack([local[i] @ gather(i) for i in range(n)])  # (n, 6, size)

    if n == 1:
        known_cols = list(range(size))
        unknown_cols = []
        solve = np.zeros((0, size))
    else:
        unknown_cols = [col(1, j) for j in range(1, n)] + [col(2, j) for j in range(1, n)]
        known_cols = [c for c in range(size) if c not in unknown_cols]
        eqs = []
        for j in range(1, n):
            left = coef_of_global[j - 1]  # piece ending at x_j
            right = coef_of_global[j]
            hl = h[j - 1]
            scale = 0.5 * (h[j - 1] + h[j])
            third = (6 * left[3] + 24 * hl * left[4] + 60 * hl**2 * left[5]) - 6 * right[3]
            fourth = (24 * left[4] + 120 * hl * left[5]) - 24 * right[4]
            eqs.append(third * scale**3)
            eqs.append(fourth * scale**4)
        C = np.array(eqs)
        Cu = C[:, unknown_cols]
        Ck = C[:, known_cols]
        if np.linalg.cond(Cu) > 1e14:
            raise DegenerateGeometryError(
                f"quintic continuity system is singular for spacings {h}"
            )
        solve = -np.linalg.solve(Cu, Ck)  # unknowns in terms of knowns

    # expand: global = E @ knowns
    E = np.zeros((size, len(known_cols)))
    for r, c in enumerate(known_cols):
        E[c, r] = 1.0
    for r, c in enumerate(unknown_cols):
        E[c] = solve[r]
    full = coef_of_global @ E  # (n, 6, len(known))
    pos = {c: r for r, c in enumerate(known_cols)}
    value_map = full[:, :, [pos[col(0, j)] for j in range(n + 1)]]
    end_map = full[:, :, [pos[col(1, 0)], pos[col(2, 0)], pos[col(1, n)], pos[col(2, n)]]]
    return value_map, end_map


class ClampedSpace:
    """Clamped splines of one degree on one grid, as linear maps.

    ``coeffs = value_map @ y + end_map @ ends`` where ``ends`` is
    ``(S'(a), S'(b))`` for cubics and ``(S'(a), S''(a), S'(b), S''(b))`` for
    quintics. Neither map depends on the knot values, so they are computed
    once and reused for every spline on the grid.

    ``method`` is ``"hermite"`` (default: global solve for the interior
    derivatives) or ``"recursive"`` (forward march plus end matching). The
    march needs no solve but amplifies rounding geometrically, so it is
    only accurate on a handful of intervals.
    """

    def __init__(self, grid: KnotGrid, degree: int, method: str | None = None):
        _check_degree(degree)
        if method is None:
            method = "hermite"
        if method not in ("recursive", "hermite"):
            raise ValueError(f"unknown clamped construction {method!r}")
        self.grid = grid
        self.degree = degree
        self.method = method
        if method == "hermite":
            if degree == 3:
                self.value_map, self.end_map = _hermite_cubic_maps(grid)
            else:
                self.value_map, self.end_map = _hermite_quintic_maps(grid)
        else:
            self.value_map, self.end_map = _recursive_clamped_maps(grid, degree)
        self.value_map.setflags(write=False)
        self.end_map.setflags(write=False)

    @property
    def n_ends(self) -> int:
        return self.degree - 1

    def coeffs(self, y, ends) -> np.ndarray:
        y = _as_values(self.grid, y)
        ends = np.asarray(ends, dtype=float)
        if ends.shape != (self.n_ends,):
            raise DimensionError(f"expected {self.n_ends} end derivatives, got {ends.shape}")
        return self.value_map @ y + self.end_map @ ends

    def build(self, y, ends) -> PiecewisePolynomial:
        return PiecewisePolynomial(self.grid, self.coeffs(y, ends))

    def end_response(self, k: int) -> PiecewisePolynomial:
        """Clamped spline of zero data with unit k-th end derivative."""
        return PiecewisePolynomial(self.grid, self.end_map[:, :, k])

    def basis(self, y) -> SplineBasisSet:
        w0 = self.value_map @ _as_values(self.grid, y)
        members = [PiecewisePolynomial(self.grid, w0)]
        members += [
            PiecewisePolynomial(self.grid, w0 + self.end_map[:, :, k])
            for k in range(self.n_ends)
        ]
        return SplineBasisSet(self.degree, tuple(members))


def _recursive_clamped_maps(grid: KnotGrid, degree: int):
    n = grid.n
    h = grid.spacings
    q = degree
    n_init = q - 1
    # stacked sources: y_0..y_n then the q-1 initial derivatives
    K = n + 1 + n_init
    Y = np.zeros((n + 1, K))
    Y[:, : n + 1] = np.eye(n + 1)
    D = np.zeros((n_init, K))
    D[:, n + 1 :] = np.eye(n_init)
    C = _march(h, Y, D, q)  # (n, q+1, K)

    if q == 3:
        # free initial datum S''(x_0) matched to S'(x_n)
        end = _end_derivatives(C, h[-1], [1])[0]  # (K,)
        slope = end[n + 2]
        if abs(slope) < 1e-300 or not np.isfinite(slope):
            raise DegenerateGeometryError(f"clamped end matching degenerate for spacings {h}")
        free = C[:, :, n + 2]
        M = C - free[:, :, None] * (end / slope)[None, None, :]
        value_map = M[:, :, : n + 1]
        end_map = np.stack([M[:, :, n + 1], free / slope], axis=-1)
        return value_map, end_map

    end = _end_derivatives(C, h[-1], [1, 2])  # (2, K)
    J = end[:, n + 3 : n + 5]  # response of end data to S''', S''''
    if np.linalg.cond(J) > 1e14:
        raise DegenerateGeometryError(f"quintic end matching singular for spacings {h}")
    # sources without the free data; free data then set to hit target ends
    base = C[:, :, : n + 3]
    free = C[:, :, n + 3 : n + 5]  # (n, 6, 2)
    Jinv = np.linalg.inv(J)
    # t = Jinv @ (target - end_base)
    correction = -(Jinv @ end[:, : n + 3])  # (2, n+3)
    M = base + np.einsum("ijf,fk->ijk", free, correction)
    value_map = M[:, :, : n + 1]
    target = np.einsum("ijf,fk->ijk", free, Jinv)  # columns for S'(b), S''(b)
    end_map = np.stack(
        [M[:, :, n + 1], M[:, :, n + 2], target[:, :, 0], target[:, :, 1]], axis=-1
    )
    return value_map, end_map


def _hermite_cubic_maps(grid: KnotGrid):
    """Clamped cubic via the tridiagonal slope system (stable for long grids)."""
    h = grid.spacings
    n = grid.n
    size = 2 * (n + 1)  # y_0..y_n, m_0..m_n
    coef = np.zeros((n, 4, size))
    for i, hi in enumerate(h):
        yi, yj, mi, mj = i, i + 1, n + 1 + i, n + 2 + i
        coef[i, 0, yi] = 1.0
        coef[i, 1, mi] = 1.0
        coef[i, 2, yi] = -3 / hi**2
        coef[i, 2, yj] = 3 / hi**2
        coef[i, 2, mi] = -2 / hi
        coef[i, 2, mj] = -1 / hi
        coef[i, 3, yi] = 2 / hi**3
        coef[i, 3, yj] = -2 / hi**3
        coef[i, 3, mi] = 1 / hi**2
        coef[i, 3, mj] = 1 / hi**2
    unknown = [n + 1 + j for j in range(1, n)]
    known = [c for c in range(size) if c not in unknown]
    E = np.zeros((size, len(known)))
    for r, c in enumerate(known):
        E[c, r] = 1.0
    if n > 1:
        eqs = []
        for j in range(1, n):
            left, right = coef[j - 1], coef[j]
            hl = h[j - 1]
            eqs.append(2 * left[2] + 6 * hl * left[3] - 2 * right[2])
        Cm = np.array(eqs)
        sol = -np.linalg.solve(Cm[:, unknown], Cm[:, known])
        for r, c in enumerate(unknown):
            E[c] = sol[r]
    full = coef @ E
    pos = {c: r for r, c in enumerate(known)}
    value_map = full[:, :, [pos[j] for j in range(n + 1)]]
    end_map = full[:, :, [pos[n + 1], pos[2 * n + 1]]]
    return value_map, end_map


def build_clamped(grid: KnotGrid, y, end_derivs, method: str | None = None) -> PiecewisePolynomial:
    """Clamped interpolating spline.

    ``end_derivs`` is ``(v_0, v_n)`` for a cubic or ``(v_0, w_0, v_n, w_n)``
    for a quintic.

    ``method="recursive"`` builds a cubic as the two-spline blend

        W(v_0, v_n) = alpha R(v_0, 0) + (1 - alpha) R(v_0, 1)

    with ``alpha`` chosen to hit the end slope, and a quintic by marching
    with free third and fourth derivatives at ``x_0`` fixed by a 2x2 end
    match. Both lose roughly a digit per interval; the default global
    solve does not.
    """
    y = _as_values(grid, y)
    ends = np.asarray(end_derivs, dtype=float)
    if ends.shape == (2,):
        degree = 3
    elif ends.shape == (4,):
        degree = 5
    else:
        raise DimensionError(f"need 2 or 4 end derivatives, got shape {ends.shape}")
    if degree == 3 and method == "recursive":
        v0, vn = ends
        r0 = build_recursive(grid, y, (v0, 0.0))
        r1 = build_recursive(grid, y, (v0, 1.0))
        s0 = r0.left_limit(grid.n - 1, 1)
        s1 = r1.left_limit(grid.n - 1, 1)
        denom = s0 - s1
        if abs(denom) <= 1e-14 * (abs(s0) + abs(s1) + 1.0):
            raise DegenerateGeometryError(
                f"end slopes of the blended splines coincide; spacings {grid.spacings}"
            )
        alpha = (vn - s1) / denom
        return PiecewisePolynomial(grid, alpha * r0.coeffs + (1 - alpha) * r1.coeffs)
    return ClampedSpace(grid, degree, method).build(y, ends)


def basic_clamped_set(grid: KnotGrid, y, degree: int, method: str | None = None) -> SplineBasisSet:
    """The basic clamped functions ``W_0..W_{q-1}`` for the data ``(x_i, y_i)``.

    ``W_0`` has all end derivatives zero; ``W_k`` has a single unit end
    derivative in slot ``k`` (ordered S'(a), S'(b) for cubics and
    S'(a), S''(a), S'(b), S''(b) for quintics).
    """
    _check_degree(degree)
    y = _as_values(grid, y)
    if degree == 3 and method == "recursive":
        members = [
            build_clamped(grid, y, e, method)
            for e in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
        ]
        return SplineBasisSet(3, tuple(members))
    return ClampedSpace(grid, degree, method).basis(y)


def combine_basis(basis: SplineBasisSet, alphas) -> PiecewisePolynomial:
    """``(1 - sum(alphas)) W_0 + sum_k alphas[k] W_{k+1}``."""
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != (basis.degree - 1,):
        raise DimensionError(
            f"a degree-{basis.degree} basis takes {basis.degree - 1} coefficients, "
            f"got shape {alphas.shape}"
        )
    coeffs = (1.0 - alphas.sum()) * basis[0].coeffs
    for k, alpha in enumerate(alphas, start=1):
        coeffs = coeffs + alpha * basis[k].coeffs
    return PiecewisePolynomial(basis.grid, coeffs)


def _real_roots_local(c: np.ndarray, h: float, tol: float) -> list:
    """Real roots in [0, h] of the polynomial with ascending coefficients c."""
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    scale = np.max(np.abs(c)) if c.size else 0.0
    if c.size <= 1 or scale == 0.0:
        return []
    # drop leading terms that are negligible on the interval
    powers = h ** np.arange(c.size)
    mags = np.abs(c) * powers
    while c.size > 1 and mags[-1] <= 1e-14 * mags.max():
        c = c[:-1]
        mags = mags[:-1]
    deg = c.size - 1
    if deg == 0:
        return []
    if deg == 1:
        cands = [-c[0] / c[1]]
    elif deg == 2:
        c0, c1, c2 = c
        disc = c1 * c1 - 4 * c2 * c0
        if disc < 0:
            # near-tangent double root
            if disc > -1e-12 * c1 * c1:
                disc = 0.0
            else:
                return []
        sq = math.sqrt(disc)
        # stable quadratic formula
        qq = -0.5 * (c1 + math.copysign(sq, c1)) if c1 != 0 else -0.5 * sq
        cands = []
        if qq != 0:
            cands.append(c0 / qq)
        cands.append(qq / c2)
    else:
        eig = np.roots(c[::-1])
        cands = [r.real for r in eig if abs(r.imag) <= 1e-7 * max(1.0, h)]
        # Newton polish on the real candidates
        dc = np.polynomial.polynomial.polyder(c)
        polished = []
        for r in cands:
            for _ in range(3):
                d = np.polynomial.polynomial.polyval(r, dc)
                if d == 0:
                    break
                r = r - np.polynomial.polynomial.polyval(r, c) / d
            polished.append(r)
        cands = polished
    return [r for r in cands if -tol <= r <= h + tol]


def derivative_roots(spline: PiecewisePolynomial, order: int) -> list:
    """Sorted interior zeros of ``S^(order)``.

    Roots closer than ``1e-8 (b - a)`` are merged; roots at ``a`` and ``b``
    are dropped. Pieces on which the derivative vanishes identically
    contribute nothing.
    """
    if order not in (1, 2) or order > spline.degree - 1:
        raise DerivativeOrderError(f"root search supports orders 1 and 2, got {order}")
    grid = spline.grid
    width = grid.b - grid.a
    merge = 1e-8 * width
    coeffs = spline.derivative_coeffs(order)
    roots = []
    for i, h in enumerate(grid.spacings):
        for t in _real_roots_local(coeffs[i], h, merge):
            roots.append(grid.knots[i] + min(max(t, 0.0), h))
    roots.sort()
    merged = []
    for r in roots:
        if r - grid.a <= merge or grid.b - r <= merge:
            continue
        if merged and r - merged[-1] <= merge:
            continue
        merged.append(float(r))
    return merged


def resample(spline: PiecewisePolynomial, new_grid: KnotGrid) -> np.ndarray:
    """Values of ``spline`` at the knots of ``new_grid``."""
    return evaluate(spline, new_grid.knots, 0)
