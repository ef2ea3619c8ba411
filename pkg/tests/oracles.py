"""Independent reference implementations used by the tests."""

import numpy as np


def tridiagonal_clamped_cubic(x, y, v0, vn):
    """Clamped cubic spline by the classical second-derivative (moment) system.

    Returns a callable ``s(t, order)``. Built without the package: the
    moments M_i solve the symmetric tridiagonal system that enforces C2
    continuity plus the two end slopes.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.size - 1
    h = np.diff(x)
    A = np.zeros((n + 1, n + 1))
    r = np.zeros(n + 1)
    A[0, 0], A[0, 1] = 2 * h[0], h[0]
    r[0] = 6 * ((y[1] - y[0]) / h[0] - v0)
    for i in range(1, n):
        A[i, i - 1], A[i, i], A[i, i + 1] = h[i - 1], 2 * (h[i - 1] + h[i]), h[i]
        r[i] = 6 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1])
    A[n, n - 1], A[n, n] = h[n - 1], 2 * h[n - 1]
    r[n] = 6 * (vn - (y[n] - y[n - 1]) / h[n - 1])
    M = np.linalg.solve(A, r)

    def s(t, order=0):
        t = np.atleast_1d(np.asarray(t, float))
        i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, n - 1)
        hi = h[i]
        a = x[i + 1] - t
        b = t - x[i]
        Mi, Mj = M[i], M[i + 1]
        if order == 0:
            return (
                Mi * a**3 / (6 * hi)
                + Mj * b**3 / (6 * hi)
                + (y[i] / hi - Mi * hi / 6) * a
                + (y[i + 1] / hi - Mj * hi / 6) * b
            )
        if order == 1:
            return (
                -Mi * a**2 / (2 * hi)
                + Mj * b**2 / (2 * hi)
                + (y[i + 1] - y[i]) / hi
                - (Mj - Mi) * hi / 6
            )
        if order == 2:
            return (Mi * a + Mj * b) / hi
        raise ValueError(order)

    return s


def quintic_reference(x, y, ends):
    """Clamped quintic from scipy: ``ends = (v0, w0, vn, wn)``."""
    from scipy.interpolate import make_interp_spline

    v0, w0, vn, wn = ends
    return make_interp_spline(x, y, k=5, bc_type=([(1, v0), (2, w0)], [(1, vn), (2, wn)]))


def poly_derivs(c, x, order):
    """Derivative ``order`` of the polynomial with ascending coefficients ``c``."""
    p = np.polynomial.Polynomial(c)
    return p.deriv(order)(x) if order else p(x)
