"""Limited-memory BFGS with a strong-Wolfe line search.

The variables are unconstrained, so no bound handling is included.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import SplineBVPError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizeOptions:
    memory: int = 10
    grad_tol: float = 1e-9
    loss_tol: float = 1e-14
    max_iter: int = 500
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 40

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    loss: float
    grad_norm: float
    step_length: float


@dataclass
class OptimizeTrace:
    records: list = field(default_factory=list)
    status: str = "running"
    evaluations: int = 0

    @property
    def iterations(self) -> int:
        return max(len(self.records) - 1, 0)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def append(self, *args):
        self.records.append(IterationRecord(*args))


def random_init(count: int, seed: int) -> np.ndarray:
    """Uniform draws on [-1, 1] from numpy's PCG64 seeded with ``seed``."""
    if count < 1:
        raise ValueError("count must be positive")
    return np.random.default_rng(seed).uniform(-1.0, 1.0, count)


class _Counted:
    """Objective wrapper: counts calls, maps solver failures to +inf."""

    def __init__(self, objective, trace):
        self.objective = objective
        self.trace = trace

    def __call__(self, x):
        self.trace.evaluations += 1
        try:
            f, g = self.objective(x)
        except (SplineBVPError, FloatingPointError, OverflowError) as exc:
            log.debug("objective failed at trial point: %s", exc)
            return np.inf, np.full_like(x, np.nan)
        f = float(f)
        g = np.asarray(g, dtype=float)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return np.inf, np.full_like(x, np.nan)
        return f, g


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating (a, fa, ga), (b, fb, gb), or None."""
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def _strong_wolfe(fun, x, f0, g0, d, step, opts):
    """Return (step, f, g) meeting the strong Wolfe conditions, or None."""
    dg0 = float(g0 @ d)
    prev_step, prev_f, prev_dg = 0.0, f0, dg0
    evals = 0

    def zoom(lo, flo, dglo, hi, fhi, dghi):
        nonlocal evals
        while evals < opts.max_line_search:
            t = _cubic_min(lo, flo, dglo, hi, fhi, dghi) if np.isfinite(fhi) else None
            left, right = min(lo, hi), max(lo, hi)
            width = right - left
            if t is None or not (left + 0.1 * width <= t <= right - 0.1 * width):
                t = 0.5 * (lo + hi)
            ft, gt = fun(x + t * d)
            evals += 1
            dgt = float(gt @ d) if np.isfinite(ft) else np.nan
            if not np.isfinite(ft) or ft > f0 + opts.c1 * t * dg0 or ft >= flo:
                hi, fhi, dghi = t, ft, dgt
            else:
                if abs(dgt) <= -opts.c2 * dg0:
                    return t, ft, gt
                if dgt * (hi - lo) >= 0:
                    hi, fhi, dghi = lo, flo, dglo
                lo, flo, dglo = t, ft, dgt
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
                break
        # fall back to the best sufficient-decrease point seen
        if lo > 0 and flo < f0:
            ft, gt = fun(x + lo * d)
            return lo, ft, gt
        return None

    for i in range(opts.max_line_search):
        f, g = fun(x + step * d)
        evals += 1
        dg = float(g @ d) if np.isfinite(f) else np.nan
        if not np.isfinite(f) or f > f0 + opts.c1 * step * dg0 or (i > 0 and f >= prev_f):
            return zoom(prev_step, prev_f, prev_dg, step, f, dg)
        if abs(dg) <= -opts.c2 * dg0:
            return step, f, g
        if dg >= 0:
            return zoom(step, f, dg, prev_step, prev_f, prev_dg)
        prev_step, prev_f, prev_dg = step, f, dg
        step *= 2.0
    return None


def minimize(objective, y0, opts: OptimizeOptions | None = None):
    """Minimize ``objective(y) -> (loss, gradient)`` from ``y0``.

    Stops when the infinity-norm of the gradient drops below
    ``grad_tol``, when the relative loss decrease of an iteration drops
    below ``loss_tol``, or after ``max_iter`` iterations. A failed line
    search ends the run with status ``"stalled"``. The best iterate seen
    is returned with the trace.
    """
    opts = opts or OptimizeOptions()
    trace = OptimizeTrace()
    fun = _Counted(objective, trace)
    x = np.array(y0, dtype=float)
    f, g = fun(x)
    if not np.isfinite(f):
        raise FloatingPointError("objective is not finite at the starting point")
    trace.append(0, f, float(np.max(np.abs(g))), 0.0)
    best_x, best_f = x.copy(), f
    S, Y = deque(maxlen=opts.memory), deque(maxlen=opts.memory)

    for it in range(1, opts.max_iter + 1):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= opts.grad_tol:
            trace.status = "converged_grad"
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, yv in reversed(list(zip(S, Y))):
            rho = 1.0 / float(yv @ s)
            a = rho * float(s @ q)
            q -= a * yv
            alphas.append((rho, a, s, yv))
        if S:
            gamma = float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1])
        else:
            gamma = 1.0 / max(float(np.linalg.norm(g)), 1e-300)
            gamma = min(gamma, 1.0)
        r = gamma * q
        for rho, a, s, yv in reversed(alphas):
            b = rho * float(yv @ r)
            r += (a - b) * s
        d = -r
        if float(g @ d) >= 0:
            # not a descent direction; restart from steepest descent
            S.clear()
            Y.clear()
            d = -g * min(1.0, 1.0 / max(float(np.linalg.norm(g)), 1e-300))

        found = _strong_wolfe(fun, x, f, g, d, 1.0, opts)
        if found is None:
            if S:
                # retry once with a fresh memory
                S.clear()
                Y.clear()
                d = -g * min(1.0, 1.0 / max(float(np.linalg.norm(g)), 1e-300))
                found = _strong_wolfe(fun, x, f, g, d, 1.0, opts)
            if found is None:
                trace.status = "stalled"
                break
        step, f_new, g_new = found
        s = step * d
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            S.append(s)
            Y.append(yv)
        f_old = f
        x, f, g = x + s, f_new, g_new
        trace.append(it, f, float(np.max(np.abs(g))), step)
        if f < best_f:
            best_x, best_f = x.copy(), f
        if f_old - f <= opts.loss_tol * abs(f_old):
            trace.status = "converged_loss"
            break
    else:
        trace.status = "max_iter"
    return best_x, trace

