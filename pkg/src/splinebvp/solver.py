"""Full solves: knot generation, initialization, loss minimization and
the two knot-adaptation strategies (escalation and relocation)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .boundary import AlphaSet, Dirichlet, FourthOrderSet, OdeProblem, bc_residuals, pinned_ends
from .errors import ConfigError, EvaluationError, SplineBVPError
from .gradient import (
    Collocation,
    LossReport,
    coefficient_gradient_tape,
    collocation_points,
    free_mask,
    loss_and_gradient,
)
from .optimize import OptimizeOptions, OptimizeTrace, minimize, random_init
from .spline import KnotGrid, PiecewisePolynomial, derivative_roots, make_knots, resample

log = logging.getLogger(__name__)

MAX_SEED_REDRAWS = 5


@dataclass(frozen=True)
class Escalate:
    """Solve on a coarse grid, then resample onto each finer grid in turn."""

    schedule: tuple
    iters_per_stage: int = 50

    def __post_init__(self):
        sched = tuple(int(s) for s in self.schedule)
        if not sched:
            raise ConfigError("escalation schedule is empty")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigError(f"escalation schedule must be strictly increasing, got {sched}")
        if self.iters_per_stage < 1:
            raise ConfigError("iters_per_stage must be positive")
        object.__setattr__(self, "schedule", sched)


@dataclass(frozen=True)
class Relocate:
    """Move knots to the extrema and inflection points of the iterate.

    ``warmup`` iterations run before the first relocation; further
    relocations follow every ``period`` iterations, ``rounds`` in total.
    """

    period: int = 15
    min_gap: float = 0.02
    warmup: int = 15
    rounds: int = 3

    def __post_init__(self):
        if self.period < 1 or self.warmup < 1 or self.rounds < 1:
            raise ConfigError("relocation period, warmup and rounds must be positive")
        if not 0 < self.min_gap < 0.5:
            raise ConfigError(f"min_gap must lie in (0, 0.5), got {self.min_gap}")


@dataclass(frozen=True)
class SolverConfig:
    degree: int = 3
    knot_mode: Union[str, Sequence[float]] = "uniform"
    n: int = 9
    collocation_count: int = 100
    norm: str = "L2"
    seed: int = 0
    strategy: Union[None, Escalate, Relocate] = None
    optimizer: OptimizeOptions = field(default_factory=OptimizeOptions)

    def __post_init__(self):
        if self.degree not in (3, 5):
            raise ConfigError(f"degree must be 3 or 5, got {self.degree}")
        if self.norm not in ("L2", "Linf"):
            raise ConfigError(f"norm must be 'L2' or 'Linf', got {self.norm!r}")
        if not isinstance(self.knot_mode, str):
            knots = tuple(float(k) for k in self.knot_mode)
            object.__setattr__(self, "knot_mode", knots)
            object.__setattr__(self, "n", len(knots) - 1)
        elif self.knot_mode not in ("uniform", "chebyshev"):
            raise ConfigError(f"unknown knot mode {self.knot_mode!r}")
        if self.n < 2:
            raise ConfigError(f"need at least 2 intervals, got {self.n}")
        if self.collocation_count < self.n + 1:
            raise ConfigError("need at least n + 1 collocation points")
        if isinstance(self.strategy, Escalate) and self.strategy.schedule[0] <= self.n:
            raise ConfigError("escalation schedule must start above n")

    def grid(self, a: float, b: float) -> KnotGrid:
        if isinstance(self.knot_mode, str):
            return make_knots(a, b, self.n, self.knot_mode)
        grid = KnotGrid(self.knot_mode)
        if not (np.isclose(grid.a, a) and np.isclose(grid.b, b)):
            raise ConfigError(f"explicit knots span [{grid.a}, {grid.b}], domain is [{a}, {b}]")
        return grid


@dataclass(frozen=True, eq=False)
class SpinsSolution:
    spline: PiecewisePolynomial
    y_star: np.ndarray
    alpha: AlphaSet
    loss_history: tuple
    residual_profile: np.ndarray
    knots_used: KnotGrid
    collocation: np.ndarray
    seed: int
    status: str

    @property
    def loss(self) -> float:
        return float(self.loss_history[-1].records[-1].loss)

    @property
    def iterations(self) -> int:
        return sum(t.iterations for t in self.loss_history)

    @property
    def residual_l2(self) -> float:
        return float(np.sqrt(np.mean(self.residual_profile**2)))


class _Stage:
    """Objective for one grid: loss and gradient over the free knot values,
    with the last end-derivative solution kept as a warm start."""

    def __init__(self, problem, bc, grid, config):
        self.problem = problem
        self.bc = bc
        self.grid = grid
        self.config = config
        self.free = free_mask(grid, bc)
        self.tape = coefficient_gradient_tape(grid, self.free, config.degree)
        pts = collocation_points(grid.a, grid.b, config.collocation_count)
        self.colloc = Collocation(grid, config.degree, pts)
        self.alpha_guess = None
        self.evaluations = 0

    def report(self, y_free) -> LossReport:
        self.evaluations += 1
        rep = loss_and_gradient(
            self.problem,
            self.bc,
            self.grid,
            y_free,
            self.colloc,
            self.config.degree,
            self.tape,
            norm=self.config.norm,
            alpha_guess=self.alpha_guess,
        )
        self.alpha_guess = rep.alpha.values
        return rep

    def __call__(self, y_free):
        rep = self.report(y_free)
        return rep.value, rep.gradient

    def free_values(self, y_full):
        return np.asarray(y_full, dtype=float)[self.free]

    def run(self, y_free, max_iter=None):
        opts = self.config.optimizer
        if max_iter is not None:
            opts = replace(opts, max_iter=max_iter)
        try:
            return minimize(self, y_free, opts)
        except SplineBVPError as exc:
            _annotate(exc, f"evaluation {self.evaluations}")
            raise


def _annotate(exc, where):
    exc.iteration = where
    if exc.args and isinstance(exc.args[0], str):
        exc.args = (f"{exc.args[0]} (at {where})",) + exc.args[1:]


def _check(problem: OdeProblem, bc, degree: int):
    if problem.order == 4 and degree != 5:
        raise ConfigError("fourth-order problems need quintic splines")
    if problem.order == 4 and not isinstance(bc, FourthOrderSet):
        raise ConfigError("fourth-order problems need a FourthOrderSet of boundary conditions")
    if problem.order == 2 and isinstance(bc, FourthOrderSet):
        raise ConfigError("FourthOrderSet applies to fourth-order problems only")


def _initial_point(stage: _Stage, seed: int):
    """Random start; re-draws when the loss there is not finite."""
    last = None
    for k in range(MAX_SEED_REDRAWS):
        y0 = random_init(int(stage.free.sum()), seed + k)
        try:
            value, grad = stage(y0)
        except SplineBVPError as exc:
            last = exc
            stage.alpha_guess = None
            continue
        if np.isfinite(value) and np.all(np.isfinite(grad)):
            if k:
                log.info("seed %d gave a non-finite start; using seed %d", seed, seed + k)
            return y0, seed + k
        stage.alpha_guess = None
    raise EvaluationError(
        f"loss not finite at {MAX_SEED_REDRAWS} random starts (seeds {seed}..{seed + MAX_SEED_REDRAWS - 1})"
        + (f"; last error: {last}" if last else "")
    )


def strategy_escalate(state: SpinsSolution, next_n: int, bc=None):
    """Uniform grid with ``next_n`` intervals and the current spline's values
    at its knots. Pinned end values are restored exactly."""
    grid = state.knots_used
    if next_n <= grid.n:
        raise ConfigError(f"next_n={next_n} must exceed the current {grid.n} intervals")
    new_grid = make_knots(grid.a, grid.b, next_n, "uniform")
    y = resample(state.spline, new_grid)
    return new_grid, _repin(y, bc)


def _repin(y, bc):
    if bc is not None:
        pa, pb = pinned_ends(bc)
        if pa is not None:
            y[0] = pa
        if pb is not None:
            y[-1] = pb
    return y


def relocation_knots(spline: PiecewisePolynomial, min_gap: float = 0.02, min_interior: int = 4) -> np.ndarray:
    """Endpoints plus the zeros of S' and S'', thinned to a minimum gap.

    Candidates are kept greedily left to right when they sit at least
    ``min_gap (b - a)`` from the last kept knot and from ``b``. With fewer
    than ``min_interior`` interior knots, the largest gaps are split at
    their midpoints until there are enough.
    """
    a, b = spline.grid.a, spline.grid.b
    gap = min_gap * (b - a)
    roots = set(derivative_roots(spline, 1)) | set(derivative_roots(spline, 2))
    kept = [a]
    for r in sorted(roots):
        if r - kept[-1] >= gap and b - r >= gap:
            kept.append(r)
    knots = kept + [b]
    while len(knots) - 2 < min_interior:
        widths = np.diff(knots)
        i = int(np.argmax(widths))
        knots.insert(i + 1, knots[i] + 0.5 * widths[i])
    return np.array(knots)


def strategy_relocate(state: SpinsSolution, min_gap: float = 0.02, bc=None, min_interior=None):
    """Grid at the current iterate's extrema and inflection points.

    ``min_interior`` defaults to the current interior knot count, so a
    relocation never coarsens the grid.
    """
    if min_interior is None:
        min_interior = state.knots_used.n - 1
    new_grid = KnotGrid(relocation_knots(state.spline, min_gap, max(4, min_interior)))
    y = resample(state.spline, new_grid)
    return new_grid, _repin(y, bc)


def _finish(stage: _Stage, y_free, traces, seed, status) -> SpinsSolution:
    rep = stage.report(y_free)
    y_full = np.empty(stage.grid.n + 1)
    y_full[stage.free] = y_free
    pa, pb = pinned_ends(stage.bc)
    if pa is not None:
        y_full[0] = pa
    if pb is not None:
        y_full[-1] = pb
    return SpinsSolution(
        spline=rep.spline,
        y_star=y_full,
        alpha=rep.alpha,
        loss_history=tuple(traces),
        residual_profile=rep.residuals,
        knots_used=stage.grid,
        collocation=rep.points,
        seed=seed,
        status=status,
    )


def solve(problem: OdeProblem, bc, config: Optional[SolverConfig] = None) -> SpinsSolution:
    """Find knot values minimizing the collocation loss.

    Dirichlet (and pinned fourth-order) end values are fixed, so only the
    interior values are optimized. The end derivatives are re-solved at every
    evaluation, so each iterate satisfies the boundary conditions.
    """
    config = config or SolverConfig()
    _check(problem, bc, config.degree)
    grid = config.grid(problem.a, problem.b)
    stage = _Stage(problem, bc, grid, config)
    y0, seed = _initial_point(stage, config.seed)
    strategy = config.strategy
    traces = []

    if strategy is None:
        y, trace = stage.run(y0)
        traces.append(trace)
        return _finish(stage, y, traces, seed, trace.status)

    if isinstance(strategy, Escalate):
        y, trace = stage.run(y0, strategy.iters_per_stage)
        traces.append(trace)
        for k, next_n in enumerate(strategy.schedule):
            state = _finish(stage, y, traces, seed, trace.status)
            new_grid, y_full = strategy_escalate(state, next_n, bc)
            stage = _Stage(problem, bc, new_grid, config)
            stage.alpha_guess = state.alpha.values
            last = k == len(strategy.schedule) - 1
            y, trace = stage.run(stage.free_values(y_full), None if last else strategy.iters_per_stage)
            traces.append(trace)
        return _finish(stage, y, traces, seed, trace.status)

    if isinstance(strategy, Relocate):
        y, trace = stage.run(y0, strategy.warmup)
        traces.append(trace)
        for k in range(strategy.rounds):
            state = _finish(stage, y, traces, seed, trace.status)
            new_grid, y_full = strategy_relocate(state, strategy.min_gap, bc, grid.n - 1)
            log.info("relocated to %d knots", len(new_grid))
            stage = _Stage(problem, bc, new_grid, config)
            stage.alpha_guess = state.alpha.values
            last = k == strategy.rounds - 1
            y, trace = stage.run(stage.free_values(y_full), None if last else strategy.period)
            traces.append(trace)
        return _finish(stage, y, traces, seed, trace.status)

    raise ConfigError(f"unknown strategy {strategy!r}")


def best_of_seeds(problem, bc, config: SolverConfig, seeds) -> SpinsSolution:
    """Lowest final loss over several seeds; ties go to the earlier seed."""
    best = None
    for s in seeds:
        sol = solve(problem, bc, replace(config, seed=int(s)))
        if best is None or sol.loss < best.loss:
            best = sol
    return best


def check_bc(problem, bc, solution: SpinsSolution) -> float:
    """Largest absolute boundary-condition residual of a solution."""
    return float(np.max(np.abs(bc_residuals(problem, bc, solution.spline))))
