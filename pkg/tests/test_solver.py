from types import SimpleNamespace

import numpy as np
import pytest

import splinebvp.solver as solver_mod
from splinebvp.bench import get_problem
from splinebvp.boundary import Dirichlet, FourthOrderSet, OdeProblem, bc_residuals
from splinebvp.errors import ConfigError, EvaluationError
from splinebvp.gradient import Collocation, coefficient_gradient_tape, collocation_points, free_mask, loss_and_gradient
from splinebvp.optimize import OptimizeOptions, random_init
from splinebvp.solver import (
    Escalate,
    Relocate,
    SolverConfig,
    _Stage,
    best_of_seeds,
    check_bc,
    relocation_knots,
    solve,
    strategy_escalate,
    strategy_relocate,
)
from splinebvp.spline import build_clamped, make_knots


def cubic_problem():
    p = np.polynomial.Polynomial([0.2, 1.0, -0.6, 0.15])
    d2p = p.deriv(2)
    prob = OdeProblem(lambda x, u, v, w: w - d2p(x), (0.0, 3.0), affine_top=True, name="cubic")
    return prob, Dirichlet(p(0.0), p(3.0)), p


@pytest.mark.parametrize("n", [2, 5, 9])
def test_manufactured_cubic_is_recovered(n):
    prob, bc, p = cubic_problem()
    sol = solve(prob, bc, SolverConfig(n=n, seed=1))
    assert sol.loss <= 1e-16
    x = np.linspace(0, 3, 101)
    assert np.max(np.abs(sol.spline(x) - p(x))) <= 1e-8


def test_bvp1_ten_knots():
    bp = get_problem("BVP1")
    sol = solve(bp.problem, bp.bc, SolverConfig(n=9, seed=0))
    assert sol.residual_l2 == pytest.approx(1.42e-2, rel=0.05)
    assert check_bc(bp.problem, bp.bc, sol) <= 1e-10


def test_solution_interpolates_y_star():
    bp = get_problem("BVP4")
    sol = solve(bp.problem, bp.bc, SolverConfig(n=6, seed=2))
    np.testing.assert_allclose(sol.spline(sol.knots_used.knots), sol.y_star, atol=1e-12)


def test_determinism():
    bp = get_problem("BVP1")
    cfg = SolverConfig(n=7, seed=4)
    a, b = solve(bp.problem, bp.bc, cfg), solve(bp.problem, bp.bc, cfg)
    np.testing.assert_array_equal(a.y_star, b.y_star)
    np.testing.assert_array_equal(a.spline.coeffs, b.spline.coeffs)
    np.testing.assert_array_equal(a.residual_profile, b.residual_profile)
    assert [t.records for t in a.loss_history] == [t.records for t in b.loss_history]


@pytest.mark.parametrize("name", ["BVP1", "BVP2", "BVP3", "BVP4", "BVP5"])
def test_bc_exact_after_solve(name):
    bp = get_problem(name)
    cfg = SolverConfig(degree=bp.degree, n=4, knot_mode=bp.knot_mode, seed=0)
    sol = solve(bp.problem, bp.bc, cfg)
    assert check_bc(bp.problem, bp.bc, sol) <= 1e-10


def beam():
    f = lambda x: np.sin(x) + np.sin(x) ** 3
    prob = OdeProblem(lambda x, u, v, w, p, q: q + u**3 - f(x), (0.0, np.pi), order=4, affine_top=True)
    return prob


def test_fourth_order_beam():
    prob = beam()
    bc = FourthOrderSet(
        g1=lambda x, u, v, w: w, g2=None, h1=lambda x, u, v, w: w, h2=None, pin_a=0.0, pin_b=0.0
    )
    sol = solve(prob, bc, SolverConfig(degree=5, n=5, seed=0))
    x = np.linspace(0, np.pi, 50)
    assert np.max(np.abs(sol.spline(x) - np.sin(x))) <= 1e-3
    assert np.max(np.abs(bc_residuals(prob, bc, sol.spline))) <= 1e-10
    assert sol.y_star[0] == 0.0 and sol.y_star[-1] == 0.0


def test_fourth_order_needs_quintic():
    bc = FourthOrderSet(lambda *a: 0, lambda *a: 0, lambda *a: 0, lambda *a: 0)
    with pytest.raises(ConfigError):
        solve(beam(), bc, SolverConfig(degree=3, n=4))


@pytest.mark.parametrize(
    "kw",
    [
        {"n": 1},
        {"degree": 4},
        {"norm": "L1"},
        {"n": 20, "collocation_count": 10},
        {"knot_mode": "random"},
        {"n": 6, "strategy": Escalate((5, 9))},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        SolverConfig(**kw)


def test_escalate_schedule_increasing():
    with pytest.raises(ConfigError):
        Escalate((9, 6))


def test_explicit_knots():
    bp = get_problem("BVP1")
    knots = np.linspace(0, 2 * np.pi, 6) ** 1.0
    cfg = SolverConfig(knot_mode=list(knots))
    assert cfg.n == 5
    sol = solve(bp.problem, bp.bc, cfg)
    np.testing.assert_array_equal(sol.knots_used.knots, knots)
    with pytest.raises(ConfigError):
        SolverConfig(knot_mode=[0.0, 1.0, 2.0]).grid(0.0, 5.0)


# --- seed redraws ---------------------------------------------------------------------------


def test_bad_start_is_redrawn(monkeypatch):
    bp = get_problem("BVP1")
    real = random_init

    def fake(count, seed):
        return np.full(count, 1e300) if seed == 3 else real(count, seed)

    monkeypatch.setattr(solver_mod, "random_init", fake)
    sol = solve(bp.problem, bp.bc, SolverConfig(n=4, seed=3))
    assert sol.seed == 4


def test_all_starts_bad(monkeypatch):
    bp = get_problem("BVP1")
    monkeypatch.setattr(solver_mod, "random_init", lambda count, seed: np.full(count, np.nan))
    with pytest.raises(EvaluationError, match="5 random starts"):
        solve(bp.problem, bp.bc, SolverConfig(n=4))


# --- escalation ------------------------------------------------------------------------------


def stage_loss(bp, grid, y_full, degree=3):
    mask = free_mask(grid, bp.bc)
    tape = coefficient_gradient_tape(grid, mask, degree)
    col = Collocation(grid, degree, collocation_points(grid.a, grid.b))
    return loss_and_gradient(bp.problem, bp.bc, grid, y_full[mask], col, degree, tape)


def test_escalation_beats_random_start():
    bp = get_problem("BVP1")
    warm, cold = [], []
    for seed in range(5):
        coarse = solve(bp.problem, bp.bc, SolverConfig(n=4, seed=seed))
        grid, y = strategy_escalate(coarse, 9, bp.bc)
        warm.append(stage_loss(bp, grid, y).value)
        y_rand = np.zeros(10)
        y_rand[1:-1] = random_init(8, seed)
        cold.append(stage_loss(bp, grid, y_rand).value)
    assert np.median(warm) < np.median(cold)


def test_escalation_keeps_exact_cubic():
    prob, bc, p = cubic_problem()
    sol = solve(prob, bc, SolverConfig(n=3, seed=0, strategy=Escalate((6, 9), 20)))
    assert sol.knots_used.n == 9
    assert sol.loss <= 1e-16
    assert len(sol.loss_history) == 3


def test_escalation_resamples_and_repins():
    bp = get_problem("BVP1")
    coarse = solve(bp.problem, bp.bc, SolverConfig(n=4, seed=0))
    grid, y = strategy_escalate(coarse, 9, bp.bc)
    np.testing.assert_allclose(y[1:-1], coarse.spline(grid.knots[1:-1]), atol=0)
    assert y[0] == bp.bc.ua and y[-1] == bp.bc.ub
    with pytest.raises(ConfigError):
        strategy_escalate(coarse, 3)


@pytest.mark.parametrize("strategy", ["escalate", "relocate"])
def test_strategy_conservation(strategy):
    bp = get_problem("BVP1")
    state = solve(bp.problem, bp.bc, SolverConfig(n=6, seed=1, optimizer=OptimizeOptions(max_iter=5)))
    if strategy == "escalate":
        grid, y = strategy_escalate(state, 9, bp.bc)
    else:
        grid, y = strategy_relocate(state, 0.02, bp.bc)
    rep = stage_loss(bp, grid, y)
    np.testing.assert_allclose(rep.spline(grid.knots), state.spline(grid.knots), atol=1e-12)


# --- relocation ---------------------------------------------------------------------------------


def fake_state(spline):
    return SimpleNamespace(spline=spline, knots_used=spline.grid)


def test_relocation_finds_sin_features():
    g = make_knots(0, 6 * np.pi, 30)
    s = build_clamped(g, np.sin(g.knots), (1.0, 1.0))
    knots = relocation_knots(s, 0.02, 4)
    interior = knots[1:-1]
    targets = np.pi / 2 * np.arange(1, 12)
    assert interior.size == 11
    assert np.max(np.min(np.abs(interior[:, None] - targets[None, :]), axis=1)) < 0.05


def test_relocation_of_convex_monotone_pads_uniformly():
    g = make_knots(0, 1, 6)
    s = build_clamped(g, np.exp(g.knots), (1.0, np.e))
    grid, y = strategy_relocate(fake_state(s), 0.02)
    assert grid.a == 0.0 and grid.b == 1.0
    assert np.all(np.diff(grid.knots) > 0)
    assert grid.n - 1 >= 4
    # padding splits the largest gaps, so spacings stay within a factor 2
    assert grid.spacings.max() <= 2 * grid.spacings.min() + 1e-12
    np.testing.assert_allclose(y, s(grid.knots))


def test_relocation_respects_min_gap():
    g = make_knots(0, 1, 8)
    y = np.array([0, 1, 0, 1, 0, 1, 0, 1, 0.0])
    s = build_clamped(g, y, (0.0, 0.0))
    knots = relocation_knots(s, 0.1, 4)
    assert np.min(np.diff(knots)) >= 0.05 - 1e-12  # halves of padded gaps are allowed
    kept = knots[1:-1]
    assert kept.size >= 4


def test_relocate_strategy_on_long_domain():
    bp = get_problem("BVP1_6PI")
    sol = solve(bp.problem, bp.bc, SolverConfig(n=8, seed=0, strategy=Relocate()))
    interior = sol.knots_used.knots[1:-1]
    targets = np.pi / 2 * np.arange(1, 12)
    dist = np.min(np.abs(interior[:, None] - targets[None, :]), axis=1)
    assert dist.max() <= 0.3
    assert check_bc(bp.problem, bp.bc, sol) <= 1e-10


def test_strategies_do_not_hurt():
    bp = get_problem("BVP1")
    plain, esc, rel = [], [], []
    for seed in range(5):
        plain.append(solve(bp.problem, bp.bc, SolverConfig(n=9, seed=seed)).loss)
        esc.append(solve(bp.problem, bp.bc, SolverConfig(n=4, seed=seed, strategy=Escalate((9,), 30))).loss)
        rel.append(solve(bp.problem, bp.bc, SolverConfig(n=9, seed=seed, strategy=Relocate())).loss)
    assert np.median(esc) <= 1.5 * np.median(plain)
    assert np.median(rel) <= 1.5 * np.median(plain)


def test_best_of_seeds_picks_lowest():
    bp = get_problem("BVP5")
    cfg = SolverConfig(degree=5, n=4)
    best = best_of_seeds(bp.problem, bp.bc, cfg, range(3))
    for s in range(3):
        assert best.loss <= solve(bp.problem, bp.bc, SolverConfig(degree=5, n=4, seed=s)).loss


def test_stage_keeps_warm_start():
    bp = get_problem("BVP1")
    stage = _Stage(bp.problem, bp.bc, make_knots(*bp.domain, 5), SolverConfig(n=5))
    assert stage.alpha_guess is None
    stage(np.zeros(4))
    assert stage.alpha_guess is not None
