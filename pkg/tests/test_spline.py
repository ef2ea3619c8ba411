import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splinebvp.errors import (
    DerivativeOrderError,
    DimensionError,
    InvalidDomainError,
    OutOfDomainError,
)
from splinebvp.spline import (
    ClampedSpace,
    KnotGrid,
    PiecewisePolynomial,
    basic_clamped_set,
    build_clamped,
    build_recursive,
    combine_basis,
    derivative_roots,
    evaluate,
    make_knots,
    resample,
)

from oracles import poly_derivs, quintic_reference, tridiagonal_clamped_cubic


def random_grid(rng, n, a=0.0, b=None):
    h = rng.uniform(0.3, 1.5, n)
    knots = a + np.concatenate([[0], np.cumsum(h)])
    if b is not None:
        knots = a + (knots - a) * (b - a) / (knots[-1] - a)
    return KnotGrid(knots)


def jump(spline, order):
    """Largest mismatch of S^(order) across interior knots."""
    n = spline.grid.n
    return max(
        (abs(spline.left_limit(i, order) - spline.right_limit(i + 1, order)) for i in range(n - 1)),
        default=0.0,
    )


# --- grids -----------------------------------------------------------------


def test_uniform_knots():
    g = make_knots(0, 2 * np.pi, 4)
    np.testing.assert_allclose(g.knots, [0, np.pi / 2, np.pi, 3 * np.pi / 2, 2 * np.pi])
    assert g.n == 4


def test_chebyshev_lobatto_three_points():
    g = make_knots(-1, 1, 2, "chebyshev")
    np.testing.assert_allclose(g.knots, [-1, 0, 1], atol=1e-15)


def test_chebyshev_endpoints_exact():
    g = make_knots(0.0, 2.0, 9, "chebyshev")
    assert g.knots[0] == 0.0 and g.knots[-1] == 2.0
    assert np.all(np.diff(g.knots) > 0)
    # denser near the ends
    assert g.spacings[0] < g.spacings[4]


@pytest.mark.parametrize("a,b,n", [(0, 1, 0), (1, 1, 3), (2, 1, 3)])
def test_bad_domains(a, b, n):
    with pytest.raises(InvalidDomainError):
        make_knots(a, b, n)


def test_grid_rejects_unsorted():
    with pytest.raises(InvalidDomainError):
        KnotGrid([0.0, 2.0, 1.0])


def test_spacings_match_differences():
    g = KnotGrid([0.0, 0.1, 0.35, 1.0])
    np.testing.assert_array_equal(g.spacings, np.diff(g.knots))


# --- forward recursion -----------------------------------------------------


def test_recursive_single_cubic_piece_is_x_cubed():
    s = build_recursive(KnotGrid([0.0, 1.0]), [0.0, 1.0], (0.0, 0.0))
    np.testing.assert_allclose(s.coeffs, [[0, 0, 0, 1]], atol=1e-15)


def test_recursive_linear_data():
    s = build_recursive(KnotGrid([0.0, 1.0, 2.0]), [0.0, 1.0, 2.0], (1.0, 0.0))
    x = np.linspace(0, 2, 21)
    np.testing.assert_allclose(s(x), x, atol=1e-14)


def test_recursive_quintic_reproduces_polynomial():
    rng = np.random.default_rng(3)
    c = rng.normal(size=6)
    g = random_grid(rng, 4)
    y = poly_derivs(c, g.knots, 0)
    init = [poly_derivs(c, g.a, r) for r in range(1, 5)]
    s = build_recursive(g, y, init)
    for i in range(g.n):
        # shift p to the local variable and compare coefficient rows
        shifted = np.array(
            [poly_derivs(c, g.knots[i], k) / math.factorial(k) for k in range(6)]
        )
        np.testing.assert_allclose(s.coeffs[i], shifted, atol=1e-10 * (1 + np.abs(shifted).max()))


def test_recursive_rejects_bad_init():
    with pytest.raises(DimensionError):
        build_recursive(KnotGrid([0.0, 1.0]), [0.0, 1.0], (0.0, 0.0, 0.0))


@pytest.mark.parametrize("init", [(0.3, -1.0), (0.2, 0.1, -0.5, 2.0)])
def test_recursive_is_smooth_and_interpolates(init):
    rng = np.random.default_rng(1)
    g = random_grid(rng, 4)
    y = rng.normal(size=5)
    s = build_recursive(g, y, init)
    np.testing.assert_allclose(s(g.knots), y, atol=1e-10)
    for k in range(s.degree):
        assert jump(s, k) <= 1e-9 * (1 + np.abs(s.coeffs).max())
    for r, v in enumerate(init, start=1):
        assert s(g.a, r) == pytest.approx(v, abs=1e-13)


# --- clamped construction ----------------------------------------------------


def test_clamped_line():
    s = build_clamped(KnotGrid([0.0, 1.0, 2.0]), [0.0, 1.0, 2.0], (1.0, 1.0))
    x = np.linspace(0, 2, 11)
    np.testing.assert_allclose(s(x), x, atol=1e-14)


@pytest.mark.parametrize("method", ["hermite", "recursive"])
def test_clamped_matches_tridiagonal_on_four_knots(method):
    rng = np.random.default_rng(11)
    g = KnotGrid([0.0, 1.0, 2.0, 3.0])
    y = rng.normal(size=4)
    s = build_clamped(g, y, (0.4, -1.1), method)
    ref = tridiagonal_clamped_cubic(g.knots, y, 0.4, -1.1)
    x = np.linspace(0, 3, 50)
    assert np.max(np.abs(s(x) - ref(x))) < 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_clamped_cubic_tridiagonal_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 13))
    g = random_grid(rng, n, a=rng.uniform(-2, 2))
    y = rng.normal(size=n + 1)
    v0, vn = rng.normal(size=2)
    s = build_clamped(g, y, (v0, vn))
    ref = tridiagonal_clamped_cubic(g.knots, y, v0, vn)
    x = np.linspace(g.a, g.b, 200)
    for order in range(3):
        assert np.max(np.abs(s(x, order) - ref(x, order))) <= 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_clamped_quintic_matches_scipy(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 15))
    g = random_grid(rng, n)
    y = rng.normal(size=n + 1)
    ends = rng.normal(size=4)
    s = build_clamped(g, y, ends)
    ref = quintic_reference(g.knots, y, ends)
    x = np.linspace(g.a, g.b, 300)
    for order in range(5):
        scale = 1 + np.abs(ref(x, order)).max()
        assert np.max(np.abs(s(x, order) - ref(x, order))) <= 1e-9 * scale


@pytest.mark.parametrize("degree", [3, 5])
@pytest.mark.parametrize("pdeg", [0, 1, 2, 3, 4, 5])
def test_polynomial_reproduction(degree, pdeg):
    if pdeg > degree:
        pytest.skip("beyond reproduction order")
    rng = np.random.default_rng(pdeg + 10 * degree)
    c = rng.normal(size=pdeg + 1)
    g = random_grid(rng, 7, a=-1.0)
    y = poly_derivs(c, g.knots, 0)
    if degree == 3:
        ends = (poly_derivs(c, g.a, 1), poly_derivs(c, g.b, 1))
    else:
        ends = tuple(poly_derivs(c, t, r) for t in (g.a, g.b) for r in (1, 2))
    s = build_clamped(g, y, ends)
    x = np.linspace(g.a, g.b, 200)
    exact = poly_derivs(c, x, 0)
    assert np.max(np.abs(s(x) - exact)) <= 1e-11 * (1 + np.abs(exact).max())


@pytest.mark.parametrize("degree", [3, 5])
def test_clamp_conditions_and_smoothness(degree):
    rng = np.random.default_rng(degree)
    g = random_grid(rng, 9)
    y = rng.normal(size=10)
    ends = rng.normal(size=degree - 1)
    s = build_clamped(g, y, ends)
    assert np.max(np.abs(s(g.knots) - y)) <= 1e-10 * (1 + np.abs(y).max())
    for k in range(degree):
        assert jump(s, k) <= 1e-9 * (1 + np.abs(s.coeffs).max())
    if degree == 3:
        got = [s(g.a, 1), s(g.b, 1)]
    else:
        got = [s(g.a, 1), s(g.a, 2), s(g.b, 1), s(g.b, 2)]
    np.testing.assert_allclose(got, ends, atol=1e-10)


def test_recursive_quintic_clamp_short_grid():
    rng = np.random.default_rng(9)
    g = random_grid(rng, 3)
    y = rng.normal(size=4)
    ends = rng.normal(size=4)
    a = build_clamped(g, y, ends, "recursive")
    b = build_clamped(g, y, ends)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-9)


def test_clamped_dimension_errors():
    g = KnotGrid([0.0, 1.0, 2.0])
    with pytest.raises(DimensionError):
        build_clamped(g, [0.0, 1.0], (0.0, 0.0))
    with pytest.raises(DimensionError):
        build_clamped(g, [0.0, 1.0, 2.0], (0.0, 0.0, 0.0))


def test_space_maps_independent_of_values():
    g = make_knots(0, 1, 5)
    sp = ClampedSpace(g, 5)
    assert not sp.value_map.flags.writeable
    y1 = np.arange(6.0)
    e = np.array([1.0, 0.0, -1.0, 2.0])
    np.testing.assert_allclose(sp.coeffs(y1, e), build_clamped(g, y1, e).coeffs)


# --- clamped basis -------------------------------------------------------------


def test_cubic_basis_signature():
    g = make_knots(0, 2, 4)
    y = np.array([0.0, 1.0, -1.0, 0.5, 2.0])
    W = basic_clamped_set(g, y, 3)
    assert W[1](0.0, 1) == pytest.approx(1.0, abs=1e-12)
    assert W[1](2.0, 1) == pytest.approx(0.0, abs=1e-12)
    assert W[2](0.0, 1) == pytest.approx(0.0, abs=1e-12)
    assert W[2](2.0, 1) == pytest.approx(1.0, abs=1e-12)
    for w in W.members:
        np.testing.assert_allclose(w(g.knots), y, atol=1e-12)


def test_quintic_basis_signature():
    g = make_knots(-1, 1, 5)
    y = np.linspace(-1, 1, 6) ** 2
    W = basic_clamped_set(g, y, 5)
    expect = np.eye(5)[:, 1:]  # rows W_0..W_4, columns S'(a), S''(a), S'(b), S''(b)
    for k, w in enumerate(W.members):
        got = [w(-1.0, 1), w(-1.0, 2), w(1.0, 1), w(1.0, 2)]
        np.testing.assert_allclose(got, expect[k], atol=1e-10)
    assert W[2](-1.0, 2) == pytest.approx(1.0)
    assert W[2](-1.0, 1) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("degree", [3, 5])
def test_combine_matches_clamped(degree):
    rng = np.random.default_rng(5)
    g = random_grid(rng, 6)
    y = rng.normal(size=7)
    alphas = rng.normal(size=degree - 1)
    basis = basic_clamped_set(g, y, degree)
    s = combine_basis(basis, alphas)
    np.testing.assert_allclose(s.coeffs, build_clamped(g, y, alphas).coeffs, atol=1e-12)


def test_combine_unit_alphas_return_members():
    g = make_knots(0, 1, 3)
    basis = basic_clamped_set(g, [0, 1, 0, 1], 3)
    np.testing.assert_allclose(combine_basis(basis, (1, 0)).coeffs, basis[1].coeffs, atol=1e-15)
    np.testing.assert_allclose(combine_basis(basis, (0, 0)).coeffs, basis[0].coeffs, atol=1e-15)
    with pytest.raises(DimensionError):
        combine_basis(basis, (1, 0, 0, 0))


def test_recursive_basis_agrees_on_short_grid():
    g = make_knots(0, 1, 4)
    y = np.array([0.0, 0.3, -0.2, 0.5, 1.0])
    a = basic_clamped_set(g, y, 3, "recursive")
    b = basic_clamped_set(g, y, 3)
    for wa, wb in zip(a.members, b.members):
        np.testing.assert_allclose(wa.coeffs, wb.coeffs, atol=1e-12)


# --- evaluation ------------------------------------------------------------------


def test_evaluate_second_derivative_of_cube():
    s = build_recursive(KnotGrid([0.0, 1.0]), [0.0, 1.0], (0.0, 0.0))
    assert evaluate(s, 0.5, 2) == pytest.approx(3.0)
    assert evaluate(s, 1.0, 0) == pytest.approx(1.0)


def test_evaluate_errors():
    s = build_clamped(KnotGrid([0.0, 1.0, 2.0]), [0, 1, 0], (0, 0))
    with pytest.raises(OutOfDomainError):
        s(2.5)
    with pytest.raises(DerivativeOrderError):
        s(0.5, 4)


def test_top_derivative_jumps():
    g = make_knots(0, 3, 3)
    s = build_clamped(g, [0.0, 1.0, -1.0, 2.0], (0.0, 0.0))
    left, right = s(1.0 - 1e-9, 3), s(1.0 + 1e-9, 3)
    assert abs(left - right) > 1e-3


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=4, max_size=12),
    st.floats(-3, 3),
    st.floats(-3, 3),
)
def test_interpolation_property(values, v0, vn):
    y = np.array(values)
    g = make_knots(0.0, 1.0, y.size - 1)
    s = build_clamped(g, y, (v0, vn))
    assert np.max(np.abs(s(g.knots) - y)) <= 1e-10 * (1 + np.abs(y).max())
    assert jump(s, 1) <= 1e-9 * (1 + np.abs(s.coeffs).max())


# --- roots and resampling ------------------------------------------------------------


def test_roots_of_cubic_derivative():
    # S = x^3 - 3x, so S' = 3x^2 - 3
    g = make_knots(-2, 2, 4)
    y = g.knots**3 - 3 * g.knots
    s = build_clamped(g, y, (9.0, 9.0))
    np.testing.assert_allclose(derivative_roots(s, 1), [-1.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(derivative_roots(s, 2), [0.0], atol=1e-10)


def test_monotone_has_no_extrema():
    g = make_knots(0, 1, 5)
    s = build_clamped(g, np.exp(g.knots), (1.0, np.e))
    assert derivative_roots(s, 1) == []


def test_sin_extrema_on_long_domain():
    g = make_knots(0, 6 * np.pi, 24)
    s = build_clamped(g, np.sin(g.knots), (1.0, 1.0))
    roots = np.array(derivative_roots(s, 1))
    expect = np.pi / 2 + np.pi * np.arange(6)
    assert roots.size == 6
    assert np.max(np.abs(roots - expect)) < 0.2
    # sign-change oracle on a dense sample
    x = np.linspace(0, 6 * np.pi, 20001)
    d = s(x, 1)
    assert np.count_nonzero(np.diff(np.sign(d)) != 0) == 6


def test_roots_order_checked():
    s = build_clamped(KnotGrid([0.0, 1.0, 2.0]), [0, 1, 0], (0, 0))
    with pytest.raises(DerivativeOrderError):
        derivative_roots(s, 3)


def test_resample_examples():
    s = build_recursive(KnotGrid([0.0, 1.0]), [0.0, 1.0], (0.0, 0.0))
    np.testing.assert_allclose(resample(s, KnotGrid([0.0, 0.5, 1.0])), [0, 0.125, 1])
    g = make_knots(0, 2, 4)
    y = np.array([0.0, 1.0, -1.0, 0.5, 2.0])
    t = build_clamped(g, y, (0.0, 0.0))
    np.testing.assert_allclose(resample(t, g), y, atol=1e-14)
    line = build_clamped(g, g.knots, (1.0, 1.0))
    other = KnotGrid([0.0, 0.3, 1.7, 2.0])
    np.testing.assert_allclose(resample(line, other), other.knots, atol=1e-14)


def test_piecewise_shape_checked():
    with pytest.raises(DimensionError):
        PiecewisePolynomial(KnotGrid([0.0, 1.0, 2.0]), np.zeros((1, 4)))
