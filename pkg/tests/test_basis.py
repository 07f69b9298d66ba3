import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.interpolate import BSpline

from dpdlogit.basis import (
    Grid,
    curve_basis_inner_products,
    default_dimension,
    eval_basis,
    grid_from_points,
    gram_matrix,
    make_basis,
    make_uniform_grid,
    penalty_matrix,
)


def test_uniform_grid_two_points():
    g = make_uniform_grid(2)
    np.testing.assert_array_equal(g.points, [0.0, 1.0])
    np.testing.assert_array_equal(g.weights, [0.5, 0.5])
    assert g.weights.sum() == 1.0


def test_uniform_grid_200():
    g = make_uniform_grid(200)
    assert len(g) == 200
    np.testing.assert_allclose(np.diff(g.points), 1 / 199)
    assert abs(g.weights.sum() - 1.0) < 1e-12


def test_constant_integrates_to_one():
    assert make_uniform_grid(5).integrate(np.ones(5)) == 1.0


@pytest.mark.parametrize("m", [1, 0, -3])
def test_grid_too_small(m):
    with pytest.raises(ValueError):
        make_uniform_grid(m)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 0.5, 0.4]), np.ones(3))
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 1.5]), np.ones(2))


def test_nonuniform_grid_weights_cover_span():
    g = grid_from_points([0.1, 0.2, 0.5, 0.9])
    assert abs(g.weights.sum() - 0.8) < 1e-12
    np.testing.assert_array_equal(
        grid_from_points(np.linspace(0, 1, 7)).weights, make_uniform_grid(7).weights
    )


def test_make_basis_bernstein():
    b = make_basis(4, 4)
    assert b.interior_knots.size == 0
    t = np.linspace(0, 1, 11)
    bern = np.column_stack([[1, 3, 3, 1][k] * t**k * (1 - t) ** (3 - k) for k in range(4)])
    np.testing.assert_allclose(b.evaluate(t), bern, atol=1e-14)


def test_make_basis_dimension_30():
    b = make_basis(30, 4)
    assert b.dimension == 30
    assert b.interior_knots.size == 26
    np.testing.assert_allclose(np.diff(b.interior_knots), 1 / 27)
    np.testing.assert_array_equal(b.knots[:4], 0.0)
    np.testing.assert_array_equal(b.knots[-4:], 1.0)


def test_make_basis_rejects_small_dimension():
    with pytest.raises(ValueError):
        make_basis(3, 4)


@pytest.mark.parametrize("n,expected", [(400, 30), (60, 15), (8, 4), (1, 4), (10**6, 30)])
def test_default_dimension(n, expected):
    assert default_dimension(n) == expected


def test_eval_basis_endpoint_and_midpoint():
    b = make_basis(4, 4)
    np.testing.assert_allclose(eval_basis(b, [0.0])[0], [1, 0, 0, 0])
    np.testing.assert_allclose(eval_basis(b, [0.5])[0], [0.125, 0.375, 0.375, 0.125])
    np.testing.assert_allclose(eval_basis(b, [1.0])[0], [0, 0, 0, 1])


def test_eval_basis_outside_unit_interval():
    with pytest.raises(ValueError):
        eval_basis(make_basis(6, 4), [-0.01, 0.5])
    with pytest.raises(ValueError):
        eval_basis(make_basis(6, 4), [1.0001])


@pytest.mark.parametrize("K,order", [(6, 2), (10, 3), (12, 4), (30, 4), (9, 5)])
@pytest.mark.parametrize("deriv", [0, 1, 2])
def test_evaluation_matches_scipy(K, order, deriv):
    if deriv >= order:
        pytest.skip("derivative order must be below spline order")
    b = make_basis(K, order)
    t = np.linspace(0, 1, 257)[:-1]
    ref = np.column_stack(
        [BSpline(b.knots, np.eye(K)[k], order - 1)(t, nu=deriv) for k in range(K)]
    )
    scale = max(1.0, np.abs(ref).max())
    np.testing.assert_allclose(b.evaluate(t, deriv), ref, atol=1e-12 * scale)


def test_partition_of_unity_random_points():
    rng = np.random.default_rng(0)
    t = rng.random(1000)
    for K, order in [(4, 4), (30, 4), (17, 3), (8, 2)]:
        rows = eval_basis(make_basis(K, order), t).sum(axis=1)
        assert np.max(np.abs(rows - 1)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(4, 40), st.integers(2, 5))
def test_basis_nonnegative_partition(t, K, order):
    if K < order:
        K = order
    row = eval_basis(make_basis(K, order), [t])[0]
    assert np.all(row >= -1e-15)
    assert abs(row.sum() - 1) < 1e-10


def test_gram_trace_bernstein():
    # integral of squared cubic Bernstein polynomials: C(3,k)^2 B(2k+1, 7-2k) sums to 16/35
    b = make_basis(4, 4)
    exact = sum(
        integrate.quad(lambda t, k=k: ([1, 3, 3, 1][k] * t**k * (1 - t) ** (3 - k)) ** 2, 0, 1)[0]
        for k in range(4)
    )
    assert abs(exact - 16 / 35) < 1e-12
    G = gram_matrix(b, make_uniform_grid(100_000)).entries
    assert abs(np.trace(G) - 16 / 35) < 1e-4
    assert gram_matrix(b, make_uniform_grid(100_000)).derivative_order == 0


def test_gram_ones_quadratic_form_and_symmetry():
    g = make_uniform_grid(200)
    P0 = gram_matrix(make_basis(12, 4), g)
    assert abs(P0.quadratic_form(np.ones(12)) - 1.0) < 1e-12
    assert np.max(np.abs(P0.entries - P0.entries.T)) == 0


def _greville(basis):
    k = basis.order
    return np.array([basis.knots[i + 1 : i + k].mean() for i in range(basis.dimension)])


@pytest.mark.parametrize("K", [4, 10, 30])
def test_second_derivative_penalty_null_space(K):
    g = make_uniform_grid(200)
    b = make_basis(K, 4)
    P = penalty_matrix(b, g, 2)
    t = np.linspace(0, 1, 400)
    const = np.ones(K)
    lin = _greville(b)  # spline coefficients of f(t) = t
    np.testing.assert_allclose(b.evaluate(t) @ lin, t, atol=1e-12)
    assert abs(P.quadratic_form(const)) < 1e-10
    assert abs(P.quadratic_form(lin)) < 1e-10


def test_penalty_of_t_squared():
    b = make_basis(4, 4)
    coef = np.array([0.0, 0.0, 1 / 3, 1.0])  # Bernstein coefficients of t^2
    t = np.linspace(0, 1, 50)
    np.testing.assert_allclose(b.evaluate(t) @ coef, t**2, atol=1e-14)
    P = penalty_matrix(b, make_uniform_grid(200), 2)
    assert abs(P.quadratic_form(coef) - 4.0) < 1e-8


def test_penalty_order_too_high():
    with pytest.raises(ValueError):
        penalty_matrix(make_basis(6, 4), make_uniform_grid(50), 4)


def test_penalty_psd_and_symmetric():
    rng = np.random.default_rng(1)
    P = penalty_matrix(make_basis(20, 4), make_uniform_grid(200), 2).entries
    assert np.max(np.abs(P - P.T)) < 1e-12
    for _ in range(100):
        v = rng.standard_normal(20)
        assert v @ P @ v >= -1e-10 * v @ v
    ev = np.linalg.eigvalsh(P)
    assert np.sum(ev < 1e-9 * ev.max()) == 2


def test_inner_products_special_curves():
    g = make_uniform_grid(200)
    b = make_basis(10, 4)
    B = curve_basis_inner_products(np.zeros((3, 200)), b, g)
    assert np.all(B == 0)
    B1 = curve_basis_inner_products(np.ones((1, 200)), b, g)
    assert abs(B1.sum() - 1.0) < 1e-12
    theta1 = eval_basis(b, g)[:, 0]
    B2 = curve_basis_inner_products(theta1[None, :], b, g)
    np.testing.assert_allclose(B2[0], gram_matrix(b, g).entries[0], atol=1e-15)


def test_inner_products_shape_mismatch():
    with pytest.raises(ValueError):
        curve_basis_inner_products(np.zeros((2, 50)), make_basis(6, 4), make_uniform_grid(40))


def test_quadrature_consistency_between_resolutions():
    b = make_basis(8, 4)
    curves = [lambda t: np.sin(2 * np.pi * t) + 2, lambda t: np.exp(t), lambda t: 1 + t**2]
    for f in curves:
        vals = []
        for m in (200, 2000):
            g = make_uniform_grid(m)
            vals.append(curve_basis_inner_products(f(g.points)[None, :], b, g)[0])
        rel = np.abs(vals[0] - vals[1]) / np.abs(vals[1])
        assert rel.max() < 0.02
