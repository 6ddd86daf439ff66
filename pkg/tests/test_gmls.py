import math
from concurrent.futures import ThreadPoolExecutor

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petrovkit import (
    ConfigurationError,
    MonomialBasis,
    NodeSet,
    UnisolvencyError,
    WeightFunction,
    build_stencil,
    generate_grid,
    gmls_derivative_row,
    mls_shape_gradients,
    mls_shape_values,
    solve_coefficients,
)
from petrovkit.bench import default_params, observed_orders

from conftest import kkt_oracle


def weight_oracle(r, c, delta):
    if r >= delta:
        return 0.0
    with mpmath.workdps(40):
        tail = mpmath.exp(-((mpmath.mpf(delta) / c) ** 2))
        return float((mpmath.exp(-((mpmath.mpf(r) / c) ** 2)) - tail) / (1 - tail))


# --- weight function -----------------------------------------------------

def test_weight_examples():
    w = WeightFunction.from_mesh(0.1, 0.6, 4.0)
    assert w(0.0) == 1.0
    assert w(0.4) == 0.0
    assert w(0.5) == 0.0
    for r in (0.01, 0.1, 0.2, 0.35, 0.399):
        assert float(w(r)) == pytest.approx(weight_oracle(r, 0.06, 0.4), rel=1e-12, abs=1e-300)


def test_weight_is_nonincreasing():
    w = WeightFunction(0.3, 1.0)
    vals = w(np.linspace(0, 1.2, 500))
    assert np.all(np.diff(vals) <= 0)
    assert np.all(vals >= 0)


def test_weight_gradient_matches_finite_differences():
    w = WeightFunction(0.3, 0.8)
    centers = np.array([[0.1, 0.2], [0.5, 0.4], [0.9, 0.9]])
    x = np.array([0.3, 0.35])
    g = w.gradient(x, centers)
    eps = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = eps
        fd = (w(np.linalg.norm(x + e - centers, axis=1)) - w(np.linalg.norm(x - e - centers, axis=1))) / (2 * eps)
        np.testing.assert_allclose(g[:, i], fd, atol=1e-7)


def test_weight_validation():
    with pytest.raises(ConfigurationError):
        WeightFunction(0.0, 1.0)
    with pytest.raises(ValueError):
        WeightFunction(0.1, 1.0)(-0.1)


# --- stencils --------------------------------------------------------------

def test_constant_basis_gram_is_weight_sum(grid10):
    w = WeightFunction.from_mesh(0.1, 0.6, 4.0)
    y = np.array([0.43, 0.57])
    st_ = build_stencil(grid10, y, MonomialBasis(0, 2, 0.1), w)
    assert st_.gram[0, 0] == pytest.approx(st_.weights.sum())
    r = np.linalg.norm(grid10.points - y, axis=1)
    assert st_.n_local == np.count_nonzero(r < 0.4)
    np.testing.assert_array_equal(st_.indices, np.flatnonzero(r < 0.4))


def test_too_few_nodes_raise_unisolvency(grid10):
    w = WeightFunction(0.06, 0.101)  # only the 5-point cross has positive weight
    with pytest.raises(UnisolvencyError) as info:
        build_stencil(grid10, grid10.points[60], MonomialBasis(2, 2, 0.1), w)
    assert info.value.n_local == 5 and info.value.q == 6
    assert "Q=6" in str(info.value)


def test_collinear_nodes_raise_unisolvency(unit):
    pts = np.column_stack([np.linspace(0, 1, 11), np.full(11, 0.5)])
    nodes = NodeSet.from_points(pts, unit, spacing=0.1)
    with pytest.raises(UnisolvencyError, match="condition"):
        build_stencil(nodes, (0.5, 0.5), MonomialBasis(1, 2, 0.1), WeightFunction(0.06, 0.4))


def test_point_value_at_node_reproduces_basis(grid10):
    w = WeightFunction.from_mesh(0.1, 0.6, 4.0)
    y = grid10.points[47]
    st_ = build_stencil(grid10, y, MonomialBasis(2, 2, 0.1), w)
    row = solve_coefficients(st_, st_.basis.eval(y))
    np.testing.assert_allclose(st_.P @ row.values, st_.basis.eval(y), atol=1e-12)


def test_interpolation_when_n_local_equals_q(unit):
    pts = np.array([[0.4, 0.4], [0.6, 0.4], [0.4, 0.6]])
    nodes = NodeSet.from_points(pts, unit, spacing=0.2)
    b = MonomialBasis(1, 2, 0.2)
    st_ = build_stencil(nodes, (0.45, 0.47), b, WeightFunction(0.3, 0.5))
    row = solve_coefficients(st_, st_.basis.eval(np.array([0.45, 0.47])))
    # the unique interpolant of u = 1 + 2x - y
    u = 1 + 2 * pts[:, 0] - pts[:, 1]
    assert row.apply(u) == pytest.approx(1 + 0.9 - 0.47, rel=1e-13)


def test_five_point_laplacian_in_the_limit(grid10):
    h = 0.1
    # support just past the diagonal neighbours: corner weights are tiny
    w = WeightFunction(0.6 * h, math.sqrt(2) * h * (1 + 1e-6))
    y = grid10.points[60]
    st_ = build_stencil(grid10, y, MonomialBasis(2, 2, h), w)
    assert st_.n_local == 9
    row = solve_coefficients(st_, st_.basis.laplacian(y))
    coeff = {tuple(np.round((grid10.points[j] - y) / h).astype(int)): v for j, v in zip(row.indices, row.values)}
    expected = {(0, 0): -4.0, (1, 0): 1.0, (-1, 0): 1.0, (0, 1): 1.0, (0, -1): 1.0,
                (1, 1): 0.0, (1, -1): 0.0, (-1, 1): 0.0, (-1, -1): 0.0}
    for key, val in expected.items():
        assert coeff[key] * h * h == pytest.approx(val, abs=1e-5)
    np.testing.assert_allclose(row.values, kkt_oracle(st_.P, st_.weights, st_.basis.laplacian(y)), rtol=1e-9, atol=1e-9 / h**2)


@pytest.mark.parametrize("m,seed", [(1, 0), (2, 1), (3, 2), (2, 3)])
def test_coefficients_match_kkt_oracle(unit, m, seed):
    rng = np.random.default_rng(seed)
    h = 0.1
    nodes = generate_grid(unit, h)
    y = rng.uniform(0.2, 0.8, 2)
    w = WeightFunction(0.6 * h, 2.2 * h if m < 3 else 2.6 * h)
    st_ = build_stencil(nodes, y, MonomialBasis(m, 2, h), w)
    assert st_.n_local <= 30
    lam = st_.basis.eval_derivative((1, 0), y)
    row = solve_coefficients(st_, lam)
    oracle = kkt_oracle(st_.P, st_.weights, lam)
    np.testing.assert_allclose(row.values, oracle, atol=1e-9 * max(1.0, np.abs(oracle).max()))


@settings(max_examples=40, deadline=None)
@given(
    m=st.integers(0, 4),
    y=st.tuples(st.floats(0, 1), st.floats(0, 1)),
    alpha=st.sampled_from([(0, 0), (1, 0), (0, 1), (2, 0), (1, 1)]),
)
def test_exactness_on_basis(grid10, m, y, alpha):
    if sum(alpha) > m:
        alpha = (0, 0)
    y = np.array(y)
    p = default_params(m)
    w = WeightFunction.from_mesh(0.1, p.c0, p.delta0)
    st_ = build_stencil(grid10, y, MonomialBasis(m, 2, 0.1), w)
    lam = st_.basis.eval_derivative(alpha, y)
    row = solve_coefficients(st_, lam)
    np.testing.assert_array_less(np.abs(st_.P @ row.values - lam), 1e-10 * (1 + np.abs(lam)))


def test_weighted_least_squares_consistency(grid10):
    """sum a_j u_j equals lam applied to the weighted least-squares fit of u."""
    h, m = 0.1, 3
    y = np.array([0.52, 0.33])
    w = WeightFunction.from_mesh(h, 0.6, 6.0)
    st_ = build_stencil(grid10, y, MonomialBasis(m, 2, h), w)
    pts = grid10.points[st_.indices]
    u = np.sin(3 * pts[:, 0]) * np.cos(2 * pts[:, 1])
    # independent fit in the unshifted, unscaled basis via lstsq
    expo = [(i - j, j) for i in range(m + 1) for j in range(i + 1)]
    V = np.column_stack([pts[:, 0] ** a * pts[:, 1] ** b for a, b in expo])
    sw = np.sqrt(st_.weights)
    c, *_ = np.linalg.lstsq(sw[:, None] * V, sw * u, rcond=None)
    lap_fit = sum(
        ci * (a * (a - 1) * y[0] ** max(a - 2, 0) * y[1] ** b + b * (b - 1) * y[0] ** a * y[1] ** max(b - 2, 0))
        for ci, (a, b) in zip(c, expo)
    )
    row = solve_coefficients(st_, st_.basis.laplacian(y))
    full = np.zeros(len(grid10))
    full[st_.indices] = u
    assert row.apply(full) == pytest.approx(lap_fit, rel=1e-8)


def test_locality_under_wider_search(grid10):
    w = WeightFunction.from_mesh(0.1, 0.6, 4.0)
    y = np.array([0.31, 0.64])
    b = MonomialBasis(2, 2, 0.1)
    a = build_stencil(grid10, y, b, w)
    c = build_stencil(grid10, y, b, w, radius=0.7)
    np.testing.assert_array_equal(a.indices, c.indices)
    la = solve_coefficients(a, a.basis.laplacian(y)).values
    lc = solve_coefficients(c, c.basis.laplacian(y)).values
    np.testing.assert_array_equal(la, lc)


def test_concurrent_rows_are_identical(grid20):
    w = WeightFunction.from_mesh(0.05, 0.6, 4.0)
    b = MonomialBasis(2, 2, 0.05)
    ys = np.random.default_rng(2).random((60, 2))

    def row(y):
        return gmls_derivative_row(grid20, y, (0, 1), b, w).values

    serial = [row(y) for y in ys]
    with ThreadPoolExecutor(4) as pool:
        threaded = list(pool.map(row, ys))
    for a, c in zip(serial, threaded):
        np.testing.assert_array_equal(a, c)


# --- derivative recovery ---------------------------------------------------

def test_derivative_row_examples(grid10):
    w = WeightFunction.from_mesh(0.1, 0.6, 4.0)
    b = MonomialBasis(2, 2, 0.1)
    y = np.array([0.5, 0.5])
    u = 0.3 + 2 * grid10.points[:, 0] - grid10.points[:, 1] + grid10.points[:, 0] * grid10.points[:, 1]
    assert gmls_derivative_row(grid10, y, (0, 0), b, w).apply(u) == pytest.approx(0.3 + 1 - 0.5 + 0.25, rel=1e-12)
    assert gmls_derivative_row(grid10, y, (1, 0), b, w).apply(u) == pytest.approx(2.5, rel=1e-12)
    with pytest.raises(ValueError):
        gmls_derivative_row(grid10, y, (2, 1), b, w)


def test_derivative_convergence_order_smooth_function(unit):
    errs = []
    for h in (0.1, 0.05, 0.025):
        nodes = generate_grid(unit, h)
        w = WeightFunction.from_mesh(h, 0.6, 4.0)
        b = MonomialBasis(2, 2, h)
        u = np.sin(nodes.points.sum(1))
        e = 0.0
        for j in nodes.interior_indices[:: max(1, len(nodes.interior_indices) // 150)]:
            y = nodes.points[j]
            e = max(e, abs(gmls_derivative_row(nodes, y, (1, 0), b, w).apply(u) - math.cos(y.sum())))
        errs.append(e)
    assert observed_orders(errs)[-1] >= 1.7


# --- MLS shape functions -----------------------------------------------------

def test_partition_of_unity_and_linear_reproduction(grid10):
    w = WeightFunction.from_mesh(0.1, 0.6, 4.0)
    b = MonomialBasis(2, 2, 0.1)
    for x in np.random.default_rng(7).random((100, 2)):
        idx, phi = mls_shape_values(grid10, x, b, w)
        assert phi.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(phi @ grid10.points[idx], x, atol=1e-12)


def test_shape_values_match_normal_equations(grid10):
    h = 0.1
    w = WeightFunction.from_mesh(h, 0.6, 4.0)
    x = np.array([0.27, 0.61])
    idx, phi = mls_shape_values(grid10, x, MonomialBasis(2, 2, h), w)
    pts = grid10.points[idx]
    wt = w(np.linalg.norm(pts - x, axis=1))
    V = np.column_stack([np.ones(len(pts)), pts, pts[:, 0] ** 2, pts[:, 0] * pts[:, 1], pts[:, 1] ** 2])
    px = np.array([1, x[0], x[1], x[0] ** 2, x[0] * x[1], x[1] ** 2])
    A = V.T @ (wt[:, None] * V)
    oracle = (V * wt[:, None]) @ np.linalg.solve(A, px)
    np.testing.assert_allclose(phi, oracle, atol=1e-9)


def test_shape_gradients(grid10):
    h = 0.1
    w = WeightFunction.from_mesh(h, 0.6, 4.0)
    b = MonomialBasis(2, 2, h)
    n = len(grid10)
    for x in np.random.default_rng(9).uniform(0.15, 0.85, (10, 2)):
        idx, g = mls_shape_gradients(grid10, x, b, w)
        np.testing.assert_allclose(g.sum(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(grid10.points[idx].T @ g, np.eye(2), atol=1e-9)
        dense = np.zeros((n, 2))
        dense[idx] = g
        eps = 1e-6 * h
        for i in range(2):
            e = np.zeros(2)
            e[i] = eps
            ip, pp = mls_shape_values(grid10, x + e, b, w)
            im, pm = mls_shape_values(grid10, x - e, b, w)
            fd = np.zeros(n)
            fd[ip] += pp
            fd[im] -= pm
            np.testing.assert_allclose(dense[:, i], fd / (2 * eps), atol=1e-5)


@pytest.mark.parametrize("alpha", [(4, 0), (2, 2), (0, 4), (3, 1)])
def test_high_order_exactness_relative_to_row_scale(grid20, alpha):
    # 4th derivatives reach 24 / h^4; exactness is bounded by round-off in P a
    w = WeightFunction.from_mesh(0.05, 0.8, 8.0)
    b = MonomialBasis(4, 2, 0.05)
    for y in np.random.default_rng(4).random((20, 2)):
        st_ = build_stencil(grid20, y, b, w)
        lam = st_.basis.eval_derivative(alpha, y)
        a = solve_coefficients(st_, lam).values
        floor = np.finfo(float).eps * (np.abs(st_.P) @ np.abs(a))
        np.testing.assert_array_less(np.abs(st_.P @ a - lam), 1e-10 * np.abs(lam).max() + 100 * floor)
