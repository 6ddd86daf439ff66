import math

import mpmath
import numpy as np
import pytest

from petrovkit import ConfigurationError
from petrovkit import bench


def franke_mp(x, y):
    x, y = mpmath.mpf(x), mpmath.mpf(y)
    return (
        mpmath.mpf(3) / 4 * mpmath.exp(-((9 * x - 2) ** 2) / 4 - (9 * y - 2) ** 2 / 4)
        + mpmath.mpf(3) / 4 * mpmath.exp(-((9 * x + 1) ** 2) / 49 - (9 * y + 1) ** 2 / 10)
        + mpmath.mpf(1) / 2 * mpmath.exp(-((9 * x - 7) ** 2) / 4 - (9 * y - 3) ** 2 / 4)
        - mpmath.mpf(1) / 5 * mpmath.exp(-((9 * x - 4) ** 2) - (9 * y - 7) ** 2)
    )


def test_franke_values():
    for x, y in [(0.5, 0.5), (0.0, 0.0), (0.2, 0.9), (1.0, 0.3)]:
        with mpmath.workdps(30):
            ref = float(franke_mp(x, y))
        assert bench.franke(np.array(x), np.array(y)) == pytest.approx(ref, rel=1e-14)


def test_franke_bounds():
    g = np.linspace(0, 1, 101)
    X, Y = np.meshgrid(g, g)
    assert bench.franke(X, Y).min() > -0.2


def test_franke_fourth_term_centre():
    terms = list(bench._franke_parts(np.array([4 / 9]), np.array([7 / 9])))
    assert float(np.ravel(terms[3][0])[0]) == pytest.approx(-0.2, rel=1e-14)


def test_franke_laplacian_against_high_precision():
    pts = np.random.default_rng(0).random((25, 2))
    with mpmath.workdps(30):
        for x, y in pts:
            ref = mpmath.diff(franke_mp, (x, y), (2, 0)) + mpmath.diff(franke_mp, (x, y), (0, 2))
            assert bench.franke_laplacian(np.array(x), np.array(y)) == pytest.approx(float(ref), rel=1e-11, abs=1e-11)


def test_franke_laplacian_against_finite_differences():
    x, y = np.random.default_rng(1).random((100, 2)).T

    def five_point(e):
        f = bench.franke
        return (f(x + e, y) + f(x - e, y) + f(x, y + e) + f(x, y - e) - 4 * f(x, y)) / e**2

    # Richardson removes the O(e^2) truncation term of the 5-point stencil
    fd = (4 * five_point(1e-4) - five_point(2e-4)) / 3
    np.testing.assert_allclose(bench.franke_laplacian(x, y), fd, atol=1e-5)


def test_franke_gradient():
    x, y = np.random.default_rng(2).random((10, 2)).T
    gx, gy = bench.franke_gradient(x, y)
    e = 1e-6
    np.testing.assert_allclose(gx, (bench.franke(x + e, y) - bench.franke(x - e, y)) / (2 * e), atol=1e-7)
    np.testing.assert_allclose(gy, (bench.franke(x, y + e) - bench.franke(x, y - e)) / (2 * e), atol=1e-7)


def test_polynomial_problem():
    p = bench.polynomial_problem({(2, 1): 2.0, (0, 0): 1.0})
    pts = np.array([[0.5, 2.0]])
    assert p.u(pts)[0] == pytest.approx(2.0)
    assert p.laplacian(pts)[0] == pytest.approx(8.0)
    np.testing.assert_allclose(p.gradient(pts)[0], [4.0, 0.5])
    assert p.neumann(pts, np.array([[0.0, -1.0]]))[0] == pytest.approx(-0.5)


def test_observed_orders():
    assert bench.observed_orders([1.0, 0.25, 0.0625]) == [2.0, 2.0]
    assert math.isnan(bench.observed_orders([1.0, 0.0])[0])


def test_default_params():
    p2 = bench.default_params(2)
    assert (p2.c0, p2.delta0, p2.shape, p2.resolved_sigma0) == (0.6, 4.0, "ball", 0.7)
    p4 = bench.default_params(4)
    assert (p4.c0, p4.delta0, p4.shape, p4.resolved_sigma0) == (0.8, 8.0, "square", 1.0)
    assert bench.default_params(3, c0=0.5).c0 == 0.5


def test_run_case_examples():
    r = bench.run_case("dmlpg5", 2, 0.2)
    assert r.N == 36
    assert 0.023 / 5 <= r.max_error <= 0.023 * 5
    r4 = bench.run_case("dmlpg5", 4, 0.05)
    assert 0.0012 / 5 <= r4.max_error <= 0.0012 * 5


def test_run_case_polynomial_override():
    p = bench.polynomial_problem({(2, 0): 1.0, (1, 1): -2.0, (0, 1): 0.5})
    assert bench.run_case("dmlpg5", 2, 0.1, problem=p).max_error <= 1e-8


def test_convergence_study_csv(tmp_path):
    rep = bench.convergence_study("dmlpg5", 2, [0.2, 0.1])
    lines = rep.to_csv().splitlines()
    assert lines[0] == "method,m,h,N,max_error,ratio,assembly_s,solve_s,c0,delta0,sigma0,shape"
    assert len(lines) == 3
    e0, e1 = rep.errors
    assert rep.ratios[0] == pytest.approx(math.log2(e0 / e1))
    assert lines[1].split(",")[5] == ""
    assert float(lines[2].split(",")[5]) == pytest.approx(rep.ratios[0])
    plot = rep.plot_data().splitlines()
    assert float(plot[0].split()[1]) == pytest.approx(math.log10(0.2))


def test_parallel_study_matches_serial():
    a = bench.convergence_study("dmlpg5", 2, [0.2, 0.1])
    b = bench.convergence_study("dmlpg5", 2, [0.2, 0.1], parallel=True)
    assert a.errors == b.errors
    assert b.to_csv().splitlines()[1].split(",")[6] == ""


def test_halving_required():
    with pytest.raises(ConfigurationError, match="halve"):
        bench.convergence_study("dmlpg5", 2, [0.2, 0.125])


def test_compare_methods_speedup():
    rep = bench.compare_methods(2, [0.1, 0.05])
    assert len(rep.speedups) == 2
    assert rep.speedups[-1] >= 3
    paired = rep.to_paired_csv().splitlines()
    assert paired[0].split(",")[-1] == "speedup"
    assert len(rep.to_csv().splitlines()) == 5


@pytest.mark.parametrize("m", [2, 3])
def test_derivative_order_study(m):
    errors, orders = bench.derivative_order_study(m, [0.1, 0.05, 0.025])
    assert orders[-1] >= m - 0.3
