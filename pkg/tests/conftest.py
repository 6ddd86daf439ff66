"""Shared oracles and fixtures."""
import mpmath
import numpy as np
import pytest

from petrovkit import Rectangle, generate_grid

ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"ACCEPTANCE {number:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _criterion_key(line):
    label = line.split(":")[0].split()[-1]
    digits = "".join(ch for ch in label if ch.isdigit())
    return int(digits), label


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_key):
            terminalreporter.write_line(line)


def kkt_oracle(P, w, lam, dps=40):
    """Minimise sum a_j^2 / w_j subject to P a = lam by a high-precision KKT solve.

    Independent of the library path: the full saddle-point system
    [[diag(1/w), P^T], [P, 0]] [a; -mu] = [0; lam] is solved with mpmath.
    """
    q, n = P.shape
    with mpmath.workdps(dps):
        K = mpmath.zeros(n + q, n + q)
        rhs = mpmath.zeros(n + q, 1)
        for j in range(n):
            K[j, j] = 1 / mpmath.mpf(float(w[j]))
            for k in range(q):
                K[j, n + k] = mpmath.mpf(float(P[k, j]))
                K[n + k, j] = mpmath.mpf(float(P[k, j]))
        for k in range(q):
            rhs[n + k] = mpmath.mpf(float(lam[k]))
        sol = mpmath.lu_solve(K, rhs)
        return np.array([float(sol[j]) for j in range(n)])


def naive_monomials(m, x, z, h):
    """Graded-lex scaled monomials written out directly for d = 2."""
    u = (x[0] - z[0]) / h
    v = (x[1] - z[1]) / h
    return np.array([u ** (k - j) * v**j for k in range(m + 1) for j in range(k + 1)])


@pytest.fixture(scope="session")
def unit():
    return Rectangle.unit()


@pytest.fixture(scope="session")
def grid10(unit):
    return generate_grid(unit, 0.1)


@pytest.fixture(scope="session")
def grid20(unit):
    return generate_grid(unit, 0.05)
