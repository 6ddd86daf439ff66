"""Franke-function Poisson benchmark: errors, observed orders and timings.

CSV columns are fixed by :data:`CSV_HEADER`; timing columns are the only
non-deterministic fields.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import functionals as fn
from .basis import MonomialBasis
from .errors import ConfigurationError
from .geometry import Rectangle, generate_grid
from .gmls import WeightFunction, build_stencil, solve_coefficients
from .solver import DiscreteProblem, default_sigma0, evaluate_solution, solve

log = logging.getLogger(__name__)

CSV_HEADER = ["method", "m", "h", "N", "max_error", "ratio", "assembly_s", "solve_s", "c0", "delta0", "sigma0", "shape"]
PAIRED_HEADER = [
    "m", "h", "N",
    "mlpg5_max_error", "mlpg5_ratio", "dmlpg5_max_error", "dmlpg5_ratio",
    "mlpg5_assembly_s", "dmlpg5_assembly_s", "speedup",
]

# (amplitude, sx, cx, sy, cy): a * exp(-sx (9x - cx)^2 - sy (9y - cy)^2)
FRANKE_TERMS = (
    (0.75, 0.25, 2.0, 0.25, 2.0),
    (0.75, 1.0 / 49.0, -1.0, 0.1, -1.0),
    (0.5, 0.25, 7.0, 0.25, 3.0),
    (-0.2, 1.0, 4.0, 1.0, 7.0),
)


def _franke_parts(x, y):
    for a, sx, cx, sy, cy in FRANKE_TERMS:
        tx = 9.0 * x - cx
        ty = 9.0 * y - cy
        g = a * np.exp(-sx * tx**2 - sy * ty**2)
        qx = -18.0 * sx * tx
        qy = -18.0 * sy * ty
        qxx = -162.0 * sx
        qyy = -162.0 * sy
        yield g, qx, qy, qxx, qyy


def franke(x, y):
    """Franke's four-Gaussian test surface on [0, 1]^2."""
    return sum(g for g, *_ in _franke_parts(np.asarray(x, float), np.asarray(y, float)))


def franke_laplacian(x, y):
    return sum(g * (qx**2 + qy**2 + qxx + qyy) for g, qx, qy, qxx, qyy in _franke_parts(np.asarray(x, float), np.asarray(y, float)))


def franke_gradient(x, y):
    gx = gy = 0.0
    for g, qx, qy, _, _ in _franke_parts(np.asarray(x, float), np.asarray(y, float)):
        gx = gx + g * qx
        gy = gy + g * qy
    return gx, gy


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution with its Laplacian and gradient, all taking points (n, d)."""

    name: str
    u: object
    laplacian: object
    gradient: object

    def neumann(self, points, normals):
        return np.einsum("nd,nd->n", self.gradient(points), normals)


FRANKE = ManufacturedProblem(
    "franke",
    lambda p: franke(p[:, 0], p[:, 1]),
    lambda p: franke_laplacian(p[:, 0], p[:, 1]),
    lambda p: np.stack(franke_gradient(p[:, 0], p[:, 1]), axis=1),
)


def polynomial_problem(coeffs, name="polynomial"):
    """Manufactured 2-D polynomial ``sum c * x^i y^j`` from ``{(i, j): c}``."""
    items = [(int(i), int(j), float(c)) for (i, j), c in coeffs.items()]

    def u(p):
        return sum(c * p[:, 0] ** i * p[:, 1] ** j for i, j, c in items) + 0.0 * p[:, 0]

    def lap(p):
        out = 0.0 * p[:, 0]
        for i, j, c in items:
            if i >= 2:
                out = out + c * i * (i - 1) * p[:, 0] ** (i - 2) * p[:, 1] ** j
            if j >= 2:
                out = out + c * j * (j - 1) * p[:, 0] ** i * p[:, 1] ** (j - 2)
        return out

    def grad(p):
        gx = 0.0 * p[:, 0]
        gy = 0.0 * p[:, 0]
        for i, j, c in items:
            if i >= 1:
                gx = gx + c * i * p[:, 0] ** (i - 1) * p[:, 1] ** j
            if j >= 1:
                gy = gy + c * j * p[:, 0] ** i * p[:, 1] ** (j - 1)
        return np.stack([gx, gy], axis=1)

    return ManufacturedProblem(name, u, lap, grad)


@dataclass(frozen=True)
class BenchParams:
    c0: float = 0.6
    delta0: float = 4.0
    sigma0: float = None
    shape: str = fn.BALL
    n_boundary: int = None
    n_interior: int = None
    n_rhs: int = None
    oversample: bool = False
    probe_error: bool = False
    workers: int = None

    @property
    def resolved_sigma0(self):
        return self.sigma0 if self.sigma0 is not None else default_sigma0(self.shape)


def default_params(m, **overrides):
    """Benchmark defaults: c0=0.6 with balls for m <= 3, c0=0.8 with squares for m >= 4, delta0=2m."""
    if m >= 4:
        base = BenchParams(c0=0.8, delta0=2.0 * m, shape=fn.SQUARE)
    else:
        base = BenchParams(c0=0.6, delta0=2.0 * max(m, 1), shape=fn.BALL)
    return replace(base, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class CaseResult:
    method: str
    m: int
    h: float
    N: int
    max_error: float
    assembly_s: float
    solve_s: float
    c0: float
    delta0: float
    sigma0: float
    shape: str
    ratio: float = None
    values: np.ndarray = field(default=None, repr=False)

    def csv_row(self, timings=True):
        return [
            self.method, self.m, _fmt(self.h), self.N, _fmt(self.max_error),
            "" if self.ratio is None else _fmt(self.ratio),
            f"{self.assembly_s:.6f}" if timings else "",
            f"{self.solve_s:.6f}" if timings else "",
            _fmt(self.c0), _fmt(self.delta0), _fmt(self.sigma0), self.shape,
        ]


def _fmt(v):
    return repr(float(v))


def observed_orders(errors):
    """``log2(e_i / e_{i+1})`` for consecutive halvings of h."""
    return [math.log2(a / b) if a > 0 and b > 0 else float("nan") for a, b in zip(errors[:-1], errors[1:])]


def run_case(method, m, h, params=None, problem=FRANKE, domain=None):
    """Build the grid, assemble, solve and measure the maximum nodal error."""
    params = params or default_params(m)
    domain = domain or Rectangle.unit()
    nodes = generate_grid(domain, h)
    dp = DiscreteProblem(
        nodes, method, m, problem.laplacian, problem.u, problem.neumann,
        c0=params.c0, delta0=params.delta0, shape=params.shape, sigma0=params.sigma0,
        n_boundary=params.n_boundary, n_interior=params.n_interior, n_rhs=params.n_rhs,
        oversample=params.oversample,
    )
    sol = solve(dp, workers=params.workers)
    exact = problem.u(nodes.points)
    err = float(np.max(np.abs(sol.values - exact)))
    if params.probe_error:
        err = max(err, _probe_error(sol, nodes, dp, problem))
    log.info("%s m=%d h=%g N=%d max_error=%.3e assembly=%.2fs solve=%.2fs",
             method, m, h, len(nodes), err, sol.assembly_s, sol.solve_s)
    return CaseResult(method, m, h, len(nodes), err, sol.assembly_s, sol.solve_s,
                      dp.c0, dp.delta0, dp.sigma0, dp.shape, values=sol.values)


def _probe_error(sol, nodes, dp, problem):
    dom = nodes.domain
    k = int(round(dom.sides[0] / dp.h)) * 4
    axes = [np.linspace(dom.lo[i], dom.hi[i], k + 1) for i in range(dom.dim)]
    probes = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    approx = np.array([evaluate_solution(sol, nodes, x, dp.basis, dp.weight) for x in probes])
    return float(np.max(np.abs(approx - problem.u(probes))))


@dataclass
class ConvergenceReport:
    rows: list
    metadata: dict = field(default_factory=dict)
    timings: bool = True

    @property
    def errors(self):
        return [r.max_error for r in self.rows]

    @property
    def ratios(self):
        return [r.ratio for r in self.rows[1:]]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_row(self.timings))
        return buf.getvalue()

    def plot_data(self):
        """``method log10(h) log10(error)`` lines."""
        return "".join(f"{r.method} {math.log10(r.h)!r} {math.log10(r.max_error)!r}\n" for r in self.rows if r.max_error > 0)


def _check_halving(hs):
    if len(hs) < 1:
        raise ConfigurationError("need at least one mesh size")
    for a, b in zip(hs[:-1], hs[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ConfigurationError(f"mesh sizes must halve row by row, got {a} then {b}")


def convergence_study(method, m, hs, params=None, problem=FRANKE, parallel=False):
    """Run one case per mesh size and fill in observed orders.

    With ``parallel=True`` cases run concurrently and timing columns are left
    empty in the CSV.
    """
    _check_halving(hs)
    params = params or default_params(m)
    if parallel:
        with ThreadPoolExecutor() as pool:
            rows = list(pool.map(lambda h: run_case(method, m, h, params, problem), hs))
    else:
        rows = [run_case(method, m, h, params, problem) for h in hs]
    for prev, row in zip(rows[:-1], rows[1:]):
        row.ratio = observed_orders([prev.max_error, row.max_error])[0]
    meta = {"c0": params.c0, "delta0": params.delta0, "sigma0": params.resolved_sigma0, "shape": params.shape,
            "n_boundary": params.n_boundary, "n_interior": params.n_interior, "n_rhs": params.n_rhs}
    return ConvergenceReport(rows, meta, timings=not parallel)


@dataclass
class PairedReport:
    mlpg: ConvergenceReport
    dmlpg: ConvergenceReport

    @property
    def speedups(self):
        return [a.assembly_s / b.assembly_s for a, b in zip(self.mlpg.rows, self.dmlpg.rows)]

    def to_csv(self):
        """Both methods in the standard schema."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rep in (self.mlpg, self.dmlpg):
            for r in rep.rows:
                w.writerow(r.csv_row())
        return buf.getvalue()

    def to_paired_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PAIRED_HEADER)
        for a, b, s in zip(self.mlpg.rows, self.dmlpg.rows, self.speedups):
            w.writerow([
                a.m, _fmt(a.h), a.N, _fmt(a.max_error), "" if a.ratio is None else _fmt(a.ratio),
                _fmt(b.max_error), "" if b.ratio is None else _fmt(b.ratio),
                f"{a.assembly_s:.6f}", f"{b.assembly_s:.6f}", f"{s:.3f}",
            ])
        return buf.getvalue()

    def plot_data(self):
        return self.mlpg.plot_data() + self.dmlpg.plot_data()


def compare_methods(m, hs, params=None, problem=FRANKE):
    """MLPG5 reference and DMLPG5 on identical grids and quadrature settings."""
    params = params or default_params(m)
    mlpg = convergence_study("mlpg5", m, hs, params, problem)
    dmlpg = convergence_study("dmlpg5", m, hs, params, problem)
    return PairedReport(mlpg, dmlpg)


def derivative_order_study(m, hs, params=None, alpha=(1, 0), problem=FRANKE, exact_derivative=None):
    """Max GMLS error of ``D^alpha u`` over interior nodes for each h, with orders."""
    params = params or default_params(m)
    if exact_derivative is None:
        if tuple(alpha) == (1, 0):
            exact_derivative = lambda p: problem.gradient(p)[:, 0]
        elif tuple(alpha) == (0, 1):
            exact_derivative = lambda p: problem.gradient(p)[:, 1]
        else:
            raise ConfigurationError("pass exact_derivative for derivatives other than first order")
    errors = []
    for h in hs:
        nodes = generate_grid(Rectangle.unit(), h)
        weight = WeightFunction.from_mesh(h, params.c0, params.delta0)
        basis = MonomialBasis(m, 2, h)
        u = problem.u(nodes.points)
        idx = nodes.interior_indices
        err = 0.0
        for j in idx:
            y = nodes.points[j]
            st = build_stencil(nodes, y, basis, weight)
            row = solve_coefficients(st, st.basis.eval_derivative(alpha, y))
            err = max(err, abs(row.apply(u) - exact_derivative(y[None, :])[0]))
        errors.append(err)
    return errors, observed_orders(errors)
