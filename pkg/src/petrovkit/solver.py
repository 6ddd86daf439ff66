"""Global system assembly for DMLPG1/2/5 and the classical MLPG5 reference, plus solves."""
from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import functionals as fn
from . import quadrature as quad
from .basis import MonomialBasis
from .errors import ConfigurationError, SolverError, UnisolvencyError, ZeroRowError
from .geometry import DIRICHLET, INTERIOR
from .gmls import CONDITION_LIMIT, CoefficientRow, WeightFunction, build_stencil, mls_shape_gradients, mls_shape_values, solve_coefficients

METHODS = ("dmlpg1", "dmlpg2", "dmlpg5", "mlpg5")
WEAK_METHODS = ("dmlpg1", "dmlpg5")
DIRECT_LIMIT = 5000
DROP_TOL = 1e-14
THREADS_ENV = "PETROVKIT_THREADS"


def default_sigma0(shape):
    """Subdomain size in units of h: ball radius 0.7 h, square side h."""
    return 0.7 if shape == fn.BALL else 1.0


@dataclass
class DiscreteProblem:
    """Poisson problem ``lap u = f`` on ``nodes.domain`` with a discretisation choice.

    Quadrature counts left as ``None`` take shape-dependent defaults: 20
    angular points on circles and a 20 x 20 polar rule on disks; on squares
    ``ceil(m/2)`` Gauss points per edge for DMLPG5 (exact), 10 per edge for
    the MLPG5 reference, the exact per-axis count for DMLPG1 and 10 x 10 for
    right-hand sides.
    """

    nodes: object
    method: str
    degree: int
    f: object
    u_dirichlet: object
    u_neumann: object = None
    c0: float = 0.6
    delta0: float = None
    shape: str = fn.BALL
    sigma0: float = None
    n_boundary: int = None
    n_interior: int = None
    n_rhs: int = None
    oversample: bool = False
    condition_limit: float = CONDITION_LIMIT

    def __post_init__(self):
        self.method = self.method.lower()
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.degree < 0:
            raise ConfigurationError(f"degree must be non-negative, got m={self.degree}")
        if self.shape not in (fn.BALL, fn.SQUARE):
            raise ConfigurationError(f"unknown subdomain shape {self.shape!r}")
        if self.delta0 is None:
            self.delta0 = 2.0 * max(self.degree, 1)
        if self.sigma0 is None:
            self.sigma0 = default_sigma0(self.shape)
        for name in ("c0", "delta0", "sigma0"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def domain(self):
        return self.nodes.domain

    @property
    def h(self):
        return self.nodes.spacing

    @property
    def weight(self):
        return WeightFunction.from_mesh(self.h, self.c0, self.delta0)

    @property
    def basis(self):
        return MonomialBasis(self.degree, self.nodes.dim, self.h)

    @property
    def sigma(self):
        return self.sigma0 * self.h

    def quadrature_settings(self):
        m = self.degree
        if self.shape == fn.BALL:
            nb, ni, nr = 20, 20, 20
        else:
            nb = 10 if self.method == "mlpg5" else quad.exact_edge_points(m)
            ni = quad.exact_weak1_points(m, 2)
            nr = 10
        return {
            "n_boundary": self.n_boundary or nb,
            "n_interior": self.n_interior or ni,
            "n_rhs": self.n_rhs or nr,
        }

    def test_points(self):
        """Test nodes: the trial nodes, then (with oversampling) admissible cell midpoints."""
        pts = self.nodes.points
        if not self.oversample:
            return pts, np.arange(len(pts))
        h = self.h
        dom = self.domain
        axes = [np.arange(dom.lo[i] + 0.5 * h, dom.hi[i], h) for i in range(dom.dim)]
        mids = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        reach = self.sigma if self.shape == fn.BALL else 0.5 * self.sigma
        if self.method != "dmlpg2":
            ok = [dom.distance_to_boundary(p) >= reach for p in mids]
            mids = mids[np.asarray(ok, dtype=bool)]
        owner = np.concatenate([np.arange(len(pts)), np.full(len(mids), -1)])
        return np.concatenate([pts, mids]), owner


@dataclass
class SparseSystem:
    """Rows of the (possibly overdetermined) system ``A u = b``."""

    rows: list
    rhs: np.ndarray
    n_cols: int
    test_points: np.ndarray = None
    assembly_s: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self):
        return len(self.rows)

    def to_csr(self):
        indptr = np.zeros(self.n_rows + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r.indices) for r in self.rows])
        if self.rows:
            cols = np.concatenate([r.indices for r in self.rows])
            vals = np.concatenate([r.values for r in self.rows])
        else:
            cols, vals = np.zeros(0, int), np.zeros(0)
        return sp.csr_matrix((vals, cols, indptr), shape=(self.n_rows, self.n_cols))

    def write_triplets(self, matrix_path, rhs_path):
        """Write ``row col value`` lines (0-based) and one rhs value per line."""
        with open(matrix_path, "w") as fh:
            for i, r in enumerate(self.rows):
                for j, v in zip(r.indices, r.values):
                    fh.write(f"{i} {int(j)} {float(v)!r}\n")
        with open(rhs_path, "w") as fh:
            for v in self.rhs:
                fh.write(f"{float(v)!r}\n")


def read_triplets(matrix_path, rhs_path, n_cols=None):
    data = np.loadtxt(matrix_path, ndmin=2)
    rhs = np.loadtxt(rhs_path, ndmin=1)
    n_cols = n_cols or (int(data[:, 1].max()) + 1 if len(data) else 0)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(len(rhs), n_cols)), rhs


@dataclass
class Solution:
    values: np.ndarray
    method: str
    residual: float
    assembly_s: float = 0.0
    solve_s: float = 0.0
    meta: dict = field(default_factory=dict)


def _worker_count(workers):
    cap = os.environ.get(THREADS_ENV)
    if workers is None:
        workers = int(cap) if cap else 1
    elif cap:
        workers = min(workers, int(cap))
    return max(1, int(workers))


def _boundary_row(problem, j, y, tag):
    dom = problem.domain
    kind = dom.facet_kind(tag)
    if kind == DIRICHLET:
        row = CoefficientRow(np.array([j]), np.array([1.0]), ("dirichlet", j))
        return row, float(problem.u_dirichlet(y[None, :])[0])
    normal = dom.facet_normal(tag)
    spec = fn.Derivative.normal(y, normal)
    st = build_stencil(problem.nodes, y, problem.basis, problem.weight, condition_limit=problem.condition_limit)
    row = solve_coefficients(st, fn.lambda_on_basis(spec, st.basis), ("neumann", j))
    if problem.u_neumann is None:
        raise ConfigurationError("Neumann facet present but no Neumann data given")
    return row, float(problem.u_neumann(y[None, :], normal[None, :])[0])


def _interior_spec(problem, y, q):
    if problem.method == "dmlpg2":
        return fn.Derivative.laplacian(y), None
    sub = fn.Subdomain(problem.shape, problem.sigma, y)
    sub.check_inside(problem.domain)
    rhs_rule = sub.interior_rule(q["n_rhs"])
    if problem.method == "dmlpg1":
        return fn.make_weak1(y, sub, q["n_interior"]), rhs_rule
    return fn.make_weak5(y, sub, q["n_boundary"], problem.domain), rhs_rule


def _dmlpg_row(problem, y, q):
    spec, rhs_rule = _interior_spec(problem, y, q)
    st = build_stencil(problem.nodes, y, problem.basis, problem.weight, condition_limit=problem.condition_limit)
    row = solve_coefficients(st, fn.lambda_on_basis(spec, st.basis), spec)
    b = fn.rhs_value(spec, problem.f, problem.u_neumann, rhs_rule)
    return row, b


def _mlpg5_row(problem, y, q, work):
    sub = fn.Subdomain(problem.shape, problem.sigma, y)
    sub.check_inside(problem.domain)
    spec = fn.make_weak5(y, sub, q["n_boundary"], problem.domain)
    rule = spec.boundary_rule
    basis, weight, nodes = problem.basis, problem.weight, problem.nodes
    touched = []
    for x, wq, nq in zip(rule.points, rule.weights, rule.normals):
        st = build_stencil(nodes, x, basis.shifted(x), weight, condition_limit=problem.condition_limit)
        idx, grads = mls_shape_gradients(nodes, x, basis, weight, stencil=st)
        work[idx] += wq * (grads @ nq)
        touched.append(idx)
    cols = np.unique(np.concatenate(touched))
    vals = work[cols].copy()
    work[cols] = 0.0
    keep = np.abs(vals) > DROP_TOL * np.max(np.abs(vals))
    row = CoefficientRow(cols[keep], vals[keep], spec)
    b = fn.rhs_value(spec, problem.f, problem.u_neumann, sub.interior_rule(q["n_rhs"]))
    return row, b


def _check_method(problem):
    if problem.method in WEAK_METHODS and problem.degree <= 1:
        raise ZeroRowError(
            f"{problem.method.upper()} with m={problem.degree} is refused: local weak forms of the Laplacian "
            "vanish on linear polynomials, so they necessarily fail for m <= 1 (every interior row would be zero); use m >= 2"
        )


def _assemble(problem, workers, row_builder):
    t0 = time.perf_counter()
    q = problem.quadrature_settings()
    pts, owner = problem.test_points()
    tags = problem.nodes.tags
    n = len(problem.nodes)

    def build(chunk):
        work = np.zeros(n)
        out = []
        for k in chunk:
            y = pts[k]
            j = owner[k]
            try:
                if j >= 0 and tags[j] != INTERIOR:
                    out.append(_boundary_row(problem, j, y, tags[j]))
                else:
                    out.append(row_builder(problem, y, q, work))
            except UnisolvencyError as exc:
                exc.node = int(k)
                exc.args = (f"test node {k}: {exc.args[0]}",)
                raise
        return out

    order = np.arange(len(pts))
    nw = _worker_count(workers)
    if nw == 1:
        results = build(order)
    else:
        chunks = np.array_split(order, nw)
        with ThreadPoolExecutor(max_workers=nw) as pool:
            results = [r for part in pool.map(build, chunks) for r in part]
    rows = [r for r, _ in results]
    rhs = np.array([b for _, b in results], dtype=float)
    elapsed = time.perf_counter() - t0
    meta = {"method": problem.method, "m": problem.degree, **q}
    return SparseSystem(rows, rhs, n, pts, elapsed, meta)


def assemble(problem, workers=None):
    """Assemble the global system; rows follow test-node order.

    Dirichlet boundary nodes give unit rows, Neumann boundary nodes a GMLS
    normal-derivative row and interior nodes the method's functional.
    ``method='mlpg5'`` is routed to :func:`assemble_mlpg5_reference`.
    """
    if problem.method == "mlpg5":
        return assemble_mlpg5_reference(problem, workers)
    _check_method(problem)
    return _assemble(problem, workers, lambda p, y, q, work: _dmlpg_row(p, y, q))


def assemble_mlpg5_reference(problem, workers=None):
    """Classical MLPG5: integrate MLS shape-function fluxes over each subdomain boundary.

    One MLS stencil and gradient evaluation per boundary quadrature point.
    """
    if problem.method != "mlpg5":
        raise ConfigurationError(f"reference assembly needs method 'mlpg5', got {problem.method!r}")
    return _assemble(problem, workers, _mlpg5_row)


def solve_linear(system, iterative=None, tol=1e-10):
    """Solve ``A u = b``; least squares when the system is overdetermined.

    Square systems use sparse LU (partial pivoting) up to ``DIRECT_LIMIT``
    unknowns unless ``iterative=True``; larger ones default to GMRES with a
    Jacobi preconditioner.
    """
    t0 = time.perf_counter()
    A = system.to_csr()
    b = np.asarray(system.rhs, dtype=float)
    m, n = A.shape
    if m < n:
        raise SolverError(f"underdetermined system: {m} rows for {n} unknowns")
    bnorm = float(np.linalg.norm(b)) or 1.0
    meta = {}
    if m == n:
        if iterative is None:
            iterative = n > DIRECT_LIMIT
        if iterative:
            u = _gmres(A, b, tol, meta)
        else:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", spla.MatrixRankWarning)
                    lu = spla.splu(A.tocsc())
                    u = lu.solve(b)
            except (RuntimeError, spla.MatrixRankWarning) as exc:
                raise SolverError(f"singular stiffness matrix ({exc}); consider oversampling") from exc
            meta["solver"] = "splu"
        residual = float(np.linalg.norm(A @ u - b))
        limit = (tol if iterative else 1e-9) * bnorm * (10 if iterative else 1)
        if not np.all(np.isfinite(u)) or residual > limit:
            raise SolverError(f"linear solve failed: residual {residual:.3g} exceeds {limit:.3g}; system may be near singular")
    else:
        if n <= 3000:
            u, _, rank, sv = np.linalg.lstsq(A.toarray(), b, rcond=None)
            meta.update(solver="lstsq", rank=int(rank), condition=float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf)
            if rank < n:
                raise SolverError(f"rank-deficient least-squares system: rank {rank} < {n}; consider oversampling")
        else:
            AtA = (A.T @ A).tocsc()
            try:
                u = spla.spsolve(AtA, A.T @ b)
            except RuntimeError as exc:
                raise SolverError(f"singular normal equations ({exc})") from exc
            meta["solver"] = "normal-equations"
        residual = float(np.linalg.norm(A @ u - b))
        if not np.all(np.isfinite(u)):
            raise SolverError("least-squares solve produced non-finite values")
    elapsed = time.perf_counter() - t0
    return Solution(u, system.meta.get("method", ""), residual, system.assembly_s, elapsed, meta)


def _gmres(A, b, tol, meta):
    diag = A.diagonal()
    if np.any(diag == 0):
        raise SolverError("zero diagonal entry; Jacobi preconditioner undefined")
    M = spla.LinearOperator(A.shape, matvec=lambda x: x / diag)
    n = A.shape[0]
    u, info = spla.gmres(A, b, M=M, rtol=tol, atol=0.0, restart=min(200, n), maxiter=10 * n)
    meta.update(solver="gmres", info=int(info))
    if info != 0:
        raise SolverError(f"GMRES did not converge (info={info})")
    return u


def solve(problem, workers=None, iterative=None):
    """Assemble and solve; timings are attached to the returned Solution."""
    system = assemble(problem, workers)
    sol = solve_linear(system, iterative=iterative)
    sol.method = problem.method
    return sol


def evaluate_solution(solution, nodes, x, basis, weight):
    """MLS reconstruction ``sum_j phi_j(x) u_j`` at a point."""
    values = solution.values if isinstance(solution, Solution) else np.asarray(solution)
    idx, phi = mls_shape_values(nodes, x, basis, weight)
    return float(phi @ values[idx])
