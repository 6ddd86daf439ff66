"""Generalized moving least squares: weights, stencils and recovery coefficients.

For a functional ``lam`` the recovery coefficients are

    a*(lam) = W P^T (P W P^T)^{-1} lam(p)

with ``P[k, j] = p_k(x_j)`` (Q x N_loc) and ``W = diag(w_j)``. They are the
minimum ``sum a_j^2 / w_j`` solution of the exactness constraints
``P a = lam(p)``. The Gram matrix ``P W P^T`` is never formed explicitly:
a thin QR factorisation ``sqrt(W) P^T = Q R`` gives its Cholesky factor
``R`` and ``a* = sqrt(W) Q R^{-T} lam(p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .basis import MonomialBasis
from .errors import ConfigurationError, UnisolvencyError
from .geometry import radius_query

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class WeightFunction:
    """Truncated Gaussian ``(exp(-(r/c)^2) - exp(-(delta/c)^2)) / (1 - exp(-(delta/c)^2))``."""

    c: float
    delta: float
    kind: str = "truncated-gaussian"

    def __post_init__(self):
        if not (self.c > 0 and self.delta > 0):
            raise ConfigurationError(f"weight needs c > 0 and delta > 0, got c={self.c}, delta={self.delta}")
        if self.kind != "truncated-gaussian":
            raise ConfigurationError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def from_mesh(cls, h, c0, delta0):
        return cls(c0 * h, delta0 * h)

    @property
    def _tail(self):
        return math.exp(-((self.delta / self.c) ** 2))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("weight argument must be non-negative")
        tail = self._tail
        val = (np.exp(-((r / self.c) ** 2)) - tail) / (1.0 - tail)
        return np.where(r < self.delta, np.maximum(val, 0.0), 0.0)

    def gradient(self, x, centers):
        """Gradient of ``w(|x - x_j|)`` with respect to x, one row per centre."""
        diff = np.asarray(x, dtype=float) - np.atleast_2d(centers)
        r2 = np.einsum("ij,ij->i", diff, diff)
        scale = -2.0 / (self.c**2) * np.exp(-r2 / self.c**2) / (1.0 - self._tail)
        scale = np.where(r2 < self.delta**2, scale, 0.0)
        return scale[:, None] * diff


def weight_eval(weight, r):
    return float(weight(r)) if np.ndim(r) == 0 else weight(r)


@dataclass(frozen=True, eq=False)
class Stencil:
    """Local GMLS system around ``center``.

    ``P`` has shape (Q, N_loc) and only nodes with positive weight are kept.
    """

    center: np.ndarray
    indices: np.ndarray
    basis: MonomialBasis
    P: np.ndarray
    weights: np.ndarray
    q_factor: np.ndarray
    r_factor: np.ndarray
    condition: float

    @property
    def n_local(self):
        return len(self.indices)

    @property
    def gram(self):
        return (self.P * self.weights) @ self.P.T

    def gram_solve(self, rhs):
        """Solve ``(P W P^T) g = rhs`` using the stored Cholesky factor."""
        tmp = solve_triangular(self.r_factor, rhs, trans="T", check_finite=False)
        return solve_triangular(self.r_factor, tmp, check_finite=False)


@dataclass(frozen=True, eq=False)
class CoefficientRow:
    """Sparse recovery row: ``lam(u) ~ sum(values * u[indices])``."""

    indices: np.ndarray
    values: np.ndarray
    functional: object = None

    def apply(self, u):
        return float(np.dot(self.values, np.asarray(u)[self.indices]))

    def to_dense(self, n):
        out = np.zeros(n)
        out[self.indices] = self.values
        return out


def build_stencil(nodes, y, basis, weight, radius=None, condition_limit=CONDITION_LIMIT):
    """Collect ``B(y, delta) & X`` and factorise the weighted Gram matrix.

    ``radius`` only widens the neighbour search; nodes outside the weight
    support get zero weight and are dropped. If ``basis.shift`` is unset the
    basis is shifted to ``y``.

    Raises UnisolvencyError if fewer than Q nodes have positive weight or the
    Gram matrix condition estimate exceeds ``condition_limit``.
    """
    y = np.asarray(y, dtype=float)
    if basis.shift is None:
        basis = basis.shifted(y)
    delta = weight.delta if radius is None else max(radius, weight.delta)
    idx = radius_query(nodes, y, delta)
    pts = nodes.points[idx]
    diff = pts - y
    w = weight(np.sqrt(np.einsum("ij,ij->i", diff, diff)))
    keep = w > 0
    idx, pts, w = idx[keep], pts[keep], w[keep]
    q = basis.size
    if len(idx) < q:
        raise UnisolvencyError(
            f"only {len(idx)} nodes in B(y, delta) for y={tuple(np.round(y, 12))}, "
            f"delta={weight.delta:g}, but Q={q} are needed",
            center=y, delta=weight.delta, n_local=len(idx), q=q,
        )
    P = basis.eval(pts).T
    sw = np.sqrt(w)
    qf, rf = np.linalg.qr(sw[:, None] * P.T)
    sv = np.linalg.svd(rf, compute_uv=False)
    cond = math.inf if sv[-1] == 0 else float((sv[0] / sv[-1]) ** 2)
    if not cond <= condition_limit:
        raise UnisolvencyError(
            f"Gram matrix condition {cond:.3g} exceeds {condition_limit:g} at y={tuple(np.round(y, 12))} "
            f"(delta={weight.delta:g}, N_loc={len(idx)}, Q={q}); neighbourhood is not unisolvent",
            center=y, delta=weight.delta, n_local=len(idx), q=q,
        )
    return Stencil(y, idx, basis, P, w, qf, rf, cond)


def solve_coefficients(stencil, lambda_on_basis, functional=None):
    """GMLS coefficients for one functional given its values on the basis."""
    lam = np.asarray(lambda_on_basis, dtype=float)
    if lam.shape[0] != stencil.basis.size:
        raise ValueError(f"expected {stencil.basis.size} basis values, got {lam.shape[0]}")
    tmp = solve_triangular(stencil.r_factor, lam, trans="T", check_finite=False)
    a = np.sqrt(stencil.weights) * (stencil.q_factor @ tmp)
    return CoefficientRow(stencil.indices, a, functional)


def gmls_derivative_row(nodes, y, alpha, basis, weight):
    """Direct GMLS recovery row for ``D^alpha u(y)``."""
    if sum(alpha) > basis.degree:
        raise ValueError(f"|alpha|={sum(alpha)} exceeds the basis degree {basis.degree}")
    st = build_stencil(nodes, y, basis, weight)
    return solve_coefficients(st, st.basis.eval_derivative(alpha, y), ("derivative", tuple(alpha)))


def mls_shape_values(nodes, x, basis, weight, stencil=None):
    """Classical MLS shape functions at x: ``(indices, phi)``."""
    st = stencil or build_stencil(nodes, x, basis.shifted(x), weight)
    row = solve_coefficients(st, st.basis.eval(np.asarray(x, dtype=float)))
    return row.indices, row.values


def mls_shape_gradients(nodes, x, basis, weight, stencil=None):
    """Gradients of the MLS shape functions at x: ``(indices, grads)`` with grads (N_loc, d).

    Differentiates ``phi(x) = p(x)^T A(x)^{-1} P W(x)`` including the
    derivative of the moving weights.
    """
    x = np.asarray(x, dtype=float)
    st = stencil or build_stencil(nodes, x, basis.shifted(x), weight)
    P, w = st.P, st.weights
    p = st.basis.eval(x)
    dp = st.basis.gradient(x)  # (Q, d)
    gamma = st.gram_solve(p)
    t = gamma @ P  # phi = t * w
    dw = weight.gradient(x, nodes.points[st.indices])  # (N_loc, d)
    rhs = dp - P @ (dw * t[:, None])
    G = st.gram_solve(rhs)  # (Q, d)
    grads = (P.T @ G) * w[:, None] + t[:, None] * dw
    return st.indices, grads
