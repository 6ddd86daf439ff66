"""Quadrature rules for intervals, rectangles, their boundaries, circles and disks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points, positive weights and (for boundary rules) outward unit normals."""

    points: np.ndarray
    weights: np.ndarray
    region: str
    params: dict = field(default_factory=dict)
    normals: np.ndarray = None

    def __len__(self):
        return len(self.weights)

    @property
    def measure(self):
        return float(self.weights.sum())

    def integrate(self, values):
        """Apply the rule to sampled values (first axis runs over points)."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def select(self, mask):
        mask = np.asarray(mask, dtype=bool)
        return QuadratureRule(
            self.points[mask],
            self.weights[mask],
            self.region,
            dict(self.params),
            None if self.normals is None else self.normals[mask],
        )


_GL_CACHE = {}


def _gauss_legendre_nodes(n):
    if n in _GL_CACHE:
        return _GL_CACHE[n]
    k = np.arange(1, n + 1)
    # Tricomi initial guess for the roots of P_n
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # symmetrise to remove last-digit asymmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    _GL_CACHE[n] = (x, w)
    return x, w


def gauss_legendre(n):
    """n-point Gauss-Legendre rule on [-1, 1], exact up to degree 2n-1."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 64:
        raise ValueError(f"Gauss-Legendre order must be an integer in [1, 64], got {n!r}")
    x, w = _gauss_legendre_nodes(int(n))
    return QuadratureRule(x[:, None].copy(), w.copy(), "interval", {"a": -1.0, "b": 1.0})


def _check_rect(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValueError(f"degenerate rectangle lo={lo} hi={hi}")
    return lo, hi


def tensor_rectangle(n, lo, hi):
    """Tensor Gauss rule on the box [lo, hi]; ``n`` is an int or one count per axis."""
    lo, hi = _check_rect(lo, hi)
    d = len(lo)
    counts = [n] * d if np.ndim(n) == 0 else list(n)
    xs, ws = [], []
    for i, k in enumerate(counts):
        r = gauss_legendre(int(k))
        half = 0.5 * (hi[i] - lo[i])
        xs.append(lo[i] + half * (r.points[:, 0] + 1.0))
        ws.append(half * r.weights)
    grid = np.meshgrid(*xs, indexing="ij")
    wgrid = np.meshgrid(*ws, indexing="ij")
    pts = np.stack([g.ravel() for g in grid], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return QuadratureRule(pts, w, "rectangle", {"lo": tuple(lo), "hi": tuple(hi)})


def square(n, center, side):
    c = np.asarray(center, dtype=float)
    return tensor_rectangle(n, c - 0.5 * side, c + 0.5 * side)


def rectangle_boundary(n, lo, hi):
    """Gauss rule with ``n`` points on each edge of a 2-D rectangle.

    Edges are emitted in facet order (left, right, bottom, top); every point
    carries the outward normal of its edge and ``params['edge']`` holds the
    edge id per point.
    """
    lo, hi = _check_rect(lo, hi)
    if len(lo) != 2:
        raise ValueError("rectangle_boundary is implemented for d = 2")
    g = gauss_legendre(int(n))
    t, w = g.points[:, 0], g.weights
    pts, wts, nrm, edge = [], [], [], []
    for axis in range(2):
        other = 1 - axis
        half = 0.5 * (hi[other] - lo[other])
        s = lo[other] + half * (t + 1.0)
        for side, value in ((0, lo[axis]), (1, hi[axis])):
            p = np.empty((len(t), 2))
            p[:, axis] = value
            p[:, other] = s
            nv = np.zeros(2)
            nv[axis] = 1.0 if side else -1.0
            pts.append(p)
            wts.append(half * w)
            nrm.append(np.tile(nv, (len(t), 1)))
            edge.append(np.full(len(t), 2 * axis + side))
    return QuadratureRule(
        np.concatenate(pts),
        np.concatenate(wts),
        "rectangle-boundary",
        {"lo": tuple(lo), "hi": tuple(hi), "edge": np.concatenate(edge)},
        np.concatenate(nrm),
    )


def square_boundary(n, center, side):
    c = np.asarray(center, dtype=float)
    return rectangle_boundary(n, c - 0.5 * side, c + 0.5 * side)


def circle_boundary(n, center, radius):
    """Equal-weight trapezoidal rule in angle on a circle, with radial normals.

    Exact for trigonometric polynomials of degree < n.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if n < 4:
        raise ValueError(f"circle rule needs at least 4 points, got {n}")
    theta = 2.0 * np.pi * np.arange(n) / n
    normals = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    pts = np.asarray(center, dtype=float) + radius * normals
    w = np.full(n, 2.0 * np.pi * radius / n)
    return QuadratureRule(pts, w, "circle", {"center": tuple(center), "radius": radius}, normals)


def disk(n_radial, n_angular, center, radius):
    """Polar tensor rule: Gauss-Legendre in r (with Jacobian r) times trapezoid in angle."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    g = gauss_legendre(int(n_radial))
    r = 0.5 * radius * (g.points[:, 0] + 1.0)
    wr = 0.5 * radius * g.weights * r
    theta = 2.0 * np.pi * np.arange(n_angular) / n_angular
    wt = 2.0 * np.pi / n_angular
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    pts = np.asarray(center, dtype=float) + np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
    w = np.repeat(wr * wt, n_angular)
    return QuadratureRule(pts, w, "disk", {"center": tuple(center), "radius": radius})


def exact_edge_points(m):
    """Gauss points per edge that integrate grad(p).n exactly for p of degree m."""
    return max(1, math.ceil(m / 2))


def product_weak1_points(m, n=2):
    """Per-axis count ceil(((m-1)(n-1)+1)/2) built from the product of degrees.

    Smaller than :func:`exact_weak1_points`; kept for comparison.
    """
    return max(1, math.ceil(((m - 1) * (n - 1) + 1) / 2))


def exact_weak1_points(m, n=2):
    """Per-axis Gauss count making grad(p).grad(v) exact for a degree-n tensor test function.

    The integrand has degree at most m - 1 + n along each axis.
    """
    return max(1, math.ceil((m + n) / 2))
