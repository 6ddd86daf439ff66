"""Rectangular domains, regular node sets and neighbour queries.

Facets of a d-dimensional box are numbered ``2*i`` (the face ``x_i = lo_i``)
and ``2*i + 1`` (the face ``x_i = hi_i``), so on the unit square facet 0 is
the left edge, 1 the right, 2 the bottom and 3 the top.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
INTERIOR = -1


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box ``[lo, hi]`` with a boundary condition kind per facet."""

    lo: tuple
    hi: tuple
    kinds: tuple = None

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ConfigurationError("lo and hi must have the same positive length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigurationError(f"degenerate rectangle: lo={lo} hi={hi}")
        kinds = self.kinds
        if kinds is None:
            kinds = (DIRICHLET,) * (2 * len(lo))
        kinds = tuple(str(k).lower() for k in kinds)
        if len(kinds) != 2 * len(lo):
            raise ConfigurationError(f"need {2 * len(lo)} facet kinds, got {len(kinds)}")
        for k in kinds:
            if k not in (DIRICHLET, NEUMANN):
                raise ConfigurationError(f"unknown boundary kind {k!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "kinds", kinds)

    @classmethod
    def unit(cls, d=2, kinds=None):
        return cls((0.0,) * d, (1.0,) * d, kinds)

    @property
    def dim(self):
        return len(self.lo)

    @property
    def sides(self):
        return np.subtract(self.hi, self.lo)

    @property
    def diameter(self):
        return float(np.linalg.norm(self.sides))

    @property
    def n_facets(self):
        return 2 * self.dim

    def facet_normal(self, facet):
        """Outward unit normal of a facet."""
        n = np.zeros(self.dim)
        n[facet // 2] = 1.0 if facet % 2 else -1.0
        return n

    def facet_kind(self, facet):
        return self.kinds[facet]

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.subtract(self.lo, tol)) and np.all(x <= np.add(self.hi, tol)))

    def distance_to_boundary(self, x):
        """Distance from an inside point to the nearest facet."""
        x = np.asarray(x, dtype=float)
        return float(min(np.min(x - self.lo), np.min(np.subtract(self.hi, x))))

    def facets_of(self, x, rtol=1e-12):
        """Ids of all facets the point lies on (ascending)."""
        x = np.asarray(x, dtype=float)
        tol = rtol * self.sides
        out = []
        for i in range(self.dim):
            if abs(x[i] - self.lo[i]) <= tol[i]:
                out.append(2 * i)
            if abs(x[i] - self.hi[i]) <= tol[i]:
                out.append(2 * i + 1)
        return out


class _BucketGrid:
    """Uniform bucket index with row-major cell order.

    Points are sorted by cell so that a run of cells along the last axis is a
    contiguous slice of ``order``; a box query touches one slice per
    combination of the leading-axis cells.
    """

    def __init__(self, points, lo, hi, cell):
        self.points = points
        self.lo = np.asarray(lo, dtype=float)
        self.cell = float(cell)
        extent = np.asarray(hi, dtype=float) - self.lo
        self.shape = np.maximum(1, np.ceil(extent / self.cell - 1e-9).astype(int))
        idx = self._cells(points)
        flat = np.ravel_multi_index(tuple(idx.T), self.shape) if len(points) else np.zeros(0, int)
        self.order = np.argsort(flat, kind="stable")
        self.starts = np.searchsorted(flat[self.order], np.arange(int(np.prod(self.shape)) + 1))
        self.strides = np.array([int(np.prod(self.shape[i + 1:])) for i in range(len(self.shape))])

    def _cells(self, x):
        c = np.floor((np.atleast_2d(x) - self.lo) / self.cell).astype(int)
        return np.clip(c, 0, self.shape - 1)

    def query(self, center, radius):
        center = np.asarray(center, dtype=float)
        lo_c = self._cells(center - radius)[0]
        hi_c = self._cells(center + radius)[0]
        lead = [range(lo_c[i], hi_c[i] + 1) for i in range(len(self.shape) - 1)]
        chunks = []
        for combo in itertools.product(*lead):
            base = int(np.dot(combo, self.strides[:-1])) if combo else 0
            a = self.starts[base + lo_c[-1]]
            b = self.starts[base + hi_c[-1] + 1]
            if b > a:
                chunks.append(self.order[a:b])
        if not chunks:
            return np.zeros(0, dtype=int)
        cand = np.concatenate(chunks)
        diff = self.points[cand] - center
        d2 = np.einsum("ij,ij->i", diff, diff)
        hit = cand[d2 <= radius * radius]
        hit.sort()
        return hit


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Trial nodes with boundary tags and a bucket index.

    ``tags[j]`` is ``INTERIOR`` (-1) or the facet id of a boundary node.
    ``spacing`` is the bucket size and the scale of the shifted basis.
    """

    points: np.ndarray
    tags: np.ndarray
    spacing: float
    domain: Rectangle
    _index: _BucketGrid = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        tags = np.array(self.tags, dtype=int, copy=True)
        if len(tags) != len(pts):
            raise ConfigurationError("one tag per node is required")
        if pts.shape[1] != self.domain.dim:
            raise ConfigurationError("node dimension does not match the domain")
        if not self.spacing > 0:
            raise ConfigurationError("spacing hint must be positive")
        tol = 1e-12 * self.domain.sides
        if len(pts) and (np.any(pts < np.subtract(self.domain.lo, tol)) or np.any(pts > np.add(self.domain.hi, tol))):
            raise ConfigurationError("node outside the closed domain")
        pts.setflags(write=False)
        tags.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "_index", _BucketGrid(pts, self.domain.lo, self.domain.hi, self.spacing))

    @classmethod
    def from_points(cls, points, domain, spacing=None, rtol=1e-12):
        """Tag arbitrary points by the lowest facet they touch."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if spacing is None:
            vol = float(np.prod(domain.sides))
            spacing = (vol / max(len(pts), 1)) ** (1.0 / domain.dim)
        tags = [min(domain.facets_of(p, rtol), default=INTERIOR) for p in pts]
        return cls(pts, np.array(tags, dtype=int), spacing, domain)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def boundary_mask(self):
        return self.tags != INTERIOR

    @property
    def interior_indices(self):
        return np.flatnonzero(self.tags == INTERIOR)

    def radius_query(self, center, radius):
        return radius_query(self, center, radius)

    def to_text(self):
        lines = []
        for p, t in zip(self.points, self.tags):
            coords = " ".join(repr(float(c)) for c in p)
            lines.append(f"{coords} {'interior' if t == INTERIOR else f'facet{t}'}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, domain, spacing):
        pts, tags = [], []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            tag = parts[-1]
            pts.append([float(v) for v in parts[:-1]])
            if tag == "interior":
                tags.append(INTERIOR)
            elif tag.startswith("facet"):
                tags.append(int(tag[5:]))
            else:
                raise ConfigurationError(f"bad node tag {tag!r}")
        return cls(np.array(pts), np.array(tags, dtype=int), spacing, domain)


def generate_grid(domain, h):
    """Tensor grid of spacing ``h`` including boundary nodes.

    Raises ConfigurationError if ``h`` does not divide a side length.
    """
    if not h > 0:
        raise ConfigurationError(f"grid spacing must be positive, got h={h}")
    axes = []
    for i, side in enumerate(domain.sides):
        k = round(side / h)
        if k < 1 or abs(k * h - side) > 1e-12 * side:
            raise ConfigurationError(f"h={h} does not divide side {i} of length {side}")
        axes.append(np.linspace(domain.lo[i], domain.hi[i], k + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    tags = np.full(len(pts), INTERIOR, dtype=int)
    # visit facets high to low so the lowest id wins at corners
    for facet in reversed(range(domain.n_facets)):
        i = facet // 2
        target = domain.hi[i] if facet % 2 else domain.lo[i]
        on = np.abs(pts[:, i] - target) <= 1e-12 * domain.sides[i]
        pts[on, i] = target
        tags[on] = facet
    return NodeSet(pts, tags, float(h), domain)


def radius_query(nodes, center, radius):
    """Indices of nodes with ``|x_j - center| <= radius``, ascending."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return nodes._index.query(center, float(radius))


def separation_distance(nodes):
    """Half of the smallest pairwise node distance."""
    if len(nodes) < 2:
        raise ValueError("separation distance needs at least two nodes")
    dist, _ = cKDTree(nodes.points).query(nodes.points, k=2)
    return 0.5 * float(dist[:, 1].min())


def fill_distance(nodes, domain=None, density=8):
    """Largest distance from a probe point of the domain to its nearest node.

    Probes form a regular grid with ``density`` samples per spacing cell per
    dimension, boundary included. The result is a lower bound for the
    supremum that tightens as nested probe grids are refined.
    """
    if len(nodes) == 0:
        raise ValueError("fill distance of an empty node set")
    if density < 4:
        raise ValueError("probe density must be at least 4")
    domain = domain or nodes.domain
    axes = []
    for i, side in enumerate(domain.sides):
        k = max(1, math.ceil(side / nodes.spacing * density - 1e-9))
        axes.append(np.linspace(domain.lo[i], domain.hi[i], k + 1))
    probes = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    dist, _ = cKDTree(nodes.points).query(probes, k=1)
    return float(dist.max())
