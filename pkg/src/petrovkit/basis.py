"""Shifted and scaled monomial bases of P_m^d.

Basis functions are ``p_a(x) = ((x - z) / s) ** a`` for all multi-indices
``|a| <= m``. They are ordered by total degree and, within one degree,
lexicographically with the first exponent descending (graded lex), e.g. for
d=2, m=2: ``1, x, y, x^2, xy, y^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np


def dimension(m, d):
    """Number of monomials of total degree at most m in d variables."""
    if m < 0 or d < 1:
        raise ValueError(f"need m >= 0 and d >= 1, got m={m}, d={d}")
    return math.comb(m + d, d)


@lru_cache(maxsize=None)
def exponents(m, d):
    """Multi-indices of P_m^d in graded lexicographic order, shape (Q, d)."""
    out = []
    for deg in range(m + 1):
        out.extend(_compositions(deg, d))
    arr = np.array(out, dtype=int).reshape(-1, d)
    arr.setflags(write=False)
    return arr


def _compositions(total, parts):
    if parts == 1:
        return [(total,)]
    res = []
    for first in range(total, -1, -1):
        res.extend((first,) + rest for rest in _compositions(total - first, parts - 1))
    return res


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials of degree <= ``degree`` shifted by ``shift`` and scaled by ``scale``.

    ``shift=None`` means "not fixed yet": stencil builders substitute the
    evaluation point.
    """

    degree: int
    dim: int = 2
    scale: float = 1.0
    shift: tuple = None
    alphas: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.degree < 0 or self.dim < 1:
            raise ValueError(f"need degree >= 0 and dim >= 1, got {self.degree}, {self.dim}")
        if self.shift is not None:
            object.__setattr__(self, "shift", tuple(float(v) for v in self.shift))
        object.__setattr__(self, "alphas", exponents(self.degree, self.dim))

    @property
    def size(self):
        return len(self.alphas)

    def shifted(self, z):
        return replace(self, shift=tuple(np.asarray(z, dtype=float)))

    def index(self, alpha):
        """Position of a multi-index in the basis ordering."""
        hit = np.flatnonzero(np.all(self.alphas == np.asarray(alpha), axis=1))
        if not len(hit):
            raise KeyError(alpha)
        return int(hit[0])

    def _reduced(self, x):
        if not self.scale > 0:
            raise ValueError(f"basis scale must be positive, got {self.scale}")
        x = np.asarray(x, dtype=float)
        z = np.zeros(self.dim) if self.shift is None else np.asarray(self.shift)
        return (np.atleast_2d(x) - z) / self.scale

    def eval(self, x):
        """Basis values at points ``x``; shape (n, Q), or (Q,) for one point."""
        return self.eval_derivative((0,) * self.dim, x)

    def eval_derivative(self, beta, x):
        """Values of ``D^beta p_a`` at ``x``; terms with ``a < beta`` are 0."""
        single = np.ndim(x) == 1
        t = self._reduced(x)
        beta = np.asarray(beta, dtype=int)
        m = self.degree
        n = t.shape[0]
        powers = np.ones((self.dim, m + 1, n))
        for k in range(1, m + 1):
            powers[:, k] = powers[:, k - 1] * t.T
        out = np.ones((n, self.size))
        coef = np.ones(self.size)
        for i in range(self.dim):
            reduced = self.alphas[:, i] - beta[i]
            ok = reduced >= 0
            coef *= np.where(ok, _falling(self.alphas[:, i], beta[i]), 0.0)
            out *= powers[i][np.where(ok, reduced, 0)].T
        out *= coef * self.scale ** (-float(beta.sum()))
        return out[0] if single else out

    def laplacian(self, x):
        """Sum of the pure second derivatives of every basis function."""
        total = 0.0
        for i in range(self.dim):
            e = np.zeros(self.dim, dtype=int)
            e[i] = 2
            total = total + self.eval_derivative(e, x)
        return total

    def gradient(self, x):
        """Gradients of all basis functions, shape (n, Q, d) (or (Q, d))."""
        parts = []
        for i in range(self.dim):
            e = np.zeros(self.dim, dtype=int)
            e[i] = 1
            parts.append(self.eval_derivative(e, x))
        return np.stack(parts, axis=-1)


def _falling(a, k):
    """a! / (a-k)! elementwise (zero when a < k)."""
    out = np.ones(len(a))
    for j in range(k):
        out *= np.maximum(a - j, 0)
    return out
