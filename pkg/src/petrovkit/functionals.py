"""Test functionals of the Poisson problem evaluated on a polynomial basis.

A functional is described by one of the descriptor classes below. GMLS only ever
needs its values on the basis (:func:`lambda_on_basis`) and the matching data
value (:func:`rhs_value`):

* ``PointValue``   -- ``u(y)``, used for Dirichlet collocation;
* ``Derivative``   -- a constant-coefficient differential operator at ``y``
  (Laplacian for strong-form collocation, normal derivative for Neumann);
* ``Weak5``        -- ``int_{dS \\ Gamma_N} grad(u).n`` over a local subdomain
  (test function 1);
* ``Weak1``        -- ``-int_S grad(u).grad(v)`` with a test function ``v``
  vanishing on the subdomain boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature as quad
from .errors import ConfigurationError, ContainmentError, ZeroRowError
from .geometry import NEUMANN
from .gmls import WeightFunction

BALL = "ball"
SQUARE = "square"
ZERO_ROW_RTOL = 1e-12


@dataclass(frozen=True)
class Subdomain:
    """Ball of radius ``size`` or square of side ``size`` centred at ``center``."""

    shape: str
    size: float
    center: tuple

    def __post_init__(self):
        if self.shape not in (BALL, SQUARE):
            raise ConfigurationError(f"unknown subdomain shape {self.shape!r}")
        if not self.size > 0:
            raise ConfigurationError(f"subdomain size must be positive, got {self.size}")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    @property
    def reach(self):
        """Largest distance from the centre to the subdomain along an axis."""
        return self.size if self.shape == BALL else 0.5 * self.size

    @property
    def measure(self):
        return np.pi * self.size**2 if self.shape == BALL else self.size**2

    def check_inside(self, domain, node=None):
        dist = domain.distance_to_boundary(self.center)
        if self.reach > dist * (1 + 1e-12):
            where = f" (node {node})" if node is not None else ""
            raise ContainmentError(
                f"{self.shape} subdomain of size {self.size:g} around {self.center}{where} leaves the domain; "
                f"distance to boundary is {dist:g}, reduce sigma0"
            )

    def boundary_rule(self, n):
        if self.shape == BALL:
            return quad.circle_boundary(n, self.center, self.size)
        return quad.square_boundary(n, self.center, self.size)

    def interior_rule(self, n, n_angular=None):
        if self.shape == BALL:
            return quad.disk(n, n_angular or n, self.center, self.size)
        return quad.square(n, self.center, self.size)


@dataclass(frozen=True)
class TestFunction:
    """Local test function vanishing on the subdomain boundary.

    ``quartic`` is the product ``prod_i (1 - 4 (x_i - c_i)^2 / sigma^2)`` on a
    square of side sigma; ``weight`` is the truncated Gaussian profile with
    support radius sigma and shape ``c`` (default sigma / 2) on a ball.
    """

    __test__ = False  # not a pytest class

    kind: str
    support: float
    c: float = None

    def __post_init__(self):
        if self.kind not in ("quartic", "weight"):
            raise ConfigurationError(f"unknown test function kind {self.kind!r}")
        if not self.support > 0:
            raise ConfigurationError("test function support must be positive")

    @property
    def degree(self):
        return 2 if self.kind == "quartic" else None

    def __call__(self, x, center):
        return test_function_eval(self, x, center)


def test_function_eval(v, x, center):
    """Value and gradient of a test function at points x (zero outside the support)."""
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    diff = x - np.asarray(center, dtype=float)
    sigma = v.support
    if v.kind == "quartic":
        factors = 1.0 - 4.0 * diff**2 / sigma**2
        inside = np.all(np.abs(diff) <= 0.5 * sigma, axis=1)
        val = np.prod(factors, axis=1)
        grad = np.empty_like(diff)
        for i in range(diff.shape[1]):
            others = np.prod(np.delete(factors, i, axis=1), axis=1)
            grad[:, i] = -8.0 * diff[:, i] / sigma**2 * others
        val = np.where(inside, val, 0.0)
        grad = np.where(inside[:, None], grad, 0.0)
    else:
        w = WeightFunction(v.c or 0.5 * sigma, sigma)
        r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        val = w(r)
        grad = w.gradient(np.zeros(diff.shape[1]), -diff)
    if single:
        return float(val[0]), grad[0]
    return val, grad


@dataclass(frozen=True, eq=False)
class PointValue:
    y: np.ndarray


@dataclass(frozen=True, eq=False)
class Derivative:
    """``sum_t coef_t D^{alpha_t} u(y)``."""

    y: np.ndarray
    terms: tuple

    @classmethod
    def partial(cls, y, alpha):
        return cls(np.asarray(y, dtype=float), ((1.0, tuple(alpha)),))

    @classmethod
    def laplacian(cls, y):
        y = np.asarray(y, dtype=float)
        d = len(y)
        return cls(y, tuple((1.0, tuple(2 * int(i == k) for i in range(d))) for k in range(d)))

    @classmethod
    def normal(cls, y, n):
        y = np.asarray(y, dtype=float)
        d = len(y)
        return cls(y, tuple((float(n[k]), tuple(int(i == k) for i in range(d))) for k in range(d) if n[k] != 0))


@dataclass(frozen=True, eq=False)
class Weak5:
    """Flux of grad(u) through the subdomain boundary minus its Neumann part."""

    y: np.ndarray
    subdomain: Subdomain
    boundary_rule: quad.QuadratureRule = None
    neumann_rule: quad.QuadratureRule = None


@dataclass(frozen=True, eq=False)
class Weak1:
    """``-int_S grad(u).grad(v)`` for a test function vanishing on dS."""

    y: np.ndarray
    subdomain: Subdomain
    test_function: TestFunction
    interior_rule: quad.QuadratureRule = None


def make_weak5(y, subdomain, n_boundary, domain=None):
    """Weak5 functional with its boundary rule split at Neumann facets.

    Square edges lying on a Neumann facet of ``domain`` move into
    ``neumann_rule``; balls touch the boundary in at most a point.
    """
    rule = subdomain.boundary_rule(n_boundary)
    neumann = None
    if domain is not None and subdomain.shape == SQUARE:
        on_neumann = np.zeros(len(rule), dtype=bool)
        for facet in range(domain.n_facets):
            if domain.facet_kind(facet) != NEUMANN:
                continue
            axis = facet // 2
            target = domain.hi[axis] if facet % 2 else domain.lo[axis]
            normal = domain.facet_normal(facet)
            tol = 1e-12 * domain.sides[axis]
            on_neumann |= (np.abs(rule.points[:, axis] - target) <= tol) & np.all(np.isclose(rule.normals, normal), axis=1)
        if on_neumann.any():
            neumann = rule.select(on_neumann)
            rule = rule.select(~on_neumann)
    return Weak5(np.asarray(y, dtype=float), subdomain, rule, neumann)


def make_weak1(y, subdomain, n_interior, test_function=None, n_angular=None):
    if test_function is None:
        kind = "quartic" if subdomain.shape == SQUARE else "weight"
        test_function = TestFunction(kind, subdomain.size)
    rule = subdomain.interior_rule(n_interior, n_angular)
    return Weak1(np.asarray(y, dtype=float), subdomain, test_function, rule)


test_function_eval.__test__ = False


def lambda_on_basis(spec, basis):
    """Values of the functional on every basis function, shape (Q,).

    Raises ZeroRowError when a weak functional vanishes on the whole basis.
    """
    if isinstance(spec, PointValue):
        return basis.eval(spec.y)
    if isinstance(spec, Derivative):
        out = np.zeros(basis.size)
        for coef, alpha in spec.terms:
            if sum(alpha) <= basis.degree:
                out += coef * basis.eval_derivative(alpha, spec.y)
        return out
    if isinstance(spec, Weak5):
        if spec.boundary_rule is None:
            raise ConfigurationError("Weak5 functional has no boundary quadrature rule")
        rule = spec.boundary_rule
        grads = basis.gradient(rule.points)  # (n, Q, d)
        flux = np.einsum("nqd,nd->nq", grads, rule.normals)
        values = rule.weights @ flux
        _check_zero_row(values, np.abs(rule.weights) @ np.abs(flux), basis)
        return values
    if isinstance(spec, Weak1):
        if spec.interior_rule is None:
            raise ConfigurationError("Weak1 functional has no interior quadrature rule")
        rule = spec.interior_rule
        _, gv = test_function_eval(spec.test_function, rule.points, spec.subdomain.center)
        grads = basis.gradient(rule.points)
        integrand = -np.einsum("nqd,nd->nq", grads, gv)
        values = rule.weights @ integrand
        _check_zero_row(values, np.abs(rule.weights) @ np.abs(integrand), basis)
        return values
    raise TypeError(f"unsupported functional {type(spec).__name__}")


def _check_zero_row(values, magnitude, basis):
    ref = float(np.max(magnitude)) if len(magnitude) else 0.0
    if np.max(np.abs(values)) <= ZERO_ROW_RTOL * ref:
        raise ZeroRowError(
            f"local weak form vanishes on every polynomial of degree <= {basis.degree}: "
            "the Laplacian annihilates linear (harmonic) functions, so weak-form methods "
            "necessarily fail for m <= 1 and would produce a zero stiffness row; use m >= 2"
        )


def rhs_value(spec, f=None, u_neumann=None, rhs_rule=None, u_dirichlet=None):
    """Data value matching a functional.

    ``f`` and ``u_dirichlet`` map points (n, d) to values (n,); ``u_neumann``
    maps (points, normals) to values.
    """
    if isinstance(spec, PointValue):
        return float(u_dirichlet(spec.y[None, :])[0])
    if isinstance(spec, Derivative):
        return float(f(spec.y[None, :])[0])
    if rhs_rule is None:
        raise ConfigurationError("weak functional needs a right-hand-side quadrature rule")
    if isinstance(spec, Weak5):
        total = float(rhs_rule.integrate(f(rhs_rule.points)))
        if spec.neumann_rule is not None and len(spec.neumann_rule):
            nr = spec.neumann_rule
            total -= float(nr.integrate(u_neumann(nr.points, nr.normals)))
        return total
    if isinstance(spec, Weak1):
        v, _ = test_function_eval(spec.test_function, rhs_rule.points, spec.subdomain.center)
        return float(rhs_rule.integrate(f(rhs_rule.points) * v))
    raise TypeError(f"unsupported functional {type(spec).__name__}")
