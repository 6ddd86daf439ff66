"""Exception types raised by petrovkit."""


class PetrovkitError(Exception):
    """Base class for all library errors."""


class ConfigurationError(PetrovkitError, ValueError):
    """Invalid parameters or an inconsistent problem setup."""


class ContainmentError(ConfigurationError):
    """A local subdomain of an interior test node crosses the domain boundary."""


class UnisolvencyError(PetrovkitError):
    """The neighbourhood of a test point cannot determine a polynomial of degree m.

    Raised when fewer than Q nodes carry positive weight or when the Gram
    matrix is numerically singular.
    """

    def __init__(self, message, *, center=None, delta=None, n_local=None, q=None, node=None):
        self.center = center
        self.delta = delta
        self.n_local = n_local
        self.q = q
        self.node = node
        super().__init__(message)


class ZeroRowError(PetrovkitError):
    """A weak-form functional vanishes on the whole polynomial space.

    For interior nodes every local weak form of the Laplacian annihilates
    harmonic polynomials, so with m <= 1 the stiffness row would be zero.
    """


class SolverError(PetrovkitError):
    """The global linear system is singular, rank deficient, or did not converge."""
