"""Exception hierarchy shared by all modules."""


class RabiError(Exception):
    """Base class for every error raised by tprabi."""


class InvalidArgument(RabiError, ValueError):
    pass


class NumericFailure(RabiError, ArithmeticError):
    """An eigensolver, integrator or root search did not deliver."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SectorViolation(RabiError, ValueError):
    """A Fock vector does not live in a single symmetry sector."""


class OutOfWindow(RabiError, ValueError):
    """Shifted energy outside the range where an operation is defined."""


class SingularityError(RabiError, ValueError):
    pass


class ExtendDomainError(RabiError, ValueError):
    """Wavefunction has not decayed at the grid edge; use a larger x_max."""


class BracketFailure(NumericFailure):
    pass


class ConventionError(RabiError, ValueError):
    """Identity requested outside the unit convention it holds in."""


class InternalError(RabiError, RuntimeError):
    """A result that theory rules out, e.g. no bound state for omega0 > 0."""
