"""Exception hierarchy shared by the analysis and simulation modules."""


class OQRWError(Exception):
    """Base class for every domain failure raised by this package."""


class StructuralError(OQRWError):
    """Operators of incompatible shape, or malformed inputs."""


class ValidationError(OQRWError):
    """A numerical invariant (normalization, unitarity, positivity) fails."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonUniqueInvariantState(OQRWError):
    """The channel has more than one invariant state."""

    def __init__(self, message, fixed_space_dim, diagnostics=None):
        super().__init__(message)
        self.fixed_space_dim = fixed_space_dim
        self.diagnostics = diagnostics


class NumericalDegeneracyError(OQRWError):
    """The extracted fixed point is not a positive operator."""


class PoissonSolveError(OQRWError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class NumericalConsistencyError(OQRWError):
    """A computed covariance matrix is not symmetric positive semidefinite."""


class NumericalIntegrityError(OQRWError):
    """Jump probabilities no longer sum to one."""


class ImpossibleStateError(OQRWError):
    """Every jump probability vanished."""


class BlockStructureError(OQRWError):
    def __init__(self, message, residual=None, block=None):
        super().__init__(message)
        self.residual = residual
        self.block = block
