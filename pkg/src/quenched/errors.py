"""Exception types raised across the package."""


class QuenchedError(Exception):
    """Base class for all library errors."""


class WindowExhausted(QuenchedError):
    """A time index fell outside the finite noise window."""


class InversionFailed(QuenchedError):
    """Branch inversion did not converge within the iteration cap."""


class ExpansionLost(QuenchedError):
    """A realized map has min E' below the expansion floor."""


class AliasingRisk(QuenchedError):
    """The quadrature grid is too coarse for the requested assembly."""


class ResidualTooLarge(QuenchedError):
    """The invariant density did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BranchBudgetExceeded(QuenchedError):
    """Full tree enumeration was requested beyond the branch cap."""


class NotLinear(QuenchedError):
    """An operation that needs g = identity received a nonlinear map."""


class DegenerateSeries(QuenchedError):
    """Too many values of a correlation series sit at the numerical floor."""


class ConfigError(QuenchedError):
    """An experiment configuration failed validation."""
