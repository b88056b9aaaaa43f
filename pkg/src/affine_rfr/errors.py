"""Exception taxonomy shared across the library.

Every failure mode that callers are expected to branch on gets its own
class; the CLI maps them onto stable exit codes.
"""


class RfrError(Exception):
    """Base class for all library-specific errors."""


class NonAdmissible(RfrError, ValueError):
    """Model parameters violate an admissibility constraint."""


class DomainViolation(RfrError):
    """A transform argument left the effective domain before the horizon.

    ``assumption`` carries a human-readable name of the violated
    condition, e.g. ``"(0,-1) in Y_T"``.
    """

    def __init__(self, message: str, assumption: str | None = None,
                 t_est: float | None = None):
        super().__init__(message)
        self.assumption = assumption
        self.t_est = t_est


class FitFailure(RfrError):
    """Curve bootstrap could not match the input discounts."""


class PoleAtW(RfrError, ValueError):
    """Damping parameter hit a kernel pole (w = 0 or w = 1)."""


class DampingOutOfStrip(RfrError):
    """Requested damping parameter lies outside the certified strip."""


class NoStrip(RfrError):
    """No valid damping parameter exists even arbitrarily close to 0/1."""

    def __init__(self, message: str, assumption: str | None = None):
        super().__init__(message)
        self.assumption = assumption


class QuadratureFailure(RfrError):
    """Oscillatory integral did not converge within the truncation cap."""


class InversionFailure(QuadratureFailure):
    """Gil-Pelaez tail-probability integral failed to converge."""


class MissingAccrualFactor(RfrError, ValueError):
    """In-accrual valuation requires the realized accrual factor."""


class NotGaussianModel(RfrError, ValueError):
    """Closed-form Gaussian pricing requested for a non-Gaussian model."""


class GridMismatch(RfrError, ValueError):
    """Requested observation time is too far from the simulation grid."""
