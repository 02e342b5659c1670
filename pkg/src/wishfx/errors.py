"""Exception hierarchy shared across the engine.

The CLI maps these onto exit codes: data/validation problems -> 3,
numeric failures (explosions, damping, non-convergence) -> 4.
"""


class WishfxError(Exception):
    """Base class for all engine errors."""


class DataError(WishfxError):
    """Invalid inputs: bad shapes, broken invariants, unreadable files."""


class InvalidParamsError(DataError):
    """Model parameters violate a hard constraint (Gindikin bound, PSD cone, ...)."""


class NumericError(WishfxError):
    """A numerical routine failed to produce a trustworthy result."""


class TransformExplosionError(NumericError):
    """Affine transform blew up (singular linearization block) before the horizon.

    ``tau_star`` is the first grid time at which the blow-up was detected.
    """

    def __init__(self, message: str, tau_star: float | None = None):
        super().__init__(message)
        self.tau_star = tau_star


class DampingError(NumericError):
    """Fourier damping parameter is outside the transform's domain of finiteness."""


class DegenerateInputError(DataError):
    """A correlation/ratio is undefined because a variance leg vanishes."""


class UnsupportedRegimeError(DataError):
    """Inputs are outside the stated validity region of an approximation."""
