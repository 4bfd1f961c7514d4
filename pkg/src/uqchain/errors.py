"""Exception types raised across the package."""


class DomainError(ValueError):
    """Parameters outside the admissible range (e.g. 2S|gamma| >= pi)."""


class SingularGamma(ArithmeticError):
    """A q-number denominator vanishes at this gamma; the point is excluded."""


class NotDiagonalizable(ArithmeticError):
    pass


class NotQuasiHermitian(ArithmeticError):
    """Spectrum is not real, so no positive definite metric exists."""


class IllConditioned(ArithmeticError):
    """Eigenvector basis is numerically incomplete."""


class BadBlock(ValueError):
    pass


class DegenerateSpectrum(ValueError):
    pass


class FitError(ArithmeticError):
    pass


class ConvergenceError(ArithmeticError):
    pass


class UnknownIdentity(KeyError):
    pass
