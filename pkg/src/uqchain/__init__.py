"""U_q(sl_2)-invariant open spin chains, their spectra and metric operators."""

from .errors import (
    BadBlock,
    ConvergenceError,
    DegenerateSpectrum,
    DomainError,
    FitError,
    IllConditioned,
    NotDiagonalizable,
    NotQuasiHermitian,
    SingularGamma,
    UnknownIdentity,
)
from .qalgebra import DeformationParams, SpinRep, parse_spin, format_spin, spin_rep
from .chain import ChainOperator, ChainSpec, GeneralCoupling, SingleSCoupling, hamiltonian

__version__ = "0.1.0"

__all__ = [
    "BadBlock",
    "ConvergenceError",
    "DegenerateSpectrum",
    "DomainError",
    "FitError",
    "IllConditioned",
    "NotDiagonalizable",
    "NotQuasiHermitian",
    "SingularGamma",
    "UnknownIdentity",
    "DeformationParams",
    "SpinRep",
    "parse_spin",
    "format_spin",
    "spin_rep",
    "ChainOperator",
    "ChainSpec",
    "GeneralCoupling",
    "SingleSCoupling",
    "hamiltonian",
]
