"""Dirac oscillator quantum nondemolition toolkit.

Modules: ``hilbert`` (truncated Fock/spin spaces and operators),
``dirac_model`` (the oscillator Hamiltonian and its eigenstates), ``fw``
(the diagonalising unitary and the frequency operator), ``qnd`` (conserved
quadratures per regime), ``measurement`` (probe couplings and propagation),
``scenarios`` (named experiments) and ``cli``.
"""

__version__ = "0.1.0"

from .dirac_model import DiracParams, build_h_dirac
from .errors import (
    AccuracyError,
    ConfigurationError,
    ContractError,
    DiracQndError,
    DimensionError,
    DomainError,
    TruncationError,
)
from .hilbert import Operator, SpaceDescriptor, StateVector, make_space

__all__ = [
    "__version__", "DiracParams", "build_h_dirac", "Operator", "SpaceDescriptor", "StateVector",
    "make_space", "AccuracyError", "ConfigurationError", "ContractError", "DiracQndError",
    "DimensionError", "DomainError", "TruncationError",
]
