"""The (1+1)-dimensional Dirac oscillator in the anti-Jaynes-Cummings form.

Natural units hbar = m = omega = 1, so the rest energy is 1/epsilon and the
coupling constant is eta = -i mc^2 sqrt(2 epsilon).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, TruncationError
from .hilbert import DOWN, UP, Operator, StateVector, ladder, pauli


@dataclass(frozen=True)
class DiracParams:
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigurationError(f"epsilon must be finite and positive, got {self.epsilon!r}")

    @property
    def mc2(self):
        return 1.0 / self.epsilon

    @property
    def eta(self):
        return -1j * self.mc2 * math.sqrt(2.0 * self.epsilon)

    @property
    def x_zpt(self):
        return 1.0 / math.sqrt(2.0)

    @property
    def p_zpt(self):
        return 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class DressedCoeffs:
    n: int
    A_n: float
    B_n: float


def _require_dirac(space):
    if not space.dirac_spin:
        raise ConfigurationError("the Dirac oscillator needs the Dirac spin factor")


def build_h_dirac(params, space, coupling=True):
    """eta sigma_- a + eta* sigma_+ a^dag + mc^2 sigma_z.

    ``coupling=False`` drops the eta terms, leaving the bare rest-energy split.
    """
    _require_dirac(space)
    a, ad = ladder(space, "oscillator")
    sm = pauli(space, "minus")
    splus = pauli(space, "plus")
    h = params.mc2 * pauli(space, "z")
    if coupling:
        eta = params.eta
        h = h + eta * (sm @ a) + np.conj(eta) * (splus @ ad)
    return Operator(space, h.matrix, hermitian=True)


def positive_energy(n, params):
    """Vectorized mc^2 sqrt(1 + 2 n eps) for real n (no domain checks)."""
    return params.mc2 * np.sqrt(1.0 + 2.0 * np.asarray(n, dtype=float) * params.epsilon)


def analytic_energy(n, branch, params):
    if int(n) != n or n < 0:
        raise DomainError(f"level index must be a non-negative integer, got {n!r}")
    if branch in ("+", "plus", 1):
        return float(positive_energy(n, params))
    if branch in ("-", "minus", "−", -1):
        return -float(positive_energy(n + 1, params))
    raise DomainError(f"unknown branch {branch!r}")


def dressed_coeffs(n, params):
    if int(n) != n or n < 1:
        raise DomainError(f"dressed coefficients need n >= 1, got {n!r}")
    e = analytic_energy(n, "+", params)
    mc2 = params.mc2
    # (E - mc^2)/2E rewritten as n mc^2 / E(E + mc^2): no cancellation at tiny eps
    b2 = n * mc2 / (e * (e + mc2))
    a2 = (e + mc2) / (2 * e)
    return DressedCoeffs(int(n), math.sqrt(a2), math.sqrt(b2))


def coefficient_arrays(n, params):
    """A_n and B_n for an integer array, with A_0 = 1 and B_0 = 0."""
    n = np.asarray(n, dtype=float)
    e = positive_energy(n, params)
    mc2 = params.mc2
    a = np.sqrt((e + mc2) / (2 * e))
    b = np.sqrt(n * mc2 / (e * (e + mc2)))
    return a, b


def dressed_state(n, branch, params, space):
    _require_dirac(space)
    if int(n) != n or n < 0:
        raise DomainError(f"level index must be a non-negative integer, got {n!r}")
    n = int(n)
    if n + 1 >= space.osc_dim:
        raise TruncationError(f"dressed state n={n} needs osc_dim > {n + 1}", suggested_cutoff=n + 2)
    v = np.zeros(space.dim, dtype=complex)
    if branch in ("+", "plus", 1):
        if n == 0:
            v[space.index(0, UP)] = 1.0
        else:
            c = dressed_coeffs(n, params)
            v[space.index(n, UP)] = c.A_n
            v[space.index(n - 1, DOWN)] = -1j * c.B_n
    elif branch in ("-", "minus", "−", -1):
        c = dressed_coeffs(n + 1, params)
        v[space.index(n + 1, UP)] = c.B_n
        v[space.index(n, DOWN)] = 1j * c.A_n
    else:
        raise DomainError(f"unknown branch {branch!r}")
    return StateVector(space, v, normalize=True)
