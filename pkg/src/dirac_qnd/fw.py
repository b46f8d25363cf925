"""Foldy-Wouthuysen unitary, the diagonal FW Hamiltonian and the frequency operator.

Functions of the number operator are evaluated eigenvalue-wise on the
diagonal.  The quotient B_n / sqrt(n) is assigned 0 at n = 0; it only ever
multiplies states that the adjacent ladder operator annihilates, so the
value there is immaterial for every product built here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirac_model import DiracParams, build_h_dirac, coefficient_arrays, positive_energy
from .errors import ConfigurationError, ContractError, DimensionError, DomainError
from .hilbert import (
    UP,
    Operator,
    fock_function,
    identity,
    interior_norm,
    ladder,
    pauli,
)


@dataclass(frozen=True)
class FwUnitary:
    u: Operator
    params: DiracParams

    @property
    def space(self):
        return self.u.space

    def unitarity_defect(self, idx=None):
        """Interior norm of U U^dag - 1 and U^dag U - 1 (the larger)."""
        one = identity(self.space)
        left = interior_norm(self.u @ self.u.dag() - one, idx)
        right = interior_norm(self.u.dag() @ self.u - one, idx)
        return max(left, right)


@dataclass(frozen=True)
class FrequencyOperator:
    op: Operator
    regime_tag: str

    def __post_init__(self):
        if self.regime_tag not in ("general", "weak", "strong"):
            raise ConfigurationError(f"unknown regime tag {self.regime_tag!r}")
        defect = self.op.hermiticity_defect()
        if defect > 1e-10:
            raise ContractError(f"frequency operator not hermitian (defect {defect:.3e})")


def _require_dirac(space):
    if not space.dirac_spin:
        raise ConfigurationError("the FW transform needs the Dirac spin factor")


def _b_over_sqrt_n(params):
    def f(n):
        _, b = coefficient_arrays(n, params)
        out = np.zeros_like(b)
        pos = n > 0
        out[pos] = b[pos] / np.sqrt(n[pos])
        return out
    return f


def _a_coeff(params, shift=0):
    return lambda n: coefficient_arrays(n + shift, params)[0]


def build_fw_unitary(params, space, check=True):
    """Block matrix [[A_n, i (B_n/sqrt n) a^dag], [a (B_n/sqrt n), -i A_{n+1}]]."""
    _require_dirac(space)
    a, ad = ladder(space)
    up = pauli(space, "up")
    down = pauli(space, "down")
    a_n = fock_function(space, _a_coeff(params))
    a_n1 = fock_function(space, _a_coeff(params, 1))
    b_q = fock_function(space, _b_over_sqrt_n(params))
    u = (up @ a_n
         + 1j * (pauli(space, "plus") @ b_q @ ad)
         + pauli(space, "minus") @ a @ b_q
         - 1j * (down @ a_n1))
    fw = FwUnitary(u, params)
    if check:
        defect = fw.unitarity_defect()
        if defect > 1e-8:
            raise ContractError(f"assembled FW unitary is not unitary on the interior ({defect:.3e})")
    return fw


def fw_energies(params, space):
    """Diagonal of the FW Hamiltonian: E_n^+ on spin up, E_n^- on spin down."""
    n = space.labels("oscillator").astype(float)
    s = space.labels("dirac")
    return np.where(s == UP, positive_energy(n, params), -positive_energy(n + 1, params))


def fw_hamiltonian(params, space):
    _require_dirac(space)
    return Operator.diagonal(space, fw_energies(params, space))


def level_spacing(n, params):
    """E_n^+ - E_{n-1}^+ in a cancellation-free form, valid for real n >= 1."""
    n = np.asarray(n, dtype=float)
    eps = params.epsilon
    return 2.0 / (np.sqrt(1 + 2 * n * eps) + np.sqrt(1 + 2 * (n - 1) * eps))


def frequency_values(params, space):
    """Diagonal of the general frequency operator.

    Spin up carries E_n^+ - E_{n-1}^+ (zero at n = 0 by convention), spin
    down carries E_n^- - E_{n-1}^- = -(E_{n+1}^+ - E_n^+).
    """
    n = space.labels("oscillator").astype(float)
    s = space.labels("dirac")
    up_vals = np.where(n >= 1, level_spacing(np.maximum(n, 1), params), 0.0)
    down_vals = -level_spacing(n + 1, params)
    return np.where(s == UP, up_vals, down_vals)


def frequency_operator_general(params, space):
    _require_dirac(space)
    return FrequencyOperator(Operator.diagonal(space, frequency_values(params, space)), "general")


def to_dirac(op, fw_unitary):
    if op.space != fw_unitary.space:
        raise DimensionError("operator and FW unitary live on different spaces")
    u = fw_unitary.u
    return u.dag() @ op @ u


def to_fw(op, fw_unitary):
    if op.space != fw_unitary.space:
        raise DimensionError("operator and FW unitary live on different spaces")
    u = fw_unitary.u
    return u @ op @ u.dag()


def state_to_dirac(state, fw_unitary):
    from .hilbert import StateVector
    return StateVector(state.space, fw_unitary.u.dag() @ state, normalize=True)


def closed_form_transformed_ladder(params, space):
    """Closed-form U^dag a U assembled block by block, and its adjoint."""
    _require_dirac(space)
    a, ad = ladder(space)
    nop = fock_function(space, lambda n: n)

    def diag_same(shift, ratio):
        # A_{n+s} A_{n+s+1} + ratio(n) B_{n+s} B_{n+s+1}
        def f(n):
            a0, b0 = coefficient_arrays(n + shift, params)
            a1, b1 = coefficient_arrays(n + shift + 1, params)
            return a0 * a1 + ratio(n) * b0 * b1
        return f

    def cross(n):
        # A_n B_{n+1}/sqrt(n+1) - A_{n+1} B_n/sqrt(n), second term 0 at n = 0
        a0, _ = coefficient_arrays(n, params)
        a1, b1 = coefficient_arrays(n + 1, params)
        return a0 * b1 / np.sqrt(n + 1) - a1 * _b_over_sqrt_n(params)(n)

    def offset(n):
        a0, _ = coefficient_arrays(n, params)
        _, b1 = coefficient_arrays(n + 1, params)
        return a0 * b1 / np.sqrt(n + 1)

    up_up = pauli(space, "up") @ fock_function(space, diag_same(0, lambda n: np.sqrt(n / (n + 1)))) @ a
    up_down = pauli(space, "plus") @ (1j * (fock_function(space, cross) @ nop)
                                      + 1j * fock_function(space, offset))
    down_up = pauli(space, "minus") @ (1j * (a @ fock_function(space, cross) @ a))
    down_down = pauli(space, "down") @ fock_function(space, diag_same(1, lambda n: np.sqrt((n + 2) / (n + 1)))) @ a
    a_d = up_up + up_down + down_up + down_down
    return a_d, a_d.dag()


def chi_values(n, params):
    n = np.asarray(n, dtype=float)
    eps = params.epsilon
    arg = 1 - 2 * eps / (1 + 2 * eps * n)
    if np.any(arg < 0):
        bad = n[arg < 0][0]
        raise DomainError(f"chi undefined at n = {bad:g} for epsilon = {eps:g} (square root of a negative number)")
    # (1 - sqrt(arg))/eps rewritten as 2/((1+2 eps n)(1 + sqrt(arg))) to avoid cancellation
    return 2.0 / ((1 + 2 * eps * n) * (1 + np.sqrt(arg)))


def chi_operator(params, space, min_n=0, verify=False, fw_unitary=None):
    """Diagonal chi(n); entries with n < min_n are set to zero.

    With ``verify`` the closed-form transformed frequency matrix is compared
    with brute-force conjugation of the general frequency operator.
    """
    _require_dirac(space)
    n = space.labels("oscillator").astype(float)
    keep = n >= min_n
    vals = np.zeros_like(n)
    vals[keep] = chi_values(n[keep], params)
    chi = Operator.diagonal(space, vals)
    if verify:
        fw_unitary = fw_unitary or build_fw_unitary(params, space)
        closed = closed_form_transformed_frequency(params, space, min_n=min_n)
        brute = to_dirac(frequency_operator_general(params, space).op, fw_unitary)
        dev = interior_norm(closed - brute)
        if dev > 1e-9:
            raise ContractError(f"closed-form transformed frequency deviates from conjugation by {dev:.3e}")
    return chi


def closed_form_transformed_frequency(params, space, min_n=0):
    """[[chi(n), i sqrt(2 eps) chi(n) a^dag], [-i a sqrt(2 eps) chi(n), -chi(n+1)]]."""
    a, ad = ladder(space)
    root = np.sqrt(2 * params.epsilon)

    def chi_f(shift):
        def f(n):
            m = n + shift
            out = np.zeros_like(m)
            keep = m >= min_n
            out[keep] = chi_values(m[keep], params)
            return out
        return f

    chi0 = fock_function(space, chi_f(0))
    chi1 = fock_function(space, chi_f(1))
    return (pauli(space, "up") @ chi0
            + pauli(space, "plus") @ (1j * root * (chi0 @ ad))
            + pauli(space, "minus") @ (-1j * root * (a @ chi0))
            - pauli(space, "down") @ chi1)


def fw_offdiagonal_defect(params, space, fw_unitary=None):
    """Interior norm of the spin-flip part of U H_D U^dag."""
    fw_unitary = fw_unitary or build_fw_unitary(params, space)
    h = to_fw(build_h_dirac(params, space), fw_unitary)
    flip = pauli(space, "up") @ h @ pauli(space, "down") + pauli(space, "down") @ h @ pauli(space, "up")
    return interior_norm(flip)


__all__ = [
    "FwUnitary", "FrequencyOperator", "build_fw_unitary", "fw_hamiltonian", "fw_energies",
    "frequency_operator_general", "frequency_values", "level_spacing", "to_dirac", "to_fw",
    "state_to_dirac", "closed_form_transformed_ladder", "closed_form_transformed_frequency",
    "chi_operator", "chi_values", "fw_offdiagonal_defect",
]
