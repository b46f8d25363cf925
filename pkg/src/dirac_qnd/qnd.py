"""Time-parameterized QND quadratures for the weak, extreme and general regimes.

Every quadrature pair is built from a rotating annihilation operator
A(t) = a exp(i W t), with W the regime's frequency operator:

    X1 = x_zpt (A + A^dag),    X2 = -i x_zpt (A - A^dag)

Time enters analytically, so the explicit derivatives used by the QND
checks come from dA/dt = a (i W) exp(i W t) rather than finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dirac_model import DiracParams, build_h_dirac
from .errors import ConfigurationError, ContractError
from .fw import FrequencyOperator, frequency_values, fw_hamiltonian, to_dirac
from .hilbert import (
    UP,
    Operator,
    StateVector,
    apply_function,
    check_coherent_cutoff,
    coherent_amplitudes,
    fock_function,
    ladder,
    pauli,
    product_state,
)

REGIMES = ("weak", "weak_next_order", "strong", "fw_general", "dirac_general")


@dataclass(frozen=True)
class QuadratureSpec:
    index: int
    regime: str
    time: float
    params: DiracParams

    def __post_init__(self):
        if self.index not in (1, 2):
            raise ConfigurationError(f"quadrature index must be 1 or 2, got {self.index!r}")
        if self.regime not in REGIMES:
            raise ConfigurationError(f"unknown regime {self.regime!r}")
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ConfigurationError(f"time must be finite and non-negative, got {self.time!r}")

    def at(self, time):
        return QuadratureSpec(self.index, self.regime, float(time), self.params)

    def partner(self):
        return QuadratureSpec(3 - self.index, self.regime, self.time, self.params)


@dataclass(frozen=True)
class MinUncertaintyState:
    alpha: complex
    c1: complex
    c2: complex
    representation: str = "fw"

    def __post_init__(self):
        if self.representation not in ("fw", "dirac"):
            raise ConfigurationError(f"representation must be fw or dirac, got {self.representation!r}")
        norm = abs(self.c1) ** 2 + abs(self.c2) ** 2
        if abs(norm - 1) > 1e-12:
            raise ContractError(f"|c1|^2 + |c2|^2 = {norm!r}, expected 1")


def _pair(space, rotating, d_rotating=None):
    x0 = 1 / math.sqrt(2)
    x1 = x0 * (rotating + rotating.dag())
    x2 = -1j * x0 * (rotating - rotating.dag())
    if d_rotating is None:
        return x1, x2
    dx1 = x0 * (d_rotating + d_rotating.dag())
    dx2 = -1j * x0 * (d_rotating - d_rotating.dag())
    return x1, x2, dx1, dx2


def _pick(spec, ops):
    return ops[spec.index - 1]


# ----------------------------------------------------------------- FW regime

def _fw_rotating(spec, space, derivative=False):
    a, _ = ladder(space)
    w = frequency_values(spec.params, space)
    phase = Operator.diagonal(space, np.exp(1j * w * spec.time))
    rot = a @ phase
    if not derivative:
        return rot, None
    return rot, a @ Operator.diagonal(space, 1j * w * np.exp(1j * w * spec.time))


def quadrature_fw(spec, space):
    """x_zpt (a e^{i w t} + h.c.) and its partner with the diagonal FW frequency."""
    if spec.regime != "fw_general":
        raise ConfigurationError("quadrature_fw needs regime fw_general")
    rot, _ = _fw_rotating(spec, space)
    return _pick(spec, _pair(space, rot))


# --------------------------------------------------------------- weak regime

def _xp(space):
    a, ad = ladder(space)
    x0 = 1 / math.sqrt(2)
    return x0 * (a + ad), -1j * x0 * (a - ad)


def quadrature_weak(spec, space):
    """x cos t - p sigma_z sin t and x sigma_z sin t + p cos t."""
    if spec.regime != "weak":
        raise ConfigurationError("quadrature_weak needs regime weak")
    x, p = _xp(space)
    sz = pauli(space, "z")
    c, s = math.cos(spec.time), math.sin(spec.time)
    if spec.index == 1:
        return c * x - s * (p @ sz)
    return s * (x @ sz) + c * p


def _spin_phase(space, t, derivative=False):
    """exp(i sigma_z t) and, optionally, its time derivative."""
    sz = pauli(space, "z").diagonal_values().real
    ph = Operator.diagonal(space, np.exp(1j * sz * t))
    if not derivative:
        return ph, None
    return ph, Operator.diagonal(space, 1j * sz * np.exp(1j * sz * t))


def quadrature_weak_substituted(spec, space):
    """The same weak quadratures written as x_zpt (a e^{i sigma_z t} + h.c.)."""
    a, _ = ladder(space)
    ph, _ = _spin_phase(space, spec.time)
    return _pick(spec, _pair(space, a @ ph))


def quadrature_weak_next_order(spec, space, epsilon=None):
    """Weak quadratures with the sqrt(eps) spin-orbit corrections (truncated expansion).

    ``epsilon`` overrides the value in ``spec.params`` and may be 0, where the
    result coincides with the leading-order weak quadrature.
    """
    if spec.regime != "weak_next_order":
        raise ConfigurationError("quadrature_weak_next_order needs regime weak_next_order")
    return _next_order(spec, space, derivative=False, epsilon=epsilon)


def _next_order(spec, space, derivative, epsilon=None):
    eps = spec.params.epsilon if epsilon is None else float(epsilon)
    if not (math.isfinite(eps) and eps >= 0):
        raise ConfigurationError(f"epsilon must be finite and non-negative, got {eps!r}")
    t = spec.time
    x0 = 1 / math.sqrt(2)
    a, ad = ladder(space)
    splus = pauli(space, "plus")
    sminus = pauli(space, "minus")
    ph, dph = _spin_phase(space, t, derivative=True)
    lead = a + 1j * math.sqrt(eps / 2) * splus
    rot = lead @ ph
    flip = (ad @ splus - a @ sminus) @ ad
    s = math.sin(t)
    x1 = x0 * (rot + rot.dag()) + x0 * math.sqrt(2 * eps) * s * (flip + flip.dag())
    x2 = -1j * x0 * (rot - rot.dag()) - 1j * x0 * math.sqrt(2 * eps) * s * (flip - flip.dag())
    if not derivative:
        return _pick(spec, (x1, x2))
    drot = lead @ dph
    c = math.cos(t)
    dx1 = x0 * (drot + drot.dag()) + x0 * math.sqrt(2 * eps) * c * (flip + flip.dag())
    dx2 = -1j * x0 * (drot - drot.dag()) - 1j * x0 * math.sqrt(2 * eps) * c * (flip - flip.dag())
    return _pick(spec, (dx1, dx2))


# ------------------------------------------------------------ strong regime

def strong_frequency_values(n, params):
    """sqrt(2/eps) (sqrt(max(n-1, 0)) - sqrt(n)); multiply by sigma_y for the operator."""
    n = np.asarray(n, dtype=float)
    return math.sqrt(2 / params.epsilon) * (np.sqrt(np.maximum(n - 1, 0)) - np.sqrt(n))


def frequency_operator_strong(params, space):
    f = fock_function(space, lambda n: strong_frequency_values(n, params))
    return FrequencyOperator(f @ pauli(space, "y"), "strong")


def strong_phase(params, space, t, derivative=False):
    """exp(i w_r t) = cos(f t) + i sigma_y sin(f t) with w_r = f(n) sigma_y."""
    sy = pauli(space, "y")
    f = strong_frequency_values(space.labels("oscillator"), params)
    cos_t = Operator.diagonal(space, np.cos(f * t))
    sin_t = Operator.diagonal(space, np.sin(f * t))
    ph = cos_t + 1j * (sy @ sin_t)
    if not derivative:
        return ph, None
    # d/dt exp(i w t) = i w exp(i w t)
    w = frequency_operator_strong(params, space).op
    return ph, 1j * (w @ ph)


def strong_phase_spectral(params, space, t):
    """Same exponential through a full eigendecomposition (cross-check path)."""
    return apply_function(frequency_operator_strong(params, space).op, lambda v: np.exp(1j * v * t))


def quadrature_strong(spec, space):
    """x_zpt (a e^{i w_r t} + h.c.): ladder operator to the left of the exponential."""
    if spec.regime != "strong":
        raise ConfigurationError("quadrature_strong needs regime strong")
    a, _ = ladder(space)
    ph, _ = strong_phase(spec.params, space, spec.time)
    return _pick(spec, _pair(space, a @ ph))


# ----------------------------------------------------------- Dirac regime

def quadrature_dirac(spec, fw_unitary, space):
    if spec.regime != "dirac_general":
        raise ConfigurationError("quadrature_dirac needs regime dirac_general")
    if fw_unitary is None:
        raise ConfigurationError("the Dirac-representation quadrature needs an FW unitary")
    fw_spec = QuadratureSpec(spec.index, "fw_general", spec.time, spec.params)
    return to_dirac(quadrature_fw(fw_spec, space), fw_unitary)


# ------------------------------------------------------------- dispatch

def quadrature(spec, space, fw_unitary=None):
    if spec.regime == "fw_general":
        return quadrature_fw(spec, space)
    if spec.regime == "weak":
        return quadrature_weak(spec, space)
    if spec.regime == "weak_next_order":
        return quadrature_weak_next_order(spec, space)
    if spec.regime == "strong":
        return quadrature_strong(spec, space)
    return quadrature_dirac(spec, fw_unitary, space)


def quadrature_rate(spec, space, fw_unitary=None):
    """Explicit partial time derivative of the quadrature, from its construction."""
    t = spec.time
    if spec.regime in ("fw_general", "dirac_general"):
        rot, drot = _fw_rotating(spec, space, derivative=True)
        d = _pick(spec, _pair(space, rot, drot)[2:])
        if spec.regime == "dirac_general":
            if fw_unitary is None:
                raise ConfigurationError("the Dirac-representation quadrature needs an FW unitary")
            d = to_dirac(d, fw_unitary)
        return d
    if spec.regime == "weak":
        x, p = _xp(space)
        sz = pauli(space, "z")
        c, s = math.cos(t), math.sin(t)
        if spec.index == 1:
            return -s * x - c * (p @ sz)
        return c * (x @ sz) - s * p
    if spec.regime == "weak_next_order":
        return _next_order(spec, space, derivative=True)
    a, _ = ladder(space)
    ph, dph = strong_phase(spec.params, space, t, derivative=True)
    return _pick(spec, _pair(space, a @ ph, a @ dph)[2:])


def regime_hamiltonian(regime, params, space):
    """The effective Hamiltonian under which the regime's quadratures are QND."""
    if regime in ("weak", "weak_next_order"):
        return h_nonrelativistic(params, space)
    if regime == "strong":
        return h_relativistic(params, space)
    if regime == "fw_general":
        return fw_hamiltonian(params, space)
    if regime == "dirac_general":
        return build_h_dirac(params, space)
    raise ConfigurationError(f"unknown regime {regime!r}")


def h_nonrelativistic(params, space):
    """mc^2 sigma_z + (n + 1/2) sigma_z - 1/2."""
    n = space.labels("oscillator").astype(float)
    sz = np.where(space.labels("dirac") == UP, 1.0, -1.0)
    return Operator.diagonal(space, params.mc2 * sz + (n + 0.5) * sz - 0.5)


def h_nonrelativistic_next_order(params, space):
    """H_nr - (eps/8) sigma_z (2n - sigma_z + 1)^2."""
    n = space.labels("oscillator").astype(float)
    sz = np.where(space.labels("dirac") == UP, 1.0, -1.0)
    base = params.mc2 * sz + (n + 0.5) * sz - 0.5
    return Operator.diagonal(space, base - params.epsilon / 8 * sz * (2 * n - sz + 1) ** 2)


def h_relativistic(params, space):
    """-sigma_y sqrt(2 n / eps)."""
    root = fock_function(space, lambda n: np.sqrt(2 * n / params.epsilon))
    return -1.0 * (pauli(space, "y") @ root)


def qnd_defect(regime, index, params, space, t, fw_unitary=None, hamiltonian=None):
    """i[H, X] + dX/dt for one quadrature, as an operator."""
    spec = QuadratureSpec(index, regime, t, params)
    x = quadrature(spec, space, fw_unitary)
    dx = quadrature_rate(spec, space, fw_unitary)
    h = hamiltonian if hamiltonian is not None else regime_hamiltonian(regime, params, space)
    return 1j * (h @ x - x @ h) + dx


# ------------------------------------------------------------ states

def min_uncertainty_state(alpha, c1, c2, representation, fw_unitary=None, space=None):
    """|alpha> (c1 up + c2 down) in the FW frame, or U^dag of it in the Dirac frame."""
    mus = MinUncertaintyState(complex(alpha), complex(c1), complex(c2), representation)
    if space is None:
        if fw_unitary is None:
            raise ConfigurationError("min_uncertainty_state needs a space or an FW unitary")
        space = fw_unitary.space
    check_coherent_cutoff(space.osc_dim, mus.alpha)
    osc = coherent_amplitudes(space.osc_dim, mus.alpha)
    state = product_state(space, oscillator=osc, dirac=np.array([mus.c1, mus.c2]))
    if representation == "fw":
        return state
    if fw_unitary is None:
        raise ConfigurationError("the Dirac-representation state needs an FW unitary")
    return StateVector(space, fw_unitary.u.dag() @ state, normalize=True)


def weak_limit_dirac_state(alpha, c1, c2, space):
    """|alpha> (c1 up + i c2 down)."""
    osc = coherent_amplitudes(space.osc_dim, alpha)
    return product_state(space, oscillator=osc, dirac=np.array([c1, 1j * c2]))


def strong_limit_dirac_state(alpha, c1, c2, space):
    """|alpha> ((c1 + c2) up - i (c1 - c2) down) / sqrt 2."""
    osc = coherent_amplitudes(space.osc_dim, alpha)
    spin = np.array([c1 + c2, -1j * (c1 - c2)]) / math.sqrt(2)
    return product_state(space, oscillator=osc, dirac=spin)
