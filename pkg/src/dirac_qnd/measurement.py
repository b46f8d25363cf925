"""Probe couplings, time propagation and Heisenberg-equation residuals.

Two measurement schemes are modelled: an optical mode whose number
operator couples to the measured quadrature (``fw_optical``), and a probe
with a boson and a spin-1/2 (``spin_probe``).  Everything here is unitary
system-plus-probe dynamics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .dirac_model import build_h_dirac
from .errors import AccuracyError, ConfigurationError, ContractError, TruncationError
from .fw import fw_hamiltonian
from .hilbert import (
    UP,
    Operator,
    coherent_amplitudes,
    fock_function,
    interior_indices,
    ladder,
    number,
    pauli,
    product_state,
    restrict,
)
from .qnd import (
    MinUncertaintyState,
    QuadratureSpec,
    frequency_operator_strong,
    h_relativistic,
    quadrature,
    strong_frequency_values,
)

SCHEMES = ("fw_optical", "spin_probe")

LEAKAGE_LIMIT = 1e-6
HALVING_WARN = 1e-6
HALVING_LIMIT = 1e-5


@dataclass(frozen=True)
class MeasurementSetup:
    scheme: str
    g: float
    t_grid: tuple
    omega_b: float = 1.0
    omega_s: float = 0.0
    initial_system: MinUncertaintyState | None = None
    beta: complex = 0.0
    initial_probe_spin: str = "up"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if not (math.isfinite(self.g) and self.g >= 0):
            raise ConfigurationError(f"g must be finite and >= 0, got {self.g!r}")
        for name in ("omega_b", "omega_s"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")
        grid = tuple(float(t) for t in np.atleast_1d(self.t_grid))
        if not grid or grid[0] != 0.0:
            raise ConfigurationError("t_grid must start at 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("t_grid must be strictly increasing")
        if not all(math.isfinite(t) for t in grid):
            raise ConfigurationError("t_grid must be finite")
        object.__setattr__(self, "t_grid", grid)
        if self.initial_probe_spin not in ("up", "down"):
            raise ConfigurationError(f"initial_probe_spin must be up or down, got {self.initial_probe_spin!r}")

    def check_space(self, space):
        if not space.probe_boson_dim:
            raise ConfigurationError(f"the {self.scheme} scheme needs a probe boson factor")
        if self.scheme == "spin_probe" and not space.probe_spin:
            raise ConfigurationError("the spin_probe scheme needs a probe spin factor")


@dataclass
class TimeSeries:
    times: np.ndarray
    observables: dict
    leakage: np.ndarray
    meta: dict = field(default_factory=dict)
    final_state: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.leakage = np.asarray(self.leakage, dtype=float)
        n = len(self.times)
        if len(self.leakage) != n:
            raise ContractError("leakage and times differ in length")
        for name, (mean, var) in self.observables.items():
            if len(mean) != n or len(var) != n:
                raise ContractError(f"observable {name!r} does not match the time grid")
            if np.any(np.asarray(var) < 0):
                raise ContractError(f"observable {name!r} has a negative variance")

    def mean(self, name):
        return np.asarray(self.observables[name][0])

    def var(self, name):
        return np.asarray(self.observables[name][1])


@dataclass(frozen=True)
class BackactionPrediction:
    x2_mean_slope: float
    x2_var_quadratic_coeff: float
    n_b_mean: float
    n_b_var: float


# ------------------------------------------------------------ Hamiltonians

def build_htot_fw(setup, params, space, t):
    """H_F + omega_b n_b + g X1_F(t) n_b."""
    if setup.scheme != "fw_optical":
        raise ConfigurationError("build_htot_fw needs the fw_optical scheme")
    setup.check_space(space)
    nb = number(space, "probe")
    x1 = quadrature(QuadratureSpec(1, "fw_general", t, params), space)
    h = fw_hamiltonian(params, space) + setup.omega_b * nb + setup.g * (x1 @ nb)
    return h


def build_htot_weak(setup, params, space, t):
    """H_D + omega_b n_b + g X1_nr(t) n_b: full Dirac dynamics, weak-limit probe."""
    if setup.scheme != "fw_optical":
        raise ConfigurationError("build_htot_weak needs the fw_optical (number-coupled) scheme")
    setup.check_space(space)
    nb = number(space, "probe")
    x1 = quadrature(QuadratureSpec(1, "weak", t, params), space)
    return build_h_dirac(params, space) + setup.omega_b * nb + setup.g * (x1 @ nb)


def _probe_spin(space, axis):
    return pauli(space, axis, "probe_spin")


def _spin_probe_lowering(space):
    """a (s_z - i s_y), the operator paired with (b + b^dag) in the spin-probe coupling."""
    a, _ = ladder(space)
    return a @ (_probe_spin(space, "z") - 1j * _probe_spin(space, "y"))


def build_vm_spin_probe(setup, params, space):
    """(w_r / 2) s_x + g x_zpt [a (s_z - i s_y) + h.c.](b + b^dag)."""
    if setup.scheme != "spin_probe":
        raise ConfigurationError("build_vm_spin_probe needs the spin_probe scheme")
    setup.check_space(space)
    w_r = frequency_operator_strong(params, space).op
    rot = 0.5 * (w_r @ _probe_spin(space, "x"))
    if setup.g == 0:
        return Operator(space, rot.matrix, hermitian=True)
    b, bd = ladder(space, "probe")
    low = _spin_probe_lowering(space)
    coupling = setup.g * params.x_zpt * ((low + low.dag()) @ (b + bd))
    return Operator(space, (rot + coupling).matrix, hermitian=True)


def build_htot_spin_probe(setup, params, space, system="h_r"):
    """System + omega_b n_b + omega_s s_z + V_m; system is H_r or the full H_D."""
    if system == "h_r":
        h_sys = h_relativistic(params, space)
    elif system == "h_d":
        h_sys = build_h_dirac(params, space)
    else:
        raise ConfigurationError(f"system must be h_r or h_d, got {system!r}")
    nb = number(space, "probe")
    return (h_sys + setup.omega_b * nb + setup.omega_s * _probe_spin(space, "z")
            + build_vm_spin_probe(setup, params, space))


def build_h_effective_spin_probe(setup, params, space, t):
    """H_r + omega_b n_b + g X1_r(t)(b + b^dag) on a space without the probe spin."""
    if not space.probe_boson_dim or space.probe_spin:
        raise ConfigurationError("the effective coupling lives on oscillator x spin x probe boson")
    b, bd = ladder(space, "probe")
    x1 = quadrature(QuadratureSpec(1, "strong", t, params), space)
    return h_relativistic(params, space) + setup.omega_b * number(space, "probe") + setup.g * (x1 @ (b + bd))


# ------------------------------------------------------------ propagation

def default_step(h, epsilon=None):
    """Largest allowed step: min(0.01, 0.1/|H|), tightened for eps < 0.05."""
    lo, hi = engine.spectral_bounds(h.matrix if isinstance(h, Operator) else h)
    width = max(abs(lo), abs(hi), 1e-12)
    dt = min(0.01, 0.1 / width)
    if epsilon is not None and epsilon < 0.05:
        dt = min(dt, 0.002 / max(1.0, hi - lo))
    return dt


def total_leakage(space, amplitudes, margin=4):
    """Probability in the top ``margin`` levels of every boson factor."""
    amps = np.asarray(amplitudes)
    edge = space.labels("oscillator") >= space.osc_dim - margin
    if space.probe_boson_dim:
        edge = edge | (space.labels("probe") >= space.probe_boson_dim - margin)
    return float(np.sum(np.abs(amps[edge]) ** 2))


class VectorObservable:
    """An observable given by its action on state vectors, ``apply(t, psi)``.

    Used where rebuilding the operator at every sample would dominate the
    run time.
    """

    def __init__(self, apply):
        self.apply = apply

    def moments(self, t, psi):
        o_psi = self.apply(t, psi)
        return np.vdot(psi, o_psi).real, np.vdot(o_psi, o_psi).real


def _moments(obs, t, psi):
    if isinstance(obs, VectorObservable):
        return obs.moments(t, psi)
    op = obs(t) if callable(obs) else obs
    o_psi = op.matrix @ psi
    return np.vdot(psi, o_psi).real, np.vdot(o_psi, o_psi).real


def _clamp_variance(var, second):
    if var < 0:
        if var < -1e-10 * max(1.0, second):
            raise ContractError(f"negative variance {var:.3e}; observable is probably not hermitian")
        return 0.0
    return var


def _frame_phase(frame, t):
    return None if frame is None else np.exp(-1j * np.asarray(frame) * t)


def propagate(setup, h_builder, state0, observables=None, *, static=False, dt=None,
              frame=None, halving_check=True, epsilon=None, leakage_limit=LEAKAGE_LIMIT):
    """Evolve ``state0`` through ``setup.t_grid`` and record observables.

    ``h_builder(t)`` returns the Hamiltonian.  With ``static`` it is built
    once and exponentiated exactly.  Otherwise it is sampled at step
    midpoints and held constant over each step, and the final state is
    recomputed with half the step as an accuracy check.

    ``frame`` is an optional real diagonal (basis-wise energies) of a
    Hamiltonian already removed from ``h_builder``: the recorded state is
    exp(-i frame t) applied to the propagated one.
    """
    observables = dict(observables or {})
    space = state0.space
    times = np.asarray(setup.t_grid)
    means = {k: np.zeros(len(times)) for k in observables}
    varis = {k: np.zeros(len(times)) for k in observables}
    leak = np.zeros(len(times))
    norm_drift = 0.0

    def record(i, t, psi):
        nonlocal norm_drift
        phase = _frame_phase(frame, t)
        lab = psi if phase is None else phase * psi
        leak[i] = total_leakage(space, lab)
        if leak[i] > leakage_limit:
            raise TruncationError(
                f"leakage {leak[i]:.3e} at t={t:.4g} exceeds {leakage_limit:g}",
                suggested_cutoff=int(math.ceil(space.osc_dim * 1.5)), leakage=leak[i])
        norm_drift = max(norm_drift, abs(1 - np.linalg.norm(lab)))
        for name, obs in observables.items():
            mean, second = _moments(obs, t, lab)
            means[name][i] = mean
            varis[name][i] = _clamp_variance(second - mean * mean, second)

    meta = {"method": "static" if static else "midpoint"}
    psi0 = state0.amplitudes
    if static:
        h = h_builder(0.0)
        evolver = engine.StaticEvolver(h.matrix, psi0)
        final = psi0
        for i, t in enumerate(times):
            final = evolver.at(t)
            record(i, t, final)
        meta["halving_discrepancy"] = 0.0
    else:
        h0 = h_builder(0.0)
        step = dt if dt is not None else default_step(h0, epsilon)
        sparse = h0.is_sparse
        builder = (lambda t: h_builder(t).matrix)
        final, steps = engine.midpoint_evolve(builder, psi0, times, step, on_sample=record, sparse=sparse)
        meta.update(dt=step, steps=steps)
        if halving_check:
            half, _ = engine.midpoint_evolve(builder, psi0, times, step / 2, sparse=sparse)
            disc = float(np.linalg.norm(half - final))
            meta["halving_discrepancy"] = disc
            if disc > HALVING_LIMIT:
                raise AccuracyError(
                    f"step halving changed the final state by {disc:.3e}",
                    recommended_dt=step * math.sqrt(HALVING_WARN / disc) / 2, discrepancy=disc)
            if disc > HALVING_WARN:
                warnings.warn(f"step-halving discrepancy {disc:.3e} above {HALVING_WARN:g}")
    t_end = times[-1] if len(times) else 0.0
    meta["norm_drift_per_time"] = norm_drift / max(t_end, 1.0)
    phase = _frame_phase(frame, t_end)
    lab_final = final if phase is None else phase * final
    obs = {k: (means[k], varis[k]) for k in observables}
    return TimeSeries(times, obs, leak, meta, lab_final)


def predict_backaction(setup, params=None):
    """Drift and variance growth of X2 under number-coupled probing with a coherent probe."""
    if setup.scheme != "fw_optical":
        raise ConfigurationError("predict_backaction needs the fw_optical scheme")
    nb = abs(setup.beta) ** 2
    return BackactionPrediction(-setup.g * nb, setup.g ** 2 * nb, nb, nb)


# ------------------------------------------------------------ residuals

def heisenberg_residual(op_builder, h_builder, rhs_builder, t, idx=None, delta=1e-6, rate=None):
    """Interior norm of i[H, O] + dO/dt - RHS.

    dO/dt is a centred difference with step ``delta`` unless ``rate`` (a
    callable of t) supplies it.
    """
    op = op_builder(t)
    h = h_builder(t)
    if rate is not None:
        d_op = rate(t)
    else:
        lo = op_builder(max(t - delta, 0.0))
        hi = op_builder(t + delta)
        d_op = (hi - lo) / ((t + delta) - max(t - delta, 0.0))
    lhs = 1j * (h @ op - op @ h) + d_op
    diff = lhs - rhs_builder(t)
    if idx is None:
        idx = interior_indices(op.space)
    block = restrict(diff, idx)
    return float(np.linalg.norm(block, 2)) if block.size else 0.0


# Spin-probe equations: observables and their closed-form right-hand sides.

def _sqrt_diff(space):
    """2 sqrt(n) - sqrt(n+1) - sqrt(max(n-1, 0)) as a diagonal."""
    return fock_function(space, lambda n: 2 * np.sqrt(n) - np.sqrt(n + 1) - np.sqrt(np.maximum(n - 1, 0)))


def spin_probe_observable(which, params, space):
    if which in ("sx", "sy", "sz"):
        return _probe_spin(space, which[1])
    if which == "omega_r":
        return frequency_operator_strong(params, space).op
    if which == "a":
        return ladder(space)[0]
    if which == "b":
        return ladder(space, "probe")[0]
    raise ConfigurationError(f"unknown spin-probe observable {which!r}")


def spin_probe_rhs(which, setup, params, space):
    """Right-hand side of the spin-probe Heisenberg equation for one observable, in closed form."""
    g, ws = setup.g, setup.omega_s
    p0 = params.p_zpt
    c = 1 / math.sqrt(params.epsilon)
    sx, sy, sz = (_probe_spin(space, k) for k in "xyz")
    a, ad = ladder(space)
    b, bd = ladder(space, "probe")
    q = b + bd
    w_r = frequency_operator_strong(params, space).op
    low = a @ (sz - 1j * sy)
    if which == "sx":
        return -2 * ws * sy - 1j * (g / p0) * ((low - low.dag()) @ q)
    if which == "sy":
        t = a @ sx
        return -1.0 * (w_r @ sz) + 2 * ws * sx + (g / p0) * ((t + t.dag()) @ q)
    if which == "sz":
        t = a @ sx
        return w_r @ sy + 1j * (g / p0) * ((t - t.dag()) @ q)
    if which == "omega_r":
        t = 1j * pauli(space, "y") @ (c * g * (_sqrt_diff(space) @ low @ q))
        return t + t.dag()
    if which == "a":
        sigma_y = pauli(space, "y")
        return (-1j * (a @ w_r)
                - 1j * (sigma_y @ (c * p0 * (_sqrt_diff(space) @ a @ sx)))
                - 1j * g / (2 * p0) * ((sz + 1j * sy) @ q))
    if which == "b":
        return -1j * setup.omega_b * b - 1j * g / (2 * p0) * (low + low.dag())
    raise ConfigurationError(f"unknown spin-probe observable {which!r}")


# Perturbative systems.

def h_weak_check(setup, params, space, t):
    """FW-diagonal Hamiltonian to all orders plus the number-coupled probe on X1_nr."""
    nb = number(space, "probe")
    x1 = quadrature(QuadratureSpec(1, "weak", t, params), space)
    return fw_hamiltonian(params, space) + setup.omega_b * nb + setup.g * (x1 @ nb)


def weak_perturbative_rhs(index, setup, params, space, t, ordering="number_first"):
    """First-order-in-eps Heisenberg RHS for X1_nr / X2_nr.

    ``ordering='number_first'`` places (2n - sigma_z + 1) to the left of the
    partner quadrature (not hermitian, first order only); ``'partner_first'`` places it to the right.
    """
    if ordering not in ("number_first", "partner_first"):
        raise ConfigurationError(f"unknown ordering {ordering!r}")
    eps = params.epsilon
    sz = pauli(space, "z")
    k = fock_function(space, lambda n: 2 * n + 1) - sz
    x1 = quadrature(QuadratureSpec(1, "weak", t, params), space)
    x2 = quadrature(QuadratureSpec(2, "weak", t, params), space)
    own, partner, sign = (x1, x2, 1) if index == 1 else (x2, x1, -1)
    kp = k @ partner if ordering == "number_first" else partner @ k
    rhs = (-eps / 2) * (sz @ (1j * own + sign * kp))
    if index == 2:
        rhs = rhs - setup.g * number(space, "probe")
    return rhs


def _omega_over_n(params, space):
    f = fock_function(space, lambda n: np.where(
        n > 0, strong_frequency_values(n, params) / np.maximum(n, 1), 0.0))
    return f @ pauli(space, "y")


def strong_perturbative_rhs(index, setup, params, space, t):
    """Leading correction to the extreme-limit Heisenberg equations for X1_r / X2_r."""
    x1 = quadrature(QuadratureSpec(1, "strong", t, params), space)
    x2 = quadrature(QuadratureSpec(2, "strong", t, params), space)
    w = _omega_over_n(params, space)
    if index == 1:
        t_op = (1j * x1 - x2) @ w
        return (1 / (8 * params.epsilon)) * (t_op - t_op.dag())
    t_op = (x1 + 1j * x2) @ w
    return (1 / (8 * params.epsilon)) * (t_op + t_op.dag()) - setup.g * number(space, "probe")


def h_strong_check(setup, params, space, t):
    nb = number(space, "probe")
    x1 = quadrature(QuadratureSpec(1, "strong", t, params), space)
    return build_h_dirac(params, space) + setup.omega_b * nb + setup.g * (x1 @ nb)


# ------------------------------------------------------------ effective V_m

@dataclass(frozen=True)
class VmReport:
    fidelity: float
    regime_flags: dict
    diagnostics: dict


def _spin_probe_initial(alpha, c1, c2, space):
    """|alpha> x ((c1 + c2) up - i (c1 - c2) down)/sqrt 2 x probe vacuum x probe spin up."""
    osc = coherent_amplitudes(space.osc_dim, alpha)
    spin = np.array([c1 + c2, -1j * (c1 - c2)]) / math.sqrt(2)
    kwargs = dict(oscillator=osc, dirac=spin, probe=0)
    if space.probe_spin:
        kwargs["probe_spin"] = UP
    return product_state(space, **kwargs)


def effective_vm_check(setup, params, space, system="h_r", t_final=None):
    """Compare full spin-probe dynamics with the effective g X1_r (b + b^dag) coupling.

    Both Hamiltonians are time independent in a suitable frame: the full
    one outright, the effective one in the frame of H_r, where X1_r(t)
    becomes x.  The fidelity is <psi_eff| rho |psi_eff> with rho the full
    state with the probe spin traced out.
    """
    if setup.scheme != "spin_probe":
        raise ConfigurationError("effective_vm_check needs the spin_probe scheme")
    setup.check_space(space)
    if setup.initial_probe_spin != "up":
        raise ConfigurationError("effective_vm_check assumes the probe spin starts up")
    mus = setup.initial_system
    if mus is None:
        raise ConfigurationError("effective_vm_check needs an initial system state")
    t_final = setup.t_grid[-1] if t_final is None else float(t_final)

    state = _spin_probe_initial(mus.alpha, mus.c1, mus.c2, space)
    h_full = build_htot_spin_probe(setup, params, space, system)
    full = engine.StaticEvolver(h_full.matrix, state.amplitudes).at(t_final)
    leak_full = total_leakage(space, full)

    reduced = space.__class__(space.osc_dim, True, space.probe_boson_dim, False)
    psi_eff0 = _spin_probe_initial(mus.alpha, mus.c1, mus.c2, reduced)
    x = quadrature(QuadratureSpec(1, "strong", 0.0, params), reduced)
    b, bd = ladder(reduced, "probe")
    h_frame = setup.omega_b * number(reduced, "probe") + setup.g * (x @ (b + bd))
    eff = engine.StaticEvolver(h_frame.matrix, psi_eff0.amplitudes).at(t_final)
    h_r = h_relativistic(params, reduced)
    eff = engine.StaticEvolver(h_r.matrix, eff).at(t_final)
    leak_eff = total_leakage(reduced, eff)
    leak = max(leak_full, leak_eff)
    if leak > LEAKAGE_LIMIT:
        raise TruncationError(f"effective-coupling check leaked {leak:.3e}",
                              suggested_cutoff=int(space.osc_dim * 1.5), leakage=leak)

    # trace out the probe spin (fastest index)
    full2 = full.reshape(-1, 2)
    fid = float(sum(abs(np.vdot(eff, full2[:, s])) ** 2 for s in range(2)))

    n = reduced.labels("oscillator")
    probs = np.abs(psi_eff0.amplitudes) ** 2
    mean_n = float(np.sum(probs * n))
    w_abs = float(np.sum(probs * np.abs(strong_frequency_values(n, params))))
    flags = {
        "frequency_dominates": bool(setup.omega_s == 0 or w_abs > 10 * abs(setup.omega_s)),
        "weak_coupling": bool(mean_n > 0 and setup.g / math.sqrt(mean_n) < 0.1),
    }
    diag = {"mean_abs_omega_r": w_abs, "omega_ratio": w_abs / setup.omega_s if setup.omega_s else math.inf,
            "g_over_sqrt_n": setup.g / math.sqrt(mean_n) if mean_n > 0 else math.inf,
            "mean_n": mean_n, "leakage": leak}
    for name, ok in flags.items():
        if not ok:
            warnings.warn(f"effective coupling regime flag {name} fails: {diag}")
    return VmReport(fid, flags, diag)
