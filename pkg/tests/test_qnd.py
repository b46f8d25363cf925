import math

import numpy as np
import pytest

from dirac_qnd.dirac_model import DiracParams, analytic_energy, build_h_dirac
from dirac_qnd.errors import ConfigurationError, ContractError
from dirac_qnd.fw import build_fw_unitary, fw_hamiltonian, level_spacing
from dirac_qnd.hilbert import UP, identity, interior_indices, interior_norm, ladder, make_space, pauli
from dirac_qnd.qnd import (
    MinUncertaintyState,
    QuadratureSpec,
    frequency_operator_strong,
    h_nonrelativistic,
    h_relativistic,
    min_uncertainty_state,
    qnd_defect,
    quadrature,
    quadrature_rate,
    quadrature_weak,
    quadrature_weak_next_order,
    quadrature_weak_substituted,
    strong_frequency_values,
    strong_phase,
    strong_phase_spectral,
    strong_limit_dirac_state,
    weak_limit_dirac_state,
)


def _q(index, regime, t, eps, space, fw=None):
    return quadrature(QuadratureSpec(index, regime, t, DiracParams(eps)), space, fw)


def _comm(a, b):
    return a @ b - b @ a


def test_t0_reduces_to_position():
    s = make_space(12)
    a, ad = ladder(s)
    x = (a + ad) / math.sqrt(2)
    for regime in ("weak", "strong", "fw_general"):
        assert interior_norm(_q(1, regime, 0.0, 0.3, s) - x) < 1e-14


def test_weak_quarter_period():
    s = make_space(12)
    a, ad = ladder(s)
    p = -1j * (a - ad) / math.sqrt(2)
    x1 = _q(1, "weak", math.pi / 2, 0.1, s)
    assert interior_norm(x1 + p @ pauli(s, "z")) < 1e-14


@pytest.mark.parametrize("regime,eps", [("weak", 0.1), ("strong", 100.0), ("fw_general", 0.1)])
def test_canonical_commutator(regime, eps):
    s = make_space(24)
    one = identity(s)
    for t in (0.0, 1.7, 3.0):
        c = _comm(_q(1, regime, t, eps, s), _q(2, regime, t, eps, s))
        assert interior_norm(c - 1j * one) < 1e-9


def test_dirac_commutator_and_spectrum():
    eps = 0.1
    s = make_space(24)
    fw = build_fw_unitary(DiracParams(eps), s)
    x1 = _q(1, "dirac_general", 1.1, eps, s, fw)
    x2 = _q(2, "dirac_general", 1.1, eps, s, fw)
    assert interior_norm(_comm(x1, x2) - 1j * identity(s)) < 1e-9
    # unitary conjugation preserves the spectrum
    x1f = _q(1, "fw_general", 1.1, eps, s)
    # the truncated FW unitary is exactly unitary on the span that leaves out
    # the top spin-down level, and maps that span onto itself
    n, spin = s.labels("oscillator"), s.labels("dirac")
    keep = np.flatnonzero(~((n == s.osc_dim - 1) & (spin == 1)))
    ev_d = np.linalg.eigvalsh(x1.toarray()[np.ix_(keep, keep)])
    ev_f = np.linalg.eigvalsh(x1f.toarray()[np.ix_(keep, keep)])
    assert np.allclose(ev_d, ev_f, atol=1e-10)
    # spin-flip content
    flip = pauli(s, "up") @ x1 @ pauli(s, "down")
    assert interior_norm(flip) > 1e-3


@pytest.mark.parametrize("regime,eps", [("weak", 0.1), ("strong", 50.0), ("fw_general", 0.2)])
@pytest.mark.parametrize("index", [1, 2])
def test_qnd_condition(regime, eps, index):
    s = make_space(30)
    for t in (0.4, 2.3):
        d = qnd_defect(regime, index, DiracParams(eps), s, t)
        assert interior_norm(d) < 1e-8


def test_qnd_condition_dirac_representation():
    eps = 0.05
    s = make_space(30)
    p = DiracParams(eps)
    fw = build_fw_unitary(p, s)
    d = qnd_defect("dirac_general", 1, p, s, 1.3, fw_unitary=fw)
    assert interior_norm(d) < 1e-8


def test_rate_matches_finite_difference():
    s = make_space(16)
    p = DiracParams(30.0)
    h = 1e-6
    for regime in ("weak", "strong", "fw_general", "weak_next_order"):
        spec = QuadratureSpec(2, regime, 0.8, p)
        fd = (quadrature(spec.at(0.8 + h), s) - quadrature(spec.at(0.8 - h), s)) / (2 * h)
        assert interior_norm(quadrature_rate(spec, s) - fd) < 1e-6


def test_weak_substituted_form_is_identical():
    s = make_space(10)
    p = DiracParams(0.01)
    for idx in (1, 2):
        spec = QuadratureSpec(idx, "weak", 2.2, p)
        assert interior_norm(quadrature_weak(spec, s) - quadrature_weak_substituted(spec, s)) < 1e-14


def test_next_order_reduces_at_zero_eps():
    s = make_space(10)
    p = DiracParams(0.01)
    for idx in (1, 2):
        spec = QuadratureSpec(idx, "weak_next_order", 0.9, p)
        lead = quadrature_weak(QuadratureSpec(idx, "weak", 0.9, p), s)
        assert interior_norm(quadrature_weak_next_order(spec, s, epsilon=0.0) - lead) < 1e-14


def test_next_order_sqrt_eps_scaling():
    s = make_space(12)
    rel = []
    for eps in (1e-4, 5e-5):
        p = DiracParams(eps)
        nxt = quadrature(QuadratureSpec(1, "weak_next_order", 1.0, p), s)
        lead = quadrature(QuadratureSpec(1, "weak", 1.0, p), s)
        rel.append(interior_norm(nxt - lead) / interior_norm(lead))
        assert nxt.hermiticity_defect() < 1e-12
    assert 1e-3 < rel[0] < 1e-1
    assert rel[0] / rel[1] == pytest.approx(math.sqrt(2), rel=0.1)


def test_next_order_conserved_by_dirac_hamiltonian():
    # the spin-flip corrections make X1 nearly conserved by the full H_D,
    # leaving an O(sqrt(eps)) defect; the leading-order form misses by O(1/sqrt(eps))
    s = make_space(8)
    nxt, lead = [], []
    for eps in (4e-4, 1e-4):
        p = DiracParams(eps)
        h = build_h_dirac(p, s)
        nxt.append(interior_norm(qnd_defect("weak_next_order", 1, p, s, 0.7, hamiltonian=h)))
        lead.append(interior_norm(qnd_defect("weak", 1, p, s, 0.7, hamiltonian=h)))
    assert nxt[0] / nxt[1] == pytest.approx(2.0, rel=0.05)
    assert lead[1] / lead[0] == pytest.approx(2.0, rel=0.05)
    assert nxt[1] < 1e-3 * lead[1]


def test_weak_conserved_by_fw_hamiltonian_to_first_order():
    s = make_space(8)
    errs = []
    for eps in (4e-4, 1e-4):
        p = DiracParams(eps)
        errs.append(interior_norm(qnd_defect("weak", 1, p, s, 0.7, hamiltonian=fw_hamiltonian(p, s))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_strong_frequency_values():
    p = DiracParams(100.0)
    assert strong_frequency_values(0, p) == 0
    v = strong_frequency_values(100, p)
    assert abs(v) == pytest.approx(math.sqrt(2 / 100) * (math.sqrt(100) - math.sqrt(99)), rel=1e-12)
    assert abs(v) == pytest.approx(7.0888e-3, rel=1e-4)


def test_strong_frequency_matches_level_spacing():
    p = DiracParams(1e3)
    n = np.arange(50, 201)
    strong = np.abs(strong_frequency_values(n, p))
    general = level_spacing(n, p)
    assert np.max(np.abs(strong - general) / general) < 0.02


def test_strong_phase_paths_agree():
    p = DiracParams(40.0)
    s = make_space(20)
    w = frequency_operator_strong(p, s)
    assert w.op.hermiticity_defect() < 1e-14
    analytic, _ = strong_phase(p, s, 2.5)
    spectral = strong_phase_spectral(p, s, 2.5)
    assert np.max(np.abs(analytic.toarray() - spectral.toarray())) < 1e-12


def test_regime_hamiltonians():
    p = DiracParams(0.5)
    s = make_space(6)
    h = h_nonrelativistic(p, s).diagonal_values().real
    assert h[s.index(3, UP)] == pytest.approx(p.mc2 + 3)
    big = DiracParams(1e6)
    hr = h_relativistic(big, s)
    assert hr.hermiticity_defect() < 1e-14
    # spectrum +-sqrt(2 n / eps), the large-eps form of the Dirac levels
    ev = np.sort(np.linalg.eigvalsh(hr.toarray()))
    ref = np.sort(np.concatenate([np.sqrt(2 * np.arange(6) / 1e6), -np.sqrt(2 * np.arange(6) / 1e6)]))
    assert np.allclose(ev, ref, atol=1e-14)
    top = analytic_energy(4, "+", big)
    assert top == pytest.approx(math.sqrt(8 / 1e6), rel=1e-3)


def test_min_uncertainty_state_variances():
    s = make_space(40)
    psi = min_uncertainty_state(0.5, 1 / math.sqrt(2), 1 / math.sqrt(2), "fw", space=s)
    p = DiracParams(0.1)
    for idx in (1, 2):
        op = _q(idx, "fw_general", 0.0, 0.1, s)
        v = op @ psi
        mean = np.vdot(psi.amplitudes, v).real
        assert np.vdot(v, v).real - mean ** 2 == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ContractError):
        MinUncertaintyState(0.5, 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        min_uncertainty_state(0.5, 1.0, 0.0, "dirac", space=s)
    del p


def test_weak_limit_state():
    s = make_space(40)
    c = 1 / math.sqrt(2)
    fw = build_fw_unitary(DiracParams(1e-6), s)
    psi = min_uncertainty_state(1.0, c, c, "dirac", fw_unitary=fw)
    ref = weak_limit_dirac_state(1.0, c, c, s)
    assert abs(np.vdot(ref.amplitudes, psi.amplitudes)) ** 2 > 1 - 1e-4


def test_strong_limit_state_high_n():
    s = make_space(110)
    c = 1 / math.sqrt(2)
    fw = build_fw_unitary(DiracParams(1e3), s)
    psi = min_uncertainty_state(5.0, c, c, "dirac", fw_unitary=fw).amplitudes
    ref = strong_limit_dirac_state(5.0, c, c, s).amplitudes
    keep = s.labels("oscillator") >= 10
    a, b = psi[keep], ref[keep]
    fid = abs(np.vdot(b, a)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)
    assert fid > 1 - 1e-2


def test_dirac_close_to_weak_at_tiny_eps():
    s = make_space(8)
    fw = build_fw_unitary(DiracParams(1e-6), s)
    for t in (0.0, 1.0, 2.5):
        d = _q(1, "dirac_general", t, 1e-6, s, fw) - _q(1, "weak", t, 1e-6, s)
        assert interior_norm(d) < 1e-2


def test_spec_validation():
    p = DiracParams(1.0)
    with pytest.raises(ConfigurationError):
        QuadratureSpec(3, "weak", 0.0, p)
    with pytest.raises(ConfigurationError):
        QuadratureSpec(1, "nope", 0.0, p)
    with pytest.raises(ConfigurationError):
        QuadratureSpec(1, "weak", -1.0, p)
    with pytest.raises(ConfigurationError):
        quadrature(QuadratureSpec(1, "dirac_general", 0.0, p), make_space(4))
    assert QuadratureSpec(1, "weak", 0.0, p).partner().index == 2
    assert interior_indices(make_space(30)).size > 0
