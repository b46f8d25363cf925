"""Truncated Fock and spin spaces, their operators and states.

Basis ordering is oscillator, Dirac spin, probe boson, probe spin, with the
last factor varying fastest.  Spin label 0 is up (sigma_z = +1) and label 1
is down.  Operators are stored densely unless the space is too large for
that to be sensible, in which case a CSR matrix is kept instead; every
public operation accepts both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractError, DimensionError, DomainError, TruncationError

UP, DOWN = 0, 1
FACTORS = ("oscillator", "dirac", "probe", "probe_spin")

# Above this total dimension builders return sparse matrices.
DENSE_LIMIT = 256

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class SpaceDescriptor:
    osc_dim: int
    dirac_spin: bool = True
    probe_boson_dim: int = 0
    probe_spin: bool = False

    def __post_init__(self):
        if int(self.osc_dim) != self.osc_dim or self.osc_dim < 2:
            raise ConfigurationError(f"osc_dim must be an integer >= 2, got {self.osc_dim!r}")
        if self.probe_boson_dim not in (0,) and (int(self.probe_boson_dim) != self.probe_boson_dim
                                                 or self.probe_boson_dim < 2):
            raise ConfigurationError(
                f"probe_boson_dim must be 0 (absent) or >= 2, got {self.probe_boson_dim!r}")

    @property
    def factor_order(self):
        return FACTORS

    @property
    def factor_dims(self):
        """Dimensions of every canonical factor, 1 for absent ones."""
        return (int(self.osc_dim), 2 if self.dirac_spin else 1,
                int(self.probe_boson_dim) if self.probe_boson_dim else 1,
                2 if self.probe_spin else 1)

    @property
    def dim(self):
        return math.prod(self.factor_dims)

    def has(self, factor):
        if factor not in FACTORS:
            raise ConfigurationError(f"unknown factor {factor!r}")
        return self.factor_dims[FACTORS.index(factor)] > 1 or factor == "oscillator"

    def labels(self, factor):
        """Per-basis-state quantum number of one factor (read-only array)."""
        return _labels(self, FACTORS.index(factor))

    def index(self, n=0, spin=UP, probe=0, probe_spin=UP):
        d = self.factor_dims
        parts = (n, spin if self.dirac_spin else 0, probe, probe_spin if self.probe_spin else 0)
        for value, size, name in zip(parts, d, FACTORS):
            if not 0 <= value < size:
                raise DimensionError(f"{name} index {value} outside 0..{size - 1}")
        return ((parts[0] * d[1] + parts[1]) * d[2] + parts[2]) * d[3] + parts[3]

    def basis(self, n=0, spin=UP, probe=0, probe_spin=UP):
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(n, spin, probe, probe_spin)] = 1.0
        return StateVector(self, v)

    def with_osc_dim(self, osc_dim):
        return SpaceDescriptor(osc_dim, self.dirac_spin, self.probe_boson_dim, self.probe_spin)


@lru_cache(maxsize=64)
def _labels(space, axis):
    dims = space.factor_dims
    grid = np.indices(dims).reshape(len(dims), -1)[axis].copy()
    grid.setflags(write=False)
    return grid


def make_space(osc_dim, dirac_spin=True, probe_boson_dim=0, probe_spin=False):
    return SpaceDescriptor(int(osc_dim), bool(dirac_spin), int(probe_boson_dim), bool(probe_spin))


def _is_sparse(m):
    return sp.issparse(m)


def _densify(m):
    return m.toarray() if _is_sparse(m) else np.asarray(m)


def _finish(space, m):
    """Store small operators densely, large ones as CSR."""
    if space.dim <= DENSE_LIMIT:
        return _densify(m).astype(complex, copy=False)
    return sp.csr_matrix(m, dtype=complex)


class Operator:
    """A square matrix acting on a SpaceDescriptor."""

    __slots__ = ("space", "matrix")

    def __init__(self, space, matrix, hermitian=False):
        shape = matrix.shape
        if shape != (space.dim, space.dim):
            raise DimensionError(f"matrix shape {shape} does not match space dimension {space.dim}")
        self.space = space
        self.matrix = matrix
        if hermitian:
            dev = self.hermiticity_defect()
            if dev > HERMITIAN_TOL:
                raise ContractError(f"operator asserted hermitian but max|M - M^dag| = {dev:.3e}")

    @classmethod
    def diagonal(cls, space, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (space.dim,):
            raise DimensionError("diagonal length does not match the space")
        if space.dim <= DENSE_LIMIT:
            return cls(space, np.diag(values))
        return cls(space, sp.diags(values, format="csr"))

    @property
    def is_sparse(self):
        return _is_sparse(self.matrix)

    def toarray(self):
        return _densify(self.matrix)

    def tocsr(self):
        return sp.csr_matrix(self.matrix)

    def element(self, i, j):
        return complex(self.matrix[i, j])

    def diagonal_values(self):
        return np.asarray(self.matrix.diagonal()).ravel()

    def is_diagonal(self):
        if self.is_sparse:
            m = self.matrix.tocoo()
            return bool(np.all((m.row == m.col) | (m.data == 0)))
        m = self.matrix
        return not np.any(m - np.diag(np.diagonal(m)))

    def dag(self):
        return Operator(self.space, self.matrix.conj().T.copy() if not self.is_sparse
                        else self.matrix.conj().T.tocsr())

    def hermiticity_defect(self):
        d = self.matrix - self.matrix.conj().T
        if _is_sparse(d):
            return float(abs(d).max()) if d.nnz else 0.0
        return float(np.max(np.abs(d))) if d.size else 0.0

    def is_hermitian(self, tol=HERMITIAN_TOL):
        return self.hermiticity_defect() <= tol

    def _check(self, other):
        if other.space != self.space:
            raise DimensionError("operators live on different spaces")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            if self.is_sparse and other.is_sparse:
                return Operator(self.space, (self.matrix + other.matrix).tocsr())
            return Operator(self.space, self.toarray() + other.toarray())
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return NotImplemented
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.space, self.matrix / scalar)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            m = self.matrix @ other.matrix
            if _is_sparse(m):
                m = m.tocsr()
            return Operator(self.space, np.asarray(m) if not _is_sparse(m) else m)
        if isinstance(other, StateVector):
            if other.space != self.space:
                raise DimensionError("operator and state live on different spaces")
            return np.asarray(self.matrix @ other.amplitudes).ravel()
        return NotImplemented

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Operator({kind}, dim={self.space.dim})"


class StateVector:
    """A normalized complex vector over a SpaceDescriptor."""

    __slots__ = ("space", "amplitudes")

    NORM_TOL = 1e-9

    def __init__(self, space, amplitudes, normalize=False):
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        if amps.shape != (space.dim,):
            raise DimensionError(f"state length {amps.shape[0]} does not match space dimension {space.dim}")
        norm = np.linalg.norm(amps)
        if normalize:
            if norm == 0:
                raise ContractError("cannot normalize the zero vector")
            amps = amps / norm
        elif abs(norm - 1.0) > self.NORM_TOL:
            raise ContractError(f"state norm {norm!r} differs from 1")
        self.space = space
        self.amplitudes = amps

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other):
        return abs(self.overlap(other)) ** 2

    def __repr__(self):
        return f"StateVector(dim={self.space.dim})"


def embed(space, factor, local):
    """Place a single-factor matrix into the full space, identity elsewhere."""
    if not space.has(factor):
        raise ConfigurationError(f"space has no {factor} factor")
    axis = FACTORS.index(factor)
    dims = space.factor_dims
    local = sp.csr_matrix(local, dtype=complex)
    if local.shape != (dims[axis], dims[axis]):
        raise DimensionError(f"local matrix for {factor} must be {dims[axis]}x{dims[axis]}")
    left = math.prod(dims[:axis])
    right = math.prod(dims[axis + 1:])
    m = local
    if right > 1:
        m = sp.kron(m, sp.identity(right, dtype=complex, format="csr"), format="csr")
    if left > 1:
        m = sp.kron(sp.identity(left, dtype=complex, format="csr"), m, format="csr")
    return Operator(space, _finish(space, m))


def _boson_factor(which):
    if which in ("oscillator", "osc"):
        return "oscillator"
    if which in ("probe", "probe_boson"):
        return "probe"
    raise ConfigurationError(f"unknown bosonic factor {which!r}")


def _spin_factor(which):
    if which in ("dirac", "dirac_spin"):
        return "dirac"
    if which in ("probe", "probe_spin"):
        return "probe_spin"
    raise ConfigurationError(f"unknown spin factor {which!r}")


def ladder(space, which="oscillator"):
    """Annihilation and creation operators of a bosonic factor."""
    factor = _boson_factor(which)
    if not space.has(factor):
        raise ConfigurationError(f"space has no {factor} factor")
    d = space.factor_dims[FACTORS.index(factor)]
    a = sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, shape=(d, d), format="csr")
    ann = embed(space, factor, a)
    return ann, ann.dag()


def number(space, which="oscillator"):
    """Number operator built directly on the diagonal (exact integers)."""
    factor = _boson_factor(which)
    if not space.has(factor):
        raise ConfigurationError(f"space has no {factor} factor")
    return Operator.diagonal(space, space.labels(factor).astype(float))


def fock_function(space, f, which="oscillator"):
    """f(n) evaluated eigenvalue-wise for the number operator of one factor."""
    factor = _boson_factor(which)
    n = space.labels(factor)
    return Operator.diagonal(space, np.asarray(f(n.astype(float)), dtype=complex))


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
    "up": np.array([[1, 0], [0, 0]], dtype=complex),
    "down": np.array([[0, 0], [0, 1]], dtype=complex),
}


def pauli(space, axis, which="dirac"):
    factor = _spin_factor(which)
    if not space.has(factor):
        raise ConfigurationError(f"space has no {factor} factor")
    try:
        m = _PAULI[axis]
    except KeyError:
        raise ConfigurationError(f"unknown Pauli axis {axis!r}") from None
    return embed(space, factor, m)


def identity(space):
    return Operator(space, _finish(space, sp.identity(space.dim, dtype=complex, format="csr")))


def coherent_amplitudes(dim, alpha):
    """Fock amplitudes of |alpha> truncated to dim levels and renormalized."""
    alpha = complex(alpha)
    c = np.zeros(dim, dtype=complex)
    c[0] = 1.0
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    # the exp(-|alpha|^2/2) prefactor cancels in the renormalization
    return c / np.linalg.norm(c)


def check_coherent_cutoff(dim, alpha, what="oscillator"):
    if abs(alpha) ** 2 > dim / 4:
        need = int(math.ceil(4 * abs(alpha) ** 2))
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha) ** 2:.4g} exceeds {what} cutoff {dim}/4; use a cutoff of at least {need}",
            suggested_cutoff=need)


_SPIN_STATES = {"up": np.array([1, 0], dtype=complex), "down": np.array([0, 1], dtype=complex)}


def _local_vector(value, dim):
    if value is None:
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        return v
    if isinstance(value, str):
        return _SPIN_STATES[value].copy()
    if isinstance(value, (int, np.integer)):
        if not 0 <= value < dim:
            raise DimensionError(f"basis index {value} outside 0..{dim - 1}")
        v = np.zeros(dim, dtype=complex)
        v[value] = 1.0
        return v
    v = np.asarray(value, dtype=complex).ravel()
    if v.shape != (dim,):
        raise DimensionError(f"factor vector has length {v.shape[0]}, expected {dim}")
    return v


def product_state(space, oscillator=None, dirac=None, probe=None, probe_spin=None):
    """Tensor product of per-factor vectors; missing ones default to index 0."""
    dims = space.factor_dims
    vec = np.ones(1, dtype=complex)
    for value, d in zip((oscillator, dirac, probe, probe_spin), dims):
        if d == 1:
            continue
        vec = np.kron(vec, _local_vector(value, d))
    return StateVector(space, vec, normalize=True)


def coherent_state(space, which="oscillator", amplitude=0.0, **others):
    factor = _boson_factor(which)
    if not space.has(factor):
        raise ConfigurationError(f"space has no {factor} factor")
    d = space.factor_dims[FACTORS.index(factor)]
    check_coherent_cutoff(d, amplitude, factor)
    parts = dict(others)
    parts[factor] = coherent_amplitudes(d, amplitude)
    return product_state(space, **parts)


def expectation(state, op):
    if state.space != op.space:
        raise DimensionError("state and operator live on different spaces")
    return complex(np.vdot(state.amplitudes, op @ state))


def variance(state, op):
    """<O^2> - <O>^2 for a hermitian O, clamped at zero within -1e-12."""
    if state.space != op.space:
        raise DimensionError("state and operator live on different spaces")
    return variance_from_vectors(state.amplitudes, op @ state)


def variance_from_vectors(psi, o_psi):
    mean = np.vdot(psi, o_psi).real
    second = np.vdot(o_psi, o_psi).real
    var = second - mean * mean
    if var < 0:
        if var < -1e-12 * max(1.0, second):
            raise ContractError(f"negative variance {var:.3e}; operator is probably not hermitian")
        var = 0.0
    return float(var)


def apply_function(op, f, edge=None):
    """Spectral operator function V f(D) V^dag of a hermitian operator.

    ``edge`` is the caller's convention for eigenvalues where ``f`` is not
    finite: either a constant or a callable of the offending eigenvalues.
    Diagonal operators are handled eigenvalue-wise without an eigensolve.
    """
    defect = op.hermiticity_defect()
    if defect > 1e-10:
        raise ContractError(f"apply_function needs a hermitian operator (defect {defect:.3e})")
    if op.is_diagonal():
        evals = op.diagonal_values().real
        return Operator.diagonal(op.space, _safe_eval(f, evals, edge))
    evals, vecs = np.linalg.eigh(op.toarray())
    fd = _safe_eval(f, evals, edge)
    return Operator(op.space, _finish(op.space, (vecs * fd) @ vecs.conj().T))


def _safe_eval(f, evals, edge):
    with np.errstate(all="ignore"):
        values = np.asarray(f(evals), dtype=complex)
    if values.shape != evals.shape:
        values = np.broadcast_to(values, evals.shape).astype(complex)
    bad = ~np.isfinite(values)
    if np.any(bad):
        if edge is None:
            raise DomainError(f"function undefined at eigenvalue {evals[bad][0]!r} and no edge convention given")
        values = values.copy()
        values[bad] = edge(evals[bad]) if callable(edge) else edge
    return values


def commutator(a, b):
    return a @ b - b @ a


def interior_indices(space, low=2, fraction=0.9, probe_margin=0):
    """Basis indices away from the Fock cutoff and the n < low corner.

    ``probe_margin`` additionally drops that many top probe-boson levels.
    """
    n = space.labels("oscillator")
    keep = (n >= low) & (n <= min(fraction * space.osc_dim, space.osc_dim - 2))
    if probe_margin and space.probe_boson_dim:
        keep &= space.labels("probe") < space.probe_boson_dim - probe_margin
    return np.flatnonzero(keep)


def restrict(op, idx):
    m = op.matrix
    if _is_sparse(m):
        return m.tocsr()[idx][:, idx].toarray()
    return m[np.ix_(idx, idx)]


def interior_norm(op, idx=None, **kwargs):
    """Spectral norm of P M P with P the interior projector."""
    if idx is None:
        idx = interior_indices(op.space, **kwargs)
    block = restrict(op, idx)
    if block.size == 0:
        return 0.0
    return float(np.linalg.norm(block, 2))


def leakage(space, amplitudes, margin=4):
    """Probability in the top ``margin`` oscillator levels."""
    n = space.labels("oscillator")
    edge = n >= space.osc_dim - margin
    return float(np.sum(np.abs(np.asarray(amplitudes)[edge]) ** 2))


def check_hermitian(op: Operator, tol=HERMITIAN_TOL, what="operator"):
    defect = op.hermiticity_defect()
    if defect > tol:
        raise ContractError(f"{what} is not hermitian: max|M - M^dag| = {defect:.3e}")
    return op


Builder = Callable[[float], Operator]
