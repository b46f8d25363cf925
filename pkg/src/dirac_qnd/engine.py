"""Unitary time stepping for dense and sparse Hamiltonians.

Static Hamiltonians are exponentiated exactly (eigendecomposition when
dense, a converged Chebyshev series between samples when sparse).  Time-dependent ones
are sampled at the midpoint of each step and held constant across it; the
per-step exponential is a Chebyshev expansion for sparse matrices and an
eigendecomposition for dense ones.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.special import jv


def spectral_bounds(h):
    """Gershgorin interval containing the spectrum of a hermitian matrix."""
    if sp.issparse(h):
        h = h.tocsr()
        diag = h.diagonal().real
        radius = np.asarray(abs(h).sum(axis=1)).ravel() - np.abs(diag)
    else:
        diag = np.diag(h).real
        radius = np.abs(h).sum(axis=1) - np.abs(diag)
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def chebyshev_step(h, psi, dt, bounds=None, tol=1e-15):
    """exp(-i h dt) psi by a Chebyshev series in the rescaled Hamiltonian."""
    lo, hi = bounds if bounds is not None else spectral_bounds(h)
    centre = 0.5 * (hi + lo)
    half = max(0.5 * (hi - lo), 1e-300)
    z = half * dt
    # Bessel coefficients decay super-exponentially once k exceeds z
    kmax = int(z + 10 * z ** (1 / 3) + 30)
    coeffs = jv(np.arange(kmax + 1), z)
    phase = np.exp(-1j * centre * dt)

    def apply(v):
        return (h @ v - centre * v) / half

    t_prev = psi
    t_cur = apply(psi)
    out = coeffs[0] * t_prev + 2 * (-1j) * coeffs[1] * t_cur
    for k in range(2, kmax + 1):
        t_next = 2 * apply(t_cur) - t_prev
        c = coeffs[k]
        out = out + 2 * (-1j) ** k * c * t_next
        t_prev, t_cur = t_cur, t_next
        if abs(c) < tol and k > z:
            break
    return phase * out


def dense_step(h, psi, dt):
    evals, vecs = np.linalg.eigh(h)
    return vecs @ (np.exp(-1j * evals * dt) * (vecs.conj().T @ psi))


class StaticEvolver:
    """exp(-i H t) psi0 for a fixed H at arbitrary increasing times."""

    def __init__(self, h, psi0):
        self.sparse = sp.issparse(h)
        self.psi0 = np.asarray(psi0, dtype=complex)
        if self.sparse:
            self.h = h.tocsr()
            self.bounds = spectral_bounds(self.h)
            self._t = 0.0
            self._psi = self.psi0
        else:
            self.evals, self.vecs = np.linalg.eigh(np.asarray(h))
            self.coeffs = self.vecs.conj().T @ self.psi0

    def at(self, t):
        if not self.sparse:
            return self.vecs @ (np.exp(-1j * self.evals * t) * self.coeffs)
        if t < self._t:
            self._t, self._psi = 0.0, self.psi0
        if t > self._t:
            self._psi = chebyshev_step(self.h, self._psi, t - self._t, self.bounds)
            self._t = t
        return self._psi


def midpoint_evolve(h_of_t, psi0, times, dt_max, on_sample=None, sparse=None):
    """Piecewise-constant midpoint stepping through the sample times.

    ``on_sample(i, t, psi)`` is called at every sample; returns the final
    state and the total number of steps taken.
    """
    psi = np.asarray(psi0, dtype=complex)
    steps = 0
    if on_sample is not None:
        on_sample(0, times[0], psi)
    for i in range(1, len(times)):
        t0, t1 = times[i - 1], times[i]
        m = max(1, math.ceil((t1 - t0) / dt_max - 1e-12))
        dt = (t1 - t0) / m
        for j in range(m):
            h = h_of_t(t0 + (j + 0.5) * dt)
            if sparse if sparse is not None else sp.issparse(h):
                psi = chebyshev_step(h, psi, dt)
            else:
                psi = dense_step(np.asarray(h), psi, dt)
        steps += m
        if on_sample is not None:
            on_sample(i, t1, psi)
    return psi, steps


def window_ladder(lo, hi):
    """Annihilation operator restricted to Fock levels lo..hi-1."""
    n = np.arange(lo + 1, hi, dtype=float)
    return sp.diags(np.sqrt(n), 1, shape=(hi - lo, hi - lo), format="csr", dtype=complex)


def ode_evolve(rhs, psi0, t_span, t_eval, rtol, atol):
    """Adaptive 8th-order Runge-Kutta (DOP853) for i psi' = H(t) psi."""
    from scipy.integrate import solve_ivp

    sol = solve_ivp(rhs, t_span, psi0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y, sol.nfev
