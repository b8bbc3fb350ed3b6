"""Ring geometry, collective-mode transform, frequencies and wave vectors.

N identical oscillators of mass m sit on a ring of radius R, coupled to their
nearest neighbours by springs of constant kappa.  A real Fourier transform
splits the motion into one free centre-of-mass coordinate and N-1 relative
modes.  Because the coupling potential is periodic in the ring perimeter
L = 2*pi*R, each relative mode k lives on an effective cell of length
l_k = L * M[k][1] and acquires a Bloch phase theta_k = q_k * l_k set by the
quantised total momentum P0(n) = n*hbar/R.

Conventions
-----------
* Modes are 1-based, k = 1..N-1; the centre of mass is not a mode entry.
* Rows of the transform use sqrt(2/N)*cos(2*pi*k*j/N) for k <= N/2 and
  sqrt(2/N)*sin(2*pi*k*j/N) for k > N/2, columns j = 1..N-1 (the j = N
  column is absorbed into the centre-of-mass coordinate).
* For even N the k = N/2 row keeps the uniform sqrt(2/N) prefactor; the
  matching wave-vector solution then carries q_{N/2} = q/2.
* All quantities are strict SI internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import CODATA2018, PhysicalConstants

# |l_k| below this fraction of L counts as a degenerate (zero) period.
DEGENERATE_PERIOD_CUTOFF = 1e-12


class ModeConventionError(ValueError):
    """Closed-form wave vectors failed the boundary-condition residual check."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class RingParams:
    """Physical configuration of the ring of oscillators (SI units)."""

    N: int            # particle count, >= 3
    m: float          # oscillator mass, kg
    kappa: float      # spring constant, N/m
    R: float          # ring radius, m
    T: float          # temperature, K
    constants: PhysicalConstants = field(default=CODATA2018, repr=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValueError(f"N must be an integer >= 3, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("m", "kappa", "R"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.T >= 0.0:
            raise ValueError(f"T must be non-negative, got {self.T}")

    @property
    def L(self) -> float:
        """Ring perimeter 2*pi*R, m."""
        return 2.0 * math.pi * self.R

    def theta_n(self, n: int) -> float:
        """Boundary-condition phase theta_n = 2*pi*n/N (not reduced)."""
        return 2.0 * math.pi * n / self.N

    def reduce_n(self, n: int) -> int:
        """Symmetric residue of n modulo N, in (-N/2, N/2].

        theta_n is defined modulo 2*pi, so n and n + mu*N describe the same
        boundary condition; all spectral quantities are computed from this
        canonical representative.
        """
        r = int(n) % self.N
        return r if r <= self.N // 2 else r - self.N

    def kinetic_energy(self, n: int) -> float:
        """Centre-of-mass kinetic energy n^2*hbar^2/(2*m*N*R^2), J."""
        hbar = self.constants.hbar
        return (n * n) * hbar * hbar / (2.0 * self.m * self.N * self.R * self.R)


def build_transform_matrix(params: RingParams) -> np.ndarray:
    """Real Fourier transform matrix, shape (N-1, N-1).

    Row k, column j holds sqrt(2/N)*cos(2*pi*k*j/N) for 1 <= k <= N/2 and
    sqrt(2/N)*sin(2*pi*k*j/N) for k > N/2.  As length-N Fourier rows
    (including the absorbed j = N column) the rows are orthonormal, except
    that the k = N/2 row of even N carries norm sqrt(2) under the uniform
    prefactor convention.
    """
    N = params.N
    k = np.arange(1, N, dtype=float)[:, None]
    j = np.arange(1, N, dtype=float)[None, :]
    ang = 2.0 * math.pi * k * j / N
    M = np.where(k <= N / 2.0, np.cos(ang), np.sin(ang))
    M *= math.sqrt(2.0 / N)
    return M


def mode_frequencies(params: RingParams) -> np.ndarray:
    """Mode angular frequencies omega_k = 2*sqrt(kappa/m)*|sin(pi*k/N)|, rad/s.

    The argument is folded to min(k, N-k) so the mirror symmetry
    omega_k = omega_{N-k} holds exactly in floating point.
    """
    k = np.arange(1, params.N, dtype=float)
    k = np.minimum(k, params.N - k)
    return 2.0 * math.sqrt(params.kappa / params.m) * np.abs(np.sin(math.pi * k / params.N))


def _wave_vector_array(params: RingParams, n: int) -> np.ndarray:
    N = params.N
    q = math.sqrt(2.0) * n / (math.sqrt(N) * params.R)
    out = np.zeros(N - 1)
    if N % 2 == 1:
        out[: (N - 1) // 2] = q
    else:
        out[: N // 2 - 1] = q
        out[N // 2 - 1] = 0.5 * q
    return out


def wave_vector_residual(params: RingParams, n: int) -> float:
    """Max-norm residual of the boundary-condition linear system.

    The N-1 single-valuedness constraints read, one per displaced oscillator
    j0 = 1..N-1:  L * sum_k M[k][j0] * q_k + theta_n = 0, i.e. the system
    involves the transpose of the mode transform.
    """
    M = build_transform_matrix(params)
    q = _wave_vector_array(params, n)
    resid = params.L * (M.T @ q) + params.theta_n(n)
    return float(np.max(np.abs(resid)))


def wave_vectors(params: RingParams, n: int) -> np.ndarray:
    """Mode wave vectors q_k for total-momentum quantum number n, 1/m.

    Closed form with q = sqrt(2)*n/(sqrt(N)*R): all modes k < N/2 carry q,
    k = N/2 (even N) carries q/2, and k > N/2 carry zero.  The result is
    checked against the boundary-condition linear system; a residual above
    1e-9*|theta_n| signals a transform-convention mismatch and raises.
    """
    q = _wave_vector_array(params, n)
    if n != 0:
        resid = wave_vector_residual(params, n)
        tol = 1e-9 * abs(params.theta_n(n))
        if resid >= tol:
            raise ModeConventionError(
                f"wave-vector residual {resid:.3e} exceeds {tol:.3e} for n={n}; "
                "transform matrix convention does not match the closed form",
                residual=resid,
            )
    return q


def relative_periods(params: RingParams, M: np.ndarray) -> np.ndarray:
    """Signed mode periods l_k = L * M[k][1] (column j=1 of the transform), m.

    Consumers use |l_k|; modes with |l_k| < 1e-12*L are degenerate (shifting
    one oscillator by L does not move that mode coordinate, so no twisted
    boundary condition applies).
    """
    return params.L * M[:, 0]


def degenerate_period_mask(params: RingParams, l: np.ndarray) -> np.ndarray:
    """Boolean mask of modes whose period is numerically zero."""
    return np.abs(l) < DEGENERATE_PERIOD_CUTOFF * params.L


@dataclass(frozen=True)
class ModeTable:
    """Per-mode derived quantities for a given ring configuration.

    q1 holds the wave vectors at n = 1; q scales linearly, q_k(n) = n*q1_k.
    theta_mode(k, n) is the canonical per-mode Bloch phase: n is first
    reduced to its symmetric residue (the C_N symmetry of theta_n), which
    makes the resulting spectrum exactly periodic and even in n.
    """

    params: RingParams
    M: np.ndarray
    omega: np.ndarray
    q1: np.ndarray
    l: np.ndarray
    degenerate: np.ndarray

    def theta_mode(self, k: int, n: int) -> float:
        """Bloch phase of mode k at momentum quantum number n (canonical)."""
        n_star = self.params.reduce_n(n)
        return self.q1[k - 1] * n_star * self.l[k - 1]

    def solves_needed(self) -> np.ndarray:
        """Modes whose levels depend on n (nonzero q and non-degenerate period)."""
        return (self.q1 != 0.0) & ~self.degenerate


def build_mode_table(params: RingParams) -> ModeTable:
    M = build_transform_matrix(params)
    l = relative_periods(params, M)
    return ModeTable(
        params=params,
        M=M,
        omega=mode_frequencies(params),
        q1=wave_vectors(params, 1),
        l=l,
        degenerate=degenerate_period_mask(params, l),
    )
