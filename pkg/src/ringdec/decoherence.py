"""Thermal-ensemble decoherence of the relative-motion qubit.

The qubit lives in the {alpha = 0, alpha = 1} levels of mode k = 1 while
the centre of mass sits in a thermal mixture over the momentum quantum
number n.  Tracing out the centre of mass leaves the off-diagonal weight

    F(t) = | sum_n w_n * exp(-i * deltaE(n) * t / hbar) |,

with Boltzmann weights w_n over the ground thin spectrum and deltaE(n) =
eps_1(n,1) - eps_1(n,0).  Two closed-form approximations are provided: a
Bessel series for the cosine-shaped splitting and a Gaussian-times-Erfi
envelope for the single-period (linear-in-|n|) regime, together with the
regime diagnostics that separate them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import RingParams
from .specfun import besselj_column, erfi_scaled_envelope
from .spectrum import CoverageError, LinearizedCoeffs, ThinSpectrum

ENSEMBLE_TAIL_CUTOFF = 1e-14


class DecoherenceError(RuntimeError):
    """Decoherence-path failure (undefined scale or regime violation)."""


@dataclass(frozen=True)
class ThermalEnsemble:
    """Normalised Boltzmann weights of the centre-of-mass momentum.

    Z is the partition function relative to the ground level,
    sum_n exp(-beta*(E(n,0) - E(0,0))); weights always sum to one.  A zero
    temperature collapses the ensemble onto n = 0 (flagged, not an error).
    """

    beta: float
    n: np.ndarray
    weights: np.ndarray
    Z: float
    n_trunc: int
    degenerate: bool = False


@dataclass(frozen=True)
class DecoherenceTrace:
    """Time series of the decoherence factor for one evaluation method."""

    t: np.ndarray
    F: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RegimeDiagnostics:
    """Scale parameters separating the decoherence regimes."""

    n_fwhm: float        # width of the thermal Gaussian over n
    r: float             # n_fwhm / (N/4); r < 1 is the single-period regime
    eta_cut: float       # 4*pi^2/(N^2*beta*delta_e_prime)
    gamma_cutoff: int    # smallest gamma with exp(-eta*gamma^2) <= 1e-2
    tau: float           # Gaussian decay scale of the envelope, s
    tau_spon: float      # spontaneous-decoherence time, s


def build_ensemble(spec: ThinSpectrum, params: RingParams,
                   tail_cutoff: float = ENSEMBLE_TAIL_CUTOFF) -> ThermalEnsemble:
    """Thermal ensemble over n, truncated at whole thin-spectrum periods.

    n_trunc is the smallest multiple of N whose relative weight drops below
    tail_cutoff; keeping whole periods preserves the periodicity-based
    invariants of the exact decoherence factor.
    """
    N = params.N
    if params.T == 0.0:
        return ThermalEnsemble(beta=math.inf, n=np.array([0]),
                               weights=np.array([1.0]), Z=1.0, n_trunc=0,
                               degenerate=True)
    beta = 1.0 / (params.constants.k_B * params.T)
    E0 = spec.energy(0, 0)
    n_trunc = 0
    for mult in range(1, 100001):
        n_trunc = mult * N
        if math.exp(-beta * (spec.energy(n_trunc, 0) - E0)) < tail_cutoff:
            break
    else:
        raise DecoherenceError("ensemble truncation did not close below cutoff")
    n = np.arange(-n_trunc, n_trunc + 1)
    energies = np.array([spec.energy(int(ni), 0) for ni in n])
    w = np.exp(-beta * (energies - E0))
    Z = math.fsum(w)
    return ThermalEnsemble(beta=beta, n=n, weights=w / Z, Z=Z, n_trunc=n_trunc)


def delta_E(spec: ThinSpectrum, n: int) -> float:
    """Qubit splitting deltaE(n) = eps_1(n,1) - eps_1(n,0) from the table, J."""
    return spec.delta_E(n)


def delta_E_cos(coeffs: LinearizedCoeffs, params: RingParams, spec: ThinSpectrum,
                n: int) -> float:
    """Cosine surrogate -hbar*omega_1*(g/2)*cos(4*pi*n/N), J.

    Used only inside the Bessel approximation; the exact path always reads
    the tabulated splitting.
    """
    hbar = params.constants.hbar
    omega1 = spec.table.omega[0]
    return -hbar * omega1 * 0.5 * coeffs.g * math.cos(4.0 * math.pi * n / params.N)


def _kahan_complex_sum(re_terms: np.ndarray, im_terms: np.ndarray):
    """Compensated sums of the rows of two (n_terms, n_t) stacks."""
    out = []
    for terms in (re_terms, im_terms):
        total = np.zeros(terms.shape[1])
        comp = np.zeros(terms.shape[1])
        for row in terms:
            y = row - comp
            t = total + y
            comp = (t - total) - y
            total = t
        out.append(total)
    return out[0], out[1]


def decoherence_exact(ens: ThermalEnsemble, spec: ThinSpectrum,
                      times: np.ndarray) -> DecoherenceTrace:
    """Exact decoherence factor |sum_n w_n exp(-i deltaE(n) t / hbar)|.

    The splitting is N-periodic in n, so the ensemble is folded onto the
    N distinct phase frequencies before the compensated complex summation.
    """
    times = np.asarray(times, dtype=float)
    params = spec.params
    N = params.N
    hbar = params.constants.hbar

    folded: dict[int, float] = {}
    for ni, wi in zip(ens.n, ens.weights):
        n_star = params.reduce_n(int(ni))
        folded[n_star] = folded.get(n_star, 0.0) + wi
    residues = np.array(sorted(folded))
    w = np.array([folded[int(r)] for r in residues])
    dE = np.array([spec.delta_E(int(r)) for r in residues])

    phase = np.outer(dE / hbar, times)          # (n_residues, n_t)
    re, im = _kahan_complex_sum(w[:, None] * np.cos(phase),
                                w[:, None] * (-np.sin(phase)))
    F = np.hypot(re, im)
    return DecoherenceTrace(t=times, F=F, method="exact",
                            meta={"n_trunc": ens.n_trunc, "N": N,
                                  "degenerate": ens.degenerate})


def regime(params: RingParams, coeffs: LinearizedCoeffs, spec: ThinSpectrum,
           cutoff_threshold: float = 1e-2) -> RegimeDiagnostics:
    """Regime diagnostics for T > 0.

    n_fwhm = sqrt(2 m N R^2/(beta hbar^2)); r = n_fwhm/(N/4);
    eta = 4 pi^2/(N^2 beta delta_e_prime); gamma_cutoff is the smallest
    integer with exp(-eta gamma^2) <= cutoff_threshold; tau and tau_spon
    follow from the envelope decay.
    """
    if params.T <= 0.0:
        raise DecoherenceError("regime diagnostics require T > 0")
    hbar = params.constants.hbar
    beta = 1.0 / (params.constants.k_B * params.T)
    N = params.N
    n_fwhm = math.sqrt(2.0 * params.m * N * params.R ** 2 / (beta * hbar * hbar))
    r = n_fwhm / (N / 4.0)
    eta = 4.0 * math.pi ** 2 / (N * N * beta * coeffs.delta_e_prime)
    gamma_cutoff = max(1, math.ceil(math.sqrt(-math.log(cutoff_threshold) / eta)))
    if coeffs.delta_g == 0.0:
        tau = math.inf          # flat splitting: no envelope decay at all
    else:
        tau = envelope_time_scale(params, coeffs, spec)
    tau_spon = math.sqrt(2.0 * (math.pi - 2.0) / math.pi) * tau
    return RegimeDiagnostics(n_fwhm=n_fwhm, r=r, eta_cut=eta,
                             gamma_cutoff=gamma_cutoff, tau=tau,
                             tau_spon=tau_spon)


def envelope_time_scale(params: RingParams, coeffs: LinearizedCoeffs,
                        spec: ThinSpectrum) -> float:
    """Gaussian decay scale tau of the Erfi envelope, s.

    With the linear splitting deltaE(n) = delta_g*|n|*hbar*omega_1 the
    Gaussian integral gives tau = 2*sqrt(beta*delta_e_prime)/(|delta_g|*
    omega_1); this equals sqrt(beta N^4 m delta_e_prime/(pi^2 dg^2 kappa))
    with the N-normalised slope dg = N*delta_g and the small-angle omega_1.
    """
    if coeffs.delta_g == 0.0:
        raise DecoherenceError("delta_g = 0: envelope time scale undefined")
    if params.T <= 0.0:
        raise DecoherenceError("envelope time scale requires T > 0")
    beta = 1.0 / (params.constants.k_B * params.T)
    omega1 = spec.table.omega[0]
    return 2.0 * math.sqrt(beta * coeffs.delta_e_prime) / (abs(coeffs.delta_g) * omega1)


def decoherence_bessel(coeffs: LinearizedCoeffs, params: RingParams,
                       spec: ThinSpectrum, times: np.ndarray,
                       gamma_cutoff: int | None = None) -> DecoherenceTrace:
    """Bessel-series decoherence factor for the cosine-shaped splitting.

    F(t) = |sum_gamma J_gamma(g*omega_1*t/2) * i^gamma * exp(-eta*gamma^2)|
    with eta = 4*pi^2/(N^2*beta*delta_e_prime).  The continuum (Gaussian)
    partition function cancels against the gamma = 0 weight, so F(0) = 1
    identically.  The reading of the series index follows the standard
    plane-wave-in-cosine expansion.
    """
    if not coeffs.delta_e_prime > 0.0:
        raise DecoherenceError("delta_e_prime must be positive for the Bessel path")
    if params.T <= 0.0:
        raise DecoherenceError("Bessel path requires T > 0")
    times = np.asarray(times, dtype=float)
    beta = 1.0 / (params.constants.k_B * params.T)
    N = params.N
    eta = 4.0 * math.pi ** 2 / (N * N * beta * coeffs.delta_e_prime)
    if gamma_cutoff is None:
        gamma_cutoff = max(1, math.ceil(math.sqrt(-math.log(1e-2) / eta)))
    if gamma_cutoff > 200:
        raise DecoherenceError(
            f"gamma_cutoff={gamma_cutoff} > 200: regime outside the series' "
            "validity; use the exact path"
        )
    omega1 = spec.table.omega[0]
    z = 0.5 * coeffs.g * omega1 * times
    total = np.zeros(times.size, dtype=complex)
    for i, zi in enumerate(z):
        col = besselj_column(gamma_cutoff, zi)
        s = complex(col[0])
        for gamma in range(1, gamma_cutoff + 1):
            # gamma and -gamma terms coincide: J_-g*i^-g = J_g*i^g
            s += 2.0 * (1j ** gamma) * col[gamma] * math.exp(-eta * gamma * gamma)
        total[i] = s
    return DecoherenceTrace(t=times, F=np.abs(total), method="bessel",
                            meta={"eta": eta, "gamma_cutoff": int(gamma_cutoff),
                                  "g": coeffs.g})


def decoherence_erfi(coeffs: LinearizedCoeffs, params: RingParams,
                     spec: ThinSpectrum, times: np.ndarray) -> DecoherenceTrace:
    """Erfi-envelope decoherence factor for the single-period regime.

    F(t) = exp(-(t/tau)^2) * sqrt(1 + Erfi(t/tau)^2), evaluated through the
    overflow-safe scaled form.  Warns when r >= 1 (multi-period regime).
    """
    times = np.asarray(times, dtype=float)
    tau = envelope_time_scale(params, coeffs, spec)
    diag_r = regime(params, coeffs, spec).r
    if diag_r >= 1.0:
        warnings.warn(
            f"erfi envelope outside its regime (r={diag_r:.3g} >= 1)",
            stacklevel=2,
        )
    F = np.array([erfi_scaled_envelope(ti / tau) for ti in np.abs(times)])
    return DecoherenceTrace(t=times, F=F, method="erfi",
                            meta={"tau": tau, "r": diag_r})


def auto_time_grid(coeffs: LinearizedCoeffs, params: RingParams,
                   spec: ThinSpectrum, points: int = 2000) -> np.ndarray:
    """Uniform time grid covering the decay and first-revival window.

    The end point is the larger of 5*tau (envelope decay, when delta_g is
    nonzero) and 40/(|g|*omega_1) (Bessel-oscillation scale, when g is
    nonzero); the single-period and multi-period regimes each make one of
    the two scales meaningful.
    """
    if points < 2:
        raise ValueError("points must be >= 2")
    omega1 = spec.table.omega[0]
    scales = []
    if coeffs.delta_g != 0.0 and params.T > 0.0:
        scales.append(5.0 * envelope_time_scale(params, coeffs, spec))
    if coeffs.g != 0.0:
        scales.append(40.0 / (abs(coeffs.g) * omega1))
    if not scales:
        raise DecoherenceError("no decoherence time scale: delta_g = g = 0")
    return np.linspace(0.0, max(scales), points)


def first_decay_time(trace: DecoherenceTrace, threshold: float = 1.0 / math.e) -> float:
    """First time F crosses below threshold, linearly interpolated.

    Returns +inf when the sampled window never crosses.
    """
    if trace.t.size == 0:
        raise ValueError("empty trace")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    t = trace.t
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("trace times must be strictly increasing")
    F = trace.F
    below = np.nonzero(F < threshold)[0]
    if below.size == 0:
        return math.inf
    i = int(below[0])
    if i == 0:
        return float(t[0])
    f0, f1 = F[i - 1], F[i]
    frac = (f0 - threshold) / (f0 - f1)
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))
