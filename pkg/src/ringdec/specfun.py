"""Self-contained special-function kernel.

Real-argument Kummer (confluent hypergeometric) 1F1 and its derivative,
integer-order Bessel J, the imaginary error function with an overflow-safe
envelope, and an embedded-pair adaptive quadrature used as the oracle
integrator in tests.

Everything here is pure, stateless and reentrant.  Accuracy targets sit at
1e-10 .. 1e-12 on the exercised domains, two orders below the tolerances
used downstream.

Numerical notes
---------------
* 1F1(a;b;z) is evaluated by the ascending series for z >= 0.  On the
  exercised domain (|a| modest, b in {1/2, 3/2, 5/2}) the series at positive
  argument has at most a few leading sign flips and no sustained
  cancellation, so it is stable up to z = 200.  Negative arguments are
  mapped to positive ones through the Kummer transformation
  1F1(a;b;z) = exp(z)*1F1(b-a;b;-z); evaluating the transformation in the
  opposite direction (alternating series at large |z|) loses ~z/ln(10)
  digits to cancellation and is avoided.
* All series accumulate with compensated (Kahan) summation and converge
  per element, so batched evaluations are bit-identical to scalar ones.
* Bessel J uses the ascending series for |z| <= 12 and Miller's downward
  recurrence with the J_0 + 2*sum J_{2k} = 1 normalisation above.
* erfi uses its Taylor series (all terms positive) for |x| <= 3 and
  2*exp(x^2)*D(x)/sqrt(pi) with the Dawson function D elsewhere; D is
  computed from the integral D(x) = int_0^x exp(u*(u-2x)) du, whose
  integrand is a smooth decaying exponential for x > 3.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

_SQRT_PI = math.sqrt(math.pi)
_EPS = float(np.finfo(float).eps)

_BESSEL_SERIES_MAX_Z = 12.0
_BESSEL_MAX_ORDER = 200
_BESSEL_MAX_Z = 1.0e4
_KUMMER_MAX_Z = 200.0
_ERFI_TAYLOR_MAX = 3.0
_ERFI_MAX_X = 26.0


class SeriesConvergenceError(RuntimeError):
    """A series did not meet its tolerance within max_terms."""

    def __init__(self, message, partial=None, terms=None):
        super().__init__(message)
        self.partial = partial
        self.terms = terms


class QuadratureError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control for the power-series kernels."""

    rel_tol: float = 1e-15
    max_terms: int = 500

    def __post_init__(self):
        if not 0.0 < self.rel_tol <= 1e-6:
            raise ValueError(f"rel_tol must lie in (0, 1e-6], got {self.rel_tol}")
        if self.max_terms < 50:
            raise ValueError(f"max_terms must be >= 50, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


def _hyp1f1_series(a, b, z, ctrl: SeriesControl = DEFAULT_SERIES) -> np.ndarray:
    """1F1(a;b;z) for z >= 0 by the ascending series, elementwise.

    Inputs broadcast.  Each element freezes once two consecutive terms drop
    below rel_tol of its partial sum (or below the rounding floor of its
    largest term), so a result never depends on what else sits in the batch;
    converged elements are compacted out of the working set, keeping mixed
    batches (small and large z together) cheap.
    """
    a, b, z = np.broadcast_arrays(
        np.asarray(a, float), np.asarray(b, float), np.asarray(z, float)
    )
    if np.any(z < 0.0):
        raise ValueError("_hyp1f1_series requires z >= 0")
    shape = a.shape
    out = np.empty(shape)
    a = a.ravel().astype(float)
    b = b.ravel().astype(float)
    z = z.ravel().astype(float)
    flat_out = out.reshape(-1)
    idx = np.arange(a.size)
    term = np.ones(a.size)
    total = np.ones(a.size)
    comp = np.zeros(a.size)
    peak = np.ones(a.size)
    small_prev = np.zeros(a.size, dtype=bool)

    for k in range(ctrl.max_terms):
        term = term * ((a + k) * z / ((b + k) * (k + 1.0)))
        # Kahan step
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        np.maximum(peak, np.abs(term), out=peak)
        small = np.abs(term) <= ctrl.rel_tol * np.abs(total) + _EPS * peak
        done = small & small_prev
        if done.any():
            flat_out[idx[done]] = total[done]
            keep = ~done
            if not keep.any():
                return out
            a, b, z = a[keep], b[keep], z[keep]
            term, total, comp, peak = term[keep], total[keep], comp[keep], peak[keep]
            small_prev = small[keep]
            idx = idx[keep]
        else:
            small_prev = small

    flat_out[idx] = total
    raise SeriesConvergenceError(
        f"1F1 series did not converge within {ctrl.max_terms} terms "
        f"({idx.size} of {out.size} elements open)",
        partial=out,
        terms=ctrl.max_terms,
    )


def _check_kummer_domain(b: float, z: float) -> None:
    if b <= 0.0 and b == round(b):
        raise ValueError(f"1F1 undefined for non-positive integer b={b}")
    if abs(z) > _KUMMER_MAX_Z:
        raise ValueError(f"|z|={abs(z)} outside supported range <= {_KUMMER_MAX_Z}")


def kummer_1f1(a: float, b: float, z: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Confluent hypergeometric 1F1(a; b; z), real arguments, |z| <= 200.

    Negative z is mapped to the stable positive-argument series through
    1F1(a;b;z) = exp(z)*1F1(b-a;b;-z).
    """
    _check_kummer_domain(b, z)
    if z < 0.0:
        return math.exp(z) * float(_hyp1f1_series(b - a, b, -z, ctrl))
    return float(_hyp1f1_series(a, b, z, ctrl))


def kummer_1f1_dz(a: float, b: float, z: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """d/dz 1F1(a; b; z) = (a/b) * 1F1(a+1; b+1; z)."""
    _check_kummer_domain(b, z)
    return (a / b) * kummer_1f1(a + 1.0, b + 1.0, z, ctrl)


# ----------------------------------------------------------------------
# Bessel J of integer order
# ----------------------------------------------------------------------

def _besselj_series_orders(orders: np.ndarray, z: float,
                           ctrl: SeriesControl = DEFAULT_SERIES) -> np.ndarray:
    """Ascending series J_g(z) for an array of orders g >= 0, 0 <= z <= ~12."""
    g = np.asarray(orders, dtype=float)
    if z == 0.0:
        return np.where(g == 0, 1.0, 0.0)
    # first term (z/2)^g / g!
    lg = np.array([math.lgamma(gi + 1.0) for gi in g])
    term = np.exp(g * math.log(0.5 * z) - lg)
    total = term.copy()
    comp = np.zeros_like(term)
    peak = np.abs(term)
    active = np.ones(g.shape, dtype=bool)
    small_prev = np.zeros(g.shape, dtype=bool)
    zz = -0.25 * z * z
    for k in range(ctrl.max_terms):
        if not active.any():
            return total
        new_term = term * zz / ((k + 1.0) * (g + k + 1.0))
        y = new_term - comp
        t = total + y
        new_comp = (t - total) - y
        term = np.where(active, new_term, term)
        total = np.where(active, t, total)
        comp = np.where(active, new_comp, comp)
        peak = np.where(active, np.maximum(peak, np.abs(term)), peak)
        small = np.abs(term) <= ctrl.rel_tol * np.abs(total) + _EPS * peak
        done = active & small & small_prev
        small_prev = np.where(active, small, small_prev)
        active = active & ~done
    raise SeriesConvergenceError(
        f"Bessel series did not converge within {ctrl.max_terms} terms at z={z}",
        partial=total, terms=ctrl.max_terms,
    )


def _besselj_column_miller(g_max: int, z: float) -> np.ndarray:
    """J_0(z)..J_{g_max}(z) by downward recurrence, z > 0.

    Starts high enough above max(g_max, z) that the seed value is negligible
    and normalises with J_0 + 2*sum_{k>=1} J_{2k} = 1.
    """
    start = int(max(g_max, math.ceil(z)) + 25 + 10.0 * max(z, 1.0) ** (1.0 / 3.0))
    out = np.zeros(g_max + 1)
    jp = 0.0           # J_{m+1}, unnormalised
    jc = 1e-30         # J_m
    norm = 0.0
    for m in range(start, 0, -1):
        jm = (2.0 * m / z) * jc - jp
        jp = jc
        jc = jm
        if m - 1 <= g_max:
            out[m - 1] = jc
        if (m - 1) % 2 == 0:
            norm += 2.0 * jc
        if abs(jc) > 1e250:
            jc *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            out *= 1e-250
    norm -= jc  # J_0 counted once, not twice
    return out / norm


def bessel_j(gamma: int, z: float) -> float:
    """Bessel function of the first kind, integer order.

    |gamma| <= 200, |z| <= 1e4.  Negative orders and arguments use
    J_{-g}(z) = (-1)^g J_g(z) and J_g(-z) = (-1)^g J_g(z).
    """
    if int(gamma) != gamma:
        raise ValueError(f"order must be an integer, got {gamma}")
    gamma = int(gamma)
    if abs(gamma) > _BESSEL_MAX_ORDER:
        raise ValueError(f"|gamma|={abs(gamma)} outside supported range <= {_BESSEL_MAX_ORDER}")
    if abs(z) > _BESSEL_MAX_Z:
        raise ValueError(f"|z|={abs(z)} outside supported range <= {_BESSEL_MAX_Z}")
    sign = 1.0
    if gamma < 0:
        gamma = -gamma
        if gamma % 2:
            sign = -sign
    if z < 0.0:
        z = -z
        if gamma % 2:
            sign = -sign
    if z == 0.0:
        return sign if gamma == 0 else 0.0
    if z <= _BESSEL_SERIES_MAX_Z:
        val = float(_besselj_series_orders(np.array([gamma], dtype=float), z)[0])
    else:
        val = float(_besselj_column_miller(gamma, z)[gamma])
    return sign * val


def besselj_column(g_max: int, z: float) -> np.ndarray:
    """J_0(z) .. J_{g_max}(z) in one pass (series or Miller, same split as bessel_j)."""
    if g_max < 0 or g_max > _BESSEL_MAX_ORDER:
        raise ValueError(f"g_max must lie in [0, {_BESSEL_MAX_ORDER}]")
    if abs(z) > _BESSEL_MAX_Z:
        raise ValueError(f"|z|={abs(z)} outside supported range <= {_BESSEL_MAX_Z}")
    sign = 1.0
    if z < 0.0:
        z = -z
        sign = -1.0
    if z == 0.0:
        out = np.zeros(g_max + 1)
        out[0] = 1.0
        return out
    if z <= _BESSEL_SERIES_MAX_Z:
        out = _besselj_series_orders(np.arange(g_max + 1, dtype=float), z)
    else:
        out = _besselj_column_miller(g_max, z)
    if sign < 0.0:  # J_g(-z) = (-1)^g J_g(z)
        out = out.copy()
        out[1::2] *= -1.0
    return out


# ----------------------------------------------------------------------
# Imaginary error function and Dawson integral
# ----------------------------------------------------------------------

def _erfi_taylor(x: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """erfi by its Taylor series; all terms positive, |x| <= ~3."""
    x2 = x * x
    term = x
    total = x
    comp = 0.0
    for k in range(ctrl.max_terms):
        term = term * x2 * (2.0 * k + 1.0) / ((k + 1.0) * (2.0 * k + 3.0))
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if abs(term) <= ctrl.rel_tol * abs(total):
            return (2.0 / _SQRT_PI) * total
    raise SeriesConvergenceError(
        f"erfi series did not converge at x={x}", partial=total, terms=ctrl.max_terms
    )


def dawson(x: float) -> float:
    """Dawson integral D(x) = exp(-x^2) * int_0^x exp(t^2) dt, x >= 0."""
    if x < 0.0:
        return -dawson(-x)
    if x <= _ERFI_TAYLOR_MAX:
        return math.exp(-x * x) * 0.5 * _SQRT_PI * _erfi_taylor(x)
    # D(x) = int_0^x exp(u*(u - 2x)) du; integrand decays like exp(-2*x*u)
    u_cut = min(x, 45.0 / (2.0 * x) + 1.0)
    return adaptive_quad(lambda u: math.exp(u * (u - 2.0 * x)), 0.0, u_cut, tol=1e-15)


def erfi(x: float) -> float:
    """Imaginary error function erfi(x) = (2/sqrt(pi)) * int_0^x exp(s^2) ds.

    Odd function; |x| <= 26 (erfi(26) is near the double-precision overflow
    edge; beyond that use erfi_scaled_envelope).
    """
    if abs(x) > _ERFI_MAX_X:
        raise ValueError(
            f"|x|={abs(x)} would overflow; use erfi_scaled_envelope for the "
            "exp(-x^2)-weighted combination"
        )
    if abs(x) <= _ERFI_TAYLOR_MAX:
        return _erfi_taylor(x)
    val = 2.0 * math.exp(x * x) * dawson(abs(x)) / _SQRT_PI
    return val if x >= 0.0 else -val


def erfi_scaled_envelope(u: float) -> float:
    """exp(-u^2) * sqrt(1 + erfi(u)^2), computed without overflow for u >= 0.

    For large u this tends to 2*D(u)/sqrt(pi) ~ 1/(u*sqrt(pi)) with the
    Dawson function D.
    """
    if u < 0.0:
        raise ValueError(f"u must be >= 0, got {u}")
    if u <= _ERFI_TAYLOR_MAX:
        e = _erfi_taylor(u)
        return math.exp(-u * u) * math.sqrt(1.0 + e * e)
    g = math.exp(-u * u) if u < 27.0 else 0.0
    d = 2.0 * dawson(u) / _SQRT_PI      # = exp(-u^2)*erfi(u)
    return math.hypot(g, d)


# ----------------------------------------------------------------------
# Adaptive quadrature (embedded Gauss pair)
# ----------------------------------------------------------------------

_GL_LO_X, _GL_LO_W = np.polynomial.legendre.leggauss(7)
_GL_HI_X, _GL_HI_W = np.polynomial.legendre.leggauss(15)


def _quad_panel(f, a: float, b: float) -> tuple[float, float]:
    """High-order estimate and error bound |G15 - G7| on one panel."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    hi = 0.0
    for x, w in zip(_GL_HI_X, _GL_HI_W):
        v = f(c + h * x)
        if not math.isfinite(v):
            raise ValueError(f"integrand not finite at x={c + h * x}")
        hi += w * v
    lo = 0.0
    for x, w in zip(_GL_LO_X, _GL_LO_W):
        lo += w * f(c + h * x)
    hi *= h
    lo *= h
    return hi, abs(hi - lo)


def adaptive_quad(f, a: float, b: float, tol: float, max_panels: int = 4000) -> float:
    """Adaptive integral of f over [a, b] to absolute tolerance tol.

    Embedded Gauss 7/15 pair with worst-panel-first bisection.  Raises
    QuadratureError (carrying the best estimate and its error bound) if the
    tolerance is not met within max_panels panels.
    """
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if a == b:
        return 0.0
    est, err = _quad_panel(f, a, b)
    # heap of (-error, tiebreak, a, b, estimate, error)
    counter = 0
    heap = [(-err, counter, a, b, est, err)]
    total_err = err
    total = est
    panels = 1
    while total_err > tol:
        if panels >= max_panels:
            raise QuadratureError(
                f"quadrature error bound {total_err:.3e} above tol {tol:.3e} "
                f"after {panels} panels",
                estimate=total, error_bound=total_err,
            )
        neg_err, _, pa, pb, pest, perr = heapq.heappop(heap)
        pm = 0.5 * (pa + pb)
        if pm == pa or pm == pb:   # interval at rounding limit; keep its estimate
            heapq.heappush(heap, (0.0, counter + 1, pa, pb, pest, 0.0))
            total_err -= perr
            counter += 1
            continue
        e1, r1 = _quad_panel(f, pa, pm)
        e2, r2 = _quad_panel(f, pm, pb)
        total += (e1 + e2) - pest
        total_err += (r1 + r2) - perr
        counter += 1
        heapq.heappush(heap, (-r1, counter, pa, pm, e1, r1))
        counter += 1
        heapq.heappush(heap, (-r2, counter, pm, pb, e2, r2))
        panels += 1
    return total
