"""Twisted-boundary oscillator levels and the thin spectrum.

Each relative mode is a harmonic oscillator on a periodic cell of
dimensionless length lambda = xi*|l| (xi = sqrt(m*omega/hbar)) with a Bloch
phase theta.  In the scaled coordinate s = xi*X the even/odd cell solutions
are

    f_e(s) = exp(-s^2/2) * 1F1(-nu/2;     1/2; s^2)
    f_o(s) = s * exp(-s^2/2) * 1F1((1-nu)/2; 3/2; s^2)

with the level variable nu = eps/(hbar*omega) - 1/2.  Matching value and
slope across the cell boundary quantises nu through

    G(nu) = f_o*f_e' * cos^2(theta/2) + f_e*f_o' * sin^2(theta/2) = 0

evaluated at s = lambda/2 (primes are d/ds).  G is entire in nu with one
simple root per band, so a sign-change scan plus bisection finds the levels;
a pole screen guards against misreading steep features, following the
tan^2(theta/2) = -f_o f_e'/(f_e f_o') form whose denominator zeros interlace
the roots.

An independent finite-difference oracle diagonalises the gauge-equivalent
Hamiltonian (P + hbar*q)^2/2m + m*omega^2 X^2/2 on the periodic cell; the
momentum shift appears as a complex hopping phase so the discrete problem
keeps the exact theta -> theta + 2*pi invariance of the continuum.

The assembled thin spectrum stores, for every momentum quantum number n and
excitation alpha, the per-mode energies eps_k(n, alpha) and the totals with
the qubit convention (alpha excites mode k = 1, all other modes stay in
their ground level).  n enters only through the canonical symmetric residue
n* in (-N/2, N/2], which makes the table exactly periodic and even in n.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import ModeTable, RingParams, build_mode_table
from .specfun import DEFAULT_SERIES, SeriesControl, _hyp1f1_series

_TWO_PI = 2.0 * math.pi


class SpectrumError(RuntimeError):
    """Base class for spectrum-solver failures."""


class RootCountError(SpectrumError):
    """Fewer eigenlevels found than requested."""

    def __init__(self, message, found):
        super().__init__(message)
        self.found = found


class PoleScreenError(SpectrumError):
    """A sign-change bracket could not be classified as root or pole."""

    def __init__(self, message, bracket):
        super().__init__(message)
        self.bracket = bracket


class RichardsonError(SpectrumError):
    """Grid-doubling check of the finite-difference oracle failed."""


class AssemblyError(SpectrumError):
    """Internal inconsistency while building the discretised Hamiltonian."""


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances, truncations and grid sizes for the level solvers."""

    scan_step: float = 1e-3        # nu grid step for bracketing
    nu_tol: float = 1e-10          # bisection interval tolerance
    nu_floor: float = -0.49        # lower edge of the scan window
    scan_margin: float = 0.6       # window top = alpha_max + scan_margin
    widen_attempts: int = 4        # window doublings when levels sit higher
    pole_refine_points: int = 10   # interior samples for the pole screen
    pole_blowup_factor: float = 10.0
    lambda_min: float = 0.5        # smallest cell size the scan supports
    fd_grid: int = 4096
    fd_seed: int = 12345           # deterministic Lanczos start vector
    series: SeriesControl = field(default=DEFAULT_SERIES)


DEFAULT_SOLVER = SolverConfig()


@dataclass(frozen=True)
class ModeEigenProblem:
    """One mode's periodic-cell eigenproblem.

    lam = xi*|l| is the dimensionless cell size, theta the Bloch phase
    (reduced to (-pi, pi]; the eigencondition depends on it only through
    cos^2 and sin^2 of theta/2), omega the mode frequency in rad/s.
    """

    lam: float
    theta: float
    omega: float

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        th = math.remainder(self.theta, _TWO_PI)
        if th <= -math.pi:
            th += _TWO_PI
        object.__setattr__(self, "theta", th)


@dataclass(frozen=True)
class ModeLevels:
    """Dimensionless levels nu_alpha and the final bracket widths.

    residuals hold the terminal bisection interval width per level (the
    eigencondition magnitude itself scales like exp(lambda^2/4) and is not a
    useful residual measure).
    """

    nu: np.ndarray
    residuals: np.ndarray


# ----------------------------------------------------------------------
# Eigencondition
# ----------------------------------------------------------------------

def _band_parts(nu, lam, ctrl: SeriesControl = DEFAULT_SERIES):
    """Boundary products P_oe = f_o*f_e' and P_eo = f_e*f_o' at s = lam/2.

    Vectorised over broadcast nu and lam.  The four Kummer functions are
    evaluated in a single batched series call.
    """
    nu = np.asarray(nu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    nu_b, lam_b = np.broadcast_arrays(nu, lam)
    z = 0.25 * lam_b * lam_b
    if np.any(z > 200.0):
        raise ValueError("lambda too large: series argument (lambda/2)^2 exceeds 200")
    a_e = -0.5 * nu_b
    a_o = 0.5 * (1.0 - nu_b)
    A = np.stack([a_e, a_e + 1.0, a_o, a_o + 1.0])
    B = np.empty_like(A)
    B[0] = 0.5
    B[1] = 1.5
    B[2] = 1.5
    B[3] = 2.5
    Z = np.broadcast_to(z, A.shape)
    F = _hyp1f1_series(A, B, Z, ctrl)
    m1 = F[0]
    m1p = 2.0 * a_e * F[1]              # d/dz 1F1(a_e; 1/2; z)
    m3 = F[2]
    m3p = (2.0 / 3.0) * a_o * F[3]      # d/dz 1F1(a_o; 3/2; z)
    efac = np.exp(-z)
    p_oe = z * m3 * (2.0 * m1p - m1) * efac
    p_eo = m1 * ((1.0 - z) * m3 + 2.0 * z * m3p) * efac
    return p_oe, p_eo


def _eigencondition_flat(nu, lam, cw2, sw2, ctrl: SeriesControl = DEFAULT_SERIES):
    p_oe, p_eo = _band_parts(nu, lam, ctrl)
    return p_oe * cw2 + p_eo * sw2


def eigencondition(nu: float, prob: ModeEigenProblem,
                   ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Level condition G(nu); its roots are the mode's eigenlevels."""
    if prob.lam <= 0.0:
        raise ValueError("eigencondition requires lam > 0")
    half = 0.5 * prob.theta
    cw2 = math.cos(half) ** 2
    sw2 = math.sin(half) ** 2
    return float(_eigencondition_flat(np.array([nu]), prob.lam, cw2, sw2, ctrl)[0])


# ----------------------------------------------------------------------
# Root finding
# ----------------------------------------------------------------------

def _scan_brackets(g_row: np.ndarray, grid: np.ndarray):
    """Sign-change brackets (lo, hi, g_lo, g_hi) along one scan row."""
    sg = np.where(g_row >= 0.0, 1.0, -1.0)
    flips = np.nonzero(sg[:-1] * sg[1:] < 0.0)[0]
    return grid[flips], grid[flips + 1], g_row[flips], g_row[flips + 1]


def _screen_brackets(lam, cw2, sw2, lo, hi, g_lo, g_hi, cfg: SolverConfig):
    """Classify sign-change brackets as roots or poles.

    A crossing of the entire function G dips to zero inside the bracket; a
    pole of the equivalent tan^2 form blows up instead.  Returns a boolean
    keep-mask; raises PoleScreenError when neither pattern is clear.
    """
    n = lo.size
    if n == 0:
        return np.zeros(0, dtype=bool)
    npts = cfg.pole_refine_points
    frac = (np.arange(1, npts + 1) / (npts + 1.0))[None, :]
    pts = lo[:, None] + (hi - lo)[:, None] * frac
    g_in = _eigencondition_flat(
        pts.ravel(),
        np.repeat(lam, npts),
        np.repeat(cw2, npts),
        np.repeat(sw2, npts),
        cfg.series,
    ).reshape(n, npts)
    g_min = np.min(np.abs(g_in), axis=1)
    end_min = np.minimum(np.abs(g_lo), np.abs(g_hi))
    end_max = np.maximum(np.abs(g_lo), np.abs(g_hi))
    is_root = g_min <= end_max
    is_pole = g_min >= cfg.pole_blowup_factor * end_max
    ambiguous = ~is_root & ~is_pole
    if np.any(ambiguous):
        i = int(np.nonzero(ambiguous)[0][0])
        raise PoleScreenError(
            "cannot classify sign change as root or pole",
            bracket={"lo": float(lo[i]), "hi": float(hi[i]),
                     "g_lo": float(g_lo[i]), "g_hi": float(g_hi[i]),
                     "interior_min": float(g_min[i])},
        )
    if np.any(is_root & (g_min >= end_min)):
        # dip did not undercut both endpoints; accepted because the sign
        # change itself confirms a crossing near one endpoint
        pass
    return is_root


def _bisect_flat(lam, cw2, sw2, lo, hi, g_lo, cfg: SolverConfig):
    """Vectorised bisection on pre-screened brackets; per-element freeze."""
    lo = lo.copy()
    hi = hi.copy()
    sign_lo = np.where(g_lo >= 0.0, 1.0, -1.0)
    while True:
        width = hi - lo
        active = width > cfg.nu_tol
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        mid = 0.5 * (lo[idx] + hi[idx])
        g = _eigencondition_flat(mid, lam[idx], cw2[idx], sw2[idx], cfg.series)
        sg = np.where(g >= 0.0, 1.0, -1.0)
        same = sg == sign_lo[idx]
        lo[idx[same]] = mid[same]
        hi[idx[~same]] = mid[~same]
    return 0.5 * (lo + hi), hi - lo


_SCAN_CHUNK_ELEMENTS = 2_000_000   # cap on batched scan size, elements

# Cells larger than this carry band widths and edge offsets of order
# exp(-lambda^2/4) < 1e-24, below double resolution of the level ladder, so
# the exact oscillator ladder is used directly (also keeps arbitrarily wide
# cells away from the series domain edge (lambda/2)^2 <= 200).
LADDER_LAMBDA = 15.0

# Above this cell size the band slope dF/dnu exceeds the double range and
# the level shift per momentum quantum is < 1e-30; such modes keep g1 = 0.
LINEARIZE_LAMBDA = 12.0


def _scan_job_brackets(lam: float, cw2: np.ndarray, sw2: np.ndarray,
                       need: int, p_oe: np.ndarray, p_eo: np.ndarray,
                       grid: np.ndarray):
    """Per-phase brackets of one mode from precomputed boundary products.

    Returns (rows, ok) where rows is a list of (lo, hi, g_lo, g_hi) per
    phase and ok says every phase exposed at least `need` sign changes.
    """
    rows = [_scan_brackets(p_oe * c + p_eo * s, grid) for c, s in zip(cw2, sw2)]
    ok = all(r[0].size >= need for r in rows)
    return rows, ok


def _free_window_top(lam: float, alpha_max: int, cfg: SolverConfig) -> float:
    """Window top covering the free-rotor regime of small cells.

    A weak cell pushes band alpha towards (2*pi*j + theta)^2/(2*lam^2); the
    estimate pi^2*(alpha_max+2)^2/(2*lam^2) bounds the highest needed band
    for every phase.
    """
    return math.pi ** 2 * (alpha_max + 2.0) ** 2 / (2.0 * lam * lam) \
        - 0.5 + cfg.scan_margin


def _scan_single(lam: float, cw2: np.ndarray, sw2: np.ndarray, need: int,
                 thetas: np.ndarray, cfg: SolverConfig, hi_start: float):
    """Scan one mode alone, doubling the window top until enough levels show."""
    hi_edge = hi_start
    for attempt in range(cfg.widen_attempts + 1):
        npts = int(math.ceil((hi_edge - cfg.nu_floor) / cfg.scan_step)) + 1
        grid = cfg.nu_floor + cfg.scan_step * np.arange(npts)
        p_oe, p_eo = _band_parts(grid, lam, cfg.series)
        rows, ok = _scan_job_brackets(lam, cw2, sw2, need, p_oe, p_eo, grid)
        if ok:
            return rows
        hi_edge = cfg.nu_floor + 2.0 * (hi_edge - cfg.nu_floor)
    counts = [r[0].size for r in rows]
    worst = int(np.argmin(counts))
    raise RootCountError(
        f"found {counts[worst]} levels, requested {need} "
        f"(lam={lam:.4g}, theta={thetas[worst]:.4g}, window top {hi_edge:.4g})",
        found=0.5 * (rows[worst][0] + rows[worst][1]),
    )


def _solve_jobs(jobs, alpha_max: int, cfg: SolverConfig):
    """Levels for many (lam, thetas) jobs sharing one alpha_max.

    jobs: list of (lam, thetas array).  Returns a list of (levels, widths)
    pairs, each of shape (len(thetas), alpha_max + 1).  The boundary-product
    scans are batched across jobs and all brackets are screened and bisected
    in one flattened batch, so the per-level cost stays amortised; every
    series element still converges independently, which keeps results
    bit-identical to one-at-a-time solves.
    """
    need = alpha_max + 1
    for lam, _ in jobs:
        if lam < cfg.lambda_min:
            raise SpectrumError(f"lam={lam:.4g} below supported minimum {cfg.lambda_min}")

    hi_edge = alpha_max + cfg.scan_margin
    npts = int(math.ceil((hi_edge - cfg.nu_floor) / cfg.scan_step)) + 1
    grid = cfg.nu_floor + cfg.scan_step * np.arange(npts)

    # jobs whose levels sit above the default window (weak cells) scan alone
    batched = [j for j, (lam, _) in enumerate(jobs)
               if _free_window_top(lam, alpha_max, cfg) <= hi_edge]
    singles = [j for j in range(len(jobs)) if j not in set(batched)]

    job_rows = [None] * len(jobs)
    for j in singles:
        lam, thetas = jobs[j]
        half = 0.5 * np.asarray(thetas, dtype=float)
        cw2, sw2 = np.cos(half) ** 2, np.sin(half) ** 2
        rows = _scan_single(lam, cw2, sw2, need, np.asarray(thetas, float), cfg,
                            hi_start=_free_window_top(lam, alpha_max, cfg))
        job_rows[j] = (rows, cw2, sw2)

    # batched scan for the rest, chunked over jobs to bound memory
    chunk = max(1, _SCAN_CHUNK_ELEMENTS // npts)
    for start in range(0, len(batched), chunk):
        block = batched[start:start + chunk]
        lams = np.array([jobs[j][0] for j in block])
        p_oe, p_eo = _band_parts(grid[None, :], lams[:, None], cfg.series)
        for i, j in enumerate(block):
            lam, thetas = jobs[j]
            half = 0.5 * np.asarray(thetas, dtype=float)
            cw2, sw2 = np.cos(half) ** 2, np.sin(half) ** 2
            rows, ok = _scan_job_brackets(lam, cw2, sw2, need, p_oe[i], p_eo[i], grid)
            if not ok:
                rows = _scan_single(lam, cw2, sw2, need, np.asarray(thetas, float),
                                    cfg, hi_start=cfg.nu_floor + 2.0 * (hi_edge - cfg.nu_floor))
            job_rows[j] = (rows, cw2, sw2)

    # flatten the lowest `need` brackets of every phase
    flat_lam, flat_cw2, flat_sw2 = [], [], []
    flat_lo, flat_hi, flat_glo, flat_ghi = [], [], [], []
    owner_job, owner_theta = [], []
    for j, ((rows, cw2, sw2), (lam, thetas)) in enumerate(zip(job_rows, jobs)):
        for i, (blo, bhi, glo, ghi) in enumerate(rows):
            take = min(blo.size, need + 2)   # spares in case the screen drops one
            for b in range(take):
                flat_lam.append(lam)
                flat_cw2.append(cw2[i])
                flat_sw2.append(sw2[i])
                flat_lo.append(blo[b])
                flat_hi.append(bhi[b])
                flat_glo.append(glo[b])
                flat_ghi.append(ghi[b])
                owner_job.append(j)
                owner_theta.append(i)
    flat = tuple(np.asarray(v) for v in
                 (flat_lam, flat_cw2, flat_sw2, flat_lo, flat_hi, flat_glo, flat_ghi))
    owner_job = np.asarray(owner_job)
    owner_theta = np.asarray(owner_theta)

    keep = _screen_brackets(flat[0], flat[1], flat[2], flat[3], flat[4],
                            flat[5], flat[6], cfg)

    # lowest `need` screened roots per (job, theta); brackets arrive ascending
    take = np.zeros(owner_job.size, dtype=bool)
    seen: dict[tuple[int, int], int] = {}
    for b in range(owner_job.size):
        if not keep[b]:
            continue
        key = (int(owner_job[b]), int(owner_theta[b]))
        c = seen.get(key, 0)
        if c < need:
            take[b] = True
            seen[key] = c + 1
    for j, (lam, thetas) in enumerate(jobs):
        for i in range(len(np.atleast_1d(thetas))):
            if seen.get((j, i), 0) < need:
                raise RootCountError(
                    f"only {seen.get((j, i), 0)} root-classified brackets for "
                    f"theta={np.atleast_1d(thetas)[i]:.4g} (lam={lam:.4g}), "
                    f"requested {need}",
                    found=seen.get((j, i), 0),
                )

    roots, widths = _bisect_flat(flat[0][take], flat[1][take], flat[2][take],
                                 flat[3][take], flat[4][take], flat[5][take], cfg)
    oj, ot = owner_job[take], owner_theta[take]

    out = []
    for j, (lam, thetas) in enumerate(jobs):
        nth = len(np.atleast_1d(thetas))
        levels = np.empty((nth, need))
        res = np.empty((nth, need))
        fill = np.zeros(nth, dtype=int)
        sel = np.nonzero(oj == j)[0]
        for b in sel:
            i = ot[b]
            levels[i, fill[i]] = roots[b]
            res[i, fill[i]] = widths[b]
            fill[i] += 1
        out.append((levels, res))
    return out


def _solve_mode_thetas(lam: float, thetas: np.ndarray, alpha_max: int,
                       cfg: SolverConfig):
    """Levels nu_0..nu_alpha_max for one mode at several Bloch phases."""
    return _solve_jobs([(lam, np.asarray(thetas, float))], alpha_max, cfg)[0]


def solve_mode_levels(prob: ModeEigenProblem, alpha_max: int,
                      cfg: SolverConfig = DEFAULT_SOLVER) -> ModeLevels:
    """Lowest alpha_max + 1 eigenlevels of one twisted-boundary mode."""
    if alpha_max < 0:
        raise ValueError("alpha_max must be >= 0")
    levels, res = _solve_mode_thetas(prob.lam, np.array([prob.theta]), alpha_max, cfg)
    return ModeLevels(nu=levels[0], residuals=res[0])


# ----------------------------------------------------------------------
# Finite-difference Bloch oracle
# ----------------------------------------------------------------------

def _fd_levels(lam: float, theta: float, alpha_max: int, grid: int, seed: int):
    """Lowest levels of the gauged cell Hamiltonian on a periodic grid.

    The dimensionless operator (1/2)(-i d/ds + kq)^2 + s^2/2 with kq =
    theta/lam is discretised with a phase on the hopping,
    (2 u_j - e^{i kq h} u_{j+1} - e^{-i kq h} u_{j-1}) / (2 h^2), which
    reproduces the central-difference expansion to O(h^2) and keeps the
    exact discrete gauge covariance theta -> theta + 2*pi.
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    kq = theta / lam
    h = lam / grid
    s = -0.5 * lam + h * np.arange(grid)
    diag = 1.0 / (h * h) + 0.5 * s * s
    hop = -np.exp(1j * kq * h) / (2.0 * h * h)

    idx = np.arange(grid)
    rows = np.concatenate([idx, idx[:-1], idx[1:], [grid - 1], [0]])
    cols = np.concatenate([idx, idx[1:], idx[:-1], [0], [grid - 1]])
    vals = np.concatenate([
        diag.astype(complex),
        np.full(grid - 1, hop),
        np.full(grid - 1, np.conj(hop)),
        [hop],
        [np.conj(hop)],
    ])
    A = sp.csc_matrix((vals, (rows, cols)), shape=(grid, grid))

    skew = A - A.getH()
    if skew.nnz and np.max(np.abs(skew.data)) > 1e-12 * np.max(np.abs(diag)):
        raise AssemblyError("discretised Hamiltonian is not Hermitian")

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(grid) + 1j * rng.standard_normal(grid)
    vals = spla.eigsh(A, k=alpha_max + 1, sigma=-0.5, which="LM",
                      v0=v0, return_eigenvectors=False)
    return np.sort(vals.real) - 0.5


def fd_bloch_oracle(prob: ModeEigenProblem, alpha_max: int,
                    grid_points: int = 4096,
                    cfg: SolverConfig = DEFAULT_SOLVER,
                    check_richardson: bool = True,
                    richardson_tol: float = 1e-5) -> np.ndarray:
    """Independent eigenlevels from the finite-difference gauge Hamiltonian.

    With check_richardson the solve is repeated on a doubled grid and the
    drift must stay below richardson_tol.
    """
    if grid_points < 512:
        raise ValueError(f"grid_points must be >= 512, got {grid_points}")
    if prob.lam <= 0.0:
        raise ValueError("fd_bloch_oracle requires lam > 0")
    nu = _fd_levels(prob.lam, prob.theta, alpha_max, grid_points, cfg.fd_seed)
    if check_richardson:
        nu2 = _fd_levels(prob.lam, prob.theta, alpha_max, 2 * grid_points, cfg.fd_seed)
        drift = float(np.max(np.abs(nu - nu2)))
        if drift >= richardson_tol:
            raise RichardsonError(
                f"grid-doubling drift {drift:.3e} >= {richardson_tol:.1e} "
                f"(lam={prob.lam}, theta={prob.theta}, grid={grid_points})"
            )
    return nu


def fd_richardson_error(prob: ModeEigenProblem, alpha_max: int,
                        grid_points: int = 4096,
                        cfg: SolverConfig = DEFAULT_SOLVER) -> np.ndarray:
    """Per-level drift between grid_points and 2*grid_points solves."""
    nu = _fd_levels(prob.lam, prob.theta, alpha_max, grid_points, cfg.fd_seed)
    nu2 = _fd_levels(prob.lam, prob.theta, alpha_max, 2 * grid_points, cfg.fd_seed)
    return np.abs(nu - nu2)


# ----------------------------------------------------------------------
# Thin spectrum
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ThinSpectrum:
    """Momentum-resolved energies of the relative motion.

    eps_mode[k-1, i, alpha] holds the per-mode level energy
    (nu_alpha + 1/2)*hbar*omega_k at n = i - n_max; delta_mode holds the
    matching nu_alpha - alpha.  eps and E are the totals with alpha
    exciting mode 1 only (the qubit convention): eps(n, alpha) =
    eps_1(n, alpha) + sum_{k>=2} eps_k(n, 0) and E adds the centre-of-mass
    kinetic energy.  Tables are exactly even and N-periodic in n because
    all phases come from the canonical residue n*.
    """

    params: RingParams
    table: ModeTable
    n_max: int
    alpha_max: int
    lam: np.ndarray
    eps_mode: np.ndarray
    delta_mode: np.ndarray
    eps: np.ndarray
    E: np.ndarray

    def _index(self, n: int) -> int:
        if abs(n) > self.n_max:
            raise CoverageError(
                f"n={n} outside assembled range [-{self.n_max}, {self.n_max}]"
            )
        return n + self.n_max

    def _index_reduced(self, n: int) -> int:
        n_star = self.params.reduce_n(n)
        if abs(n_star) > self.n_max:
            raise CoverageError(
                f"reduced n*={n_star} outside assembled range; assemble with "
                f"n_max >= {self.params.N // 2}"
            )
        return n_star + self.n_max

    def eps_at(self, n: int, alpha: int) -> float:
        """Total relative-motion energy, J (periodic extension in n)."""
        return float(self.eps[self._index_reduced(n), alpha])

    def energy(self, n: int, alpha: int) -> float:
        """Total energy E(n, alpha) = kinetic(n) + eps(n, alpha), J."""
        return self.params.kinetic_energy(n) + self.eps_at(n, alpha)

    def delta_E(self, n: int) -> float:
        """Qubit splitting eps_1(n,1) - eps_1(n,0), J (periodic in n)."""
        i = self._index_reduced(n)
        return float(self.eps_mode[0, i, 1] - self.eps_mode[0, i, 0])


class CoverageError(SpectrumError):
    """A lookup needed momentum entries outside the assembled table."""


def mode_energy(table: ModeTable, k: int, n: int, alpha: int,
                cfg: SolverConfig = DEFAULT_SOLVER,
                cache: dict | None = None) -> tuple[float, float]:
    """Energy eps_k(n, alpha) in J and the level shift delta = nu - alpha.

    Modes with q_k = 0 or degenerate period carry no momentum dependence
    and return the plain oscillator ladder (delta = 0).
    """
    params = table.params
    hbar = params.constants.hbar
    omega = table.omega[k - 1]
    xi = math.sqrt(params.m * omega / hbar)
    lam = xi * abs(table.l[k - 1])
    if not table.solves_needed()[k - 1] or lam >= LADDER_LAMBDA:
        return (0.5 + alpha) * hbar * omega, 0.0
    key = (k, abs(params.reduce_n(n)))
    levels = cache.get(key) if cache is not None else None
    if levels is None:
        prob = ModeEigenProblem(lam=lam, theta=table.theta_mode(k, n), omega=omega)
        levels = solve_mode_levels(prob, alpha, cfg).nu
        if cache is not None:
            cache[key] = levels
    nu = levels[alpha]
    return (nu + 0.5) * hbar * omega, nu - alpha


def assemble_thin_spectrum(params: RingParams, n_max: int, alpha_max: int,
                           cfg: SolverConfig = DEFAULT_SOLVER,
                           use_cache: bool = True) -> ThinSpectrum:
    """Thin-spectrum table over n in [-n_max, n_max], alpha in 0..alpha_max.

    Only modes with a nonzero wave vector and period depend on n; those are
    solved per distinct canonical phase (at most N values per mode when the
    cache is on) and mirrored onto the full momentum range.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if alpha_max < 1:
        raise ValueError("alpha_max must be >= 1 (the qubit needs levels 0 and 1)")
    table = build_mode_table(params)
    hbar = params.constants.hbar
    N = params.N
    n_rows = 2 * n_max + 1
    n_values = np.arange(-n_max, n_max + 1)

    xi = np.sqrt(params.m * table.omega / hbar)
    lam = xi * np.abs(table.l)

    eps_mode = np.empty((N - 1, n_rows, alpha_max + 1))
    delta_mode = np.zeros((N - 1, n_rows, alpha_max + 1))
    alphas = np.arange(alpha_max + 1, dtype=float)
    solving = table.solves_needed()

    jobs = []
    job_modes = []
    for k in range(1, N):
        if not solving[k - 1] or lam[k - 1] >= LADDER_LAMBDA:
            eps_mode[k - 1] = (0.5 + alphas)[None, :] * hbar * table.omega[k - 1]
            continue
        if use_cache:
            reps = np.arange(0, N // 2 + 1)
            thetas = np.array([table.theta_mode(k, int(r)) for r in reps])
        else:
            thetas = np.array([table.theta_mode(k, int(n)) for n in n_values])
        jobs.append((lam[k - 1], thetas))
        job_modes.append(k)

    results = _solve_jobs(jobs, alpha_max, cfg)
    for k, (levels, _) in zip(job_modes, results):
        if use_cache:
            pick = np.array([abs(params.reduce_n(int(n))) for n in n_values])
            nu_rows = levels[pick]
        else:
            nu_rows = levels
        eps_mode[k - 1] = (nu_rows + 0.5) * hbar * table.omega[k - 1]
        delta_mode[k - 1] = nu_rows - alphas[None, :]

    ground_rest = np.sum(eps_mode[1:, :, 0], axis=0)     # modes k >= 2 at alpha = 0
    eps = eps_mode[0] + ground_rest[:, None]
    kinetic = np.array([params.kinetic_energy(int(n)) for n in n_values])
    E = eps + kinetic[:, None]

    return ThinSpectrum(params=params, table=table, n_max=n_max,
                        alpha_max=alpha_max, lam=lam, eps_mode=eps_mode,
                        delta_mode=delta_mode, eps=eps, E=E)


# ----------------------------------------------------------------------
# Linearised coefficients
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LinearizedCoeffs:
    """Linearisation of the thin spectrum around theta = (mu + 1/2)*pi.

    g0 holds the mode-1 offsets per alpha, g1 the per-(mode, alpha) slope of
    delta in n.  delta_e is the quadratic-fit coefficient of
    sum_k delta_k(n, 0)*hbar*omega_k; delta_e_prime adds the kinetic
    prefactor hbar^2/(2 m N R^2).  delta_g = g1(1,1) - g1(1,0) and g is
    defined by g*hbar*omega_1 = deltaE(N/4) - deltaE(0).
    """

    g0: np.ndarray
    g1: np.ndarray
    delta_e: float
    delta_e_prime: float
    delta_g: float
    g: float
    fit_residual: float
    fit_range: float
    quadratic_fit_poor: bool


def _band_ratio(nu, lam, ctrl):
    p_oe, p_eo = _band_parts(nu, lam, ctrl)
    return p_oe / p_eo


def linearize(spec: ThinSpectrum, cfg: SolverConfig = DEFAULT_SOLVER) -> LinearizedCoeffs:
    """Analytic linearisation coefficients plus the quadratic-fit scale.

    Expanding tan^2(theta/2) = -F(nu) about theta0 = (mu + 1/2)*pi gives
    nu(theta) = alpha' - (2*(-1)^mu / G)*(theta - theta0), where alpha'
    solves F(alpha') = -1 (the level at theta = pi/2) and G = dF/dnu there.
    With theta_k(n) = 2*pi*sqrt(2/N)*M1k*n this yields

        g0(alpha)    = (alpha' - alpha) + (-1)^mu (2 mu + 1) pi / G
        g1(k, alpha) = -(-1)^mu * 4 pi sqrt(2) * M1k / (sqrt(N) * G)

    The branch mu is picked per mode from theta_k(n=1).
    """
    params = spec.params
    table = spec.table
    N = params.N
    hbar = params.constants.hbar
    if spec.n_max < N // 2:
        raise CoverageError(f"linearize needs n_max >= N/2 = {N // 2}")

    alpha_max = spec.alpha_max
    solving = table.solves_needed()
    g0 = np.zeros(alpha_max + 1)
    g1 = np.zeros((N - 1, alpha_max + 1))
    fd_step = 1e-5

    for k in range(1, N):
        if not solving[k - 1] or spec.lam[k - 1] >= LINEARIZE_LAMBDA:
            continue   # band-flat or momentum-free modes keep g1 = 0
        lam_k = spec.lam[k - 1]
        prob = ModeEigenProblem(lam=lam_k, theta=0.5 * math.pi,
                                omega=table.omega[k - 1])
        alpha_ref = solve_mode_levels(prob, alpha_max, cfg).nu
        ratio_hi = _band_ratio(alpha_ref + fd_step, lam_k, cfg.series)
        ratio_lo = _band_ratio(alpha_ref - fd_step, lam_k, cfg.series)
        G_k = (ratio_hi - ratio_lo) / (2.0 * fd_step)
        theta1 = table.theta_mode(k, 1)
        mu = int(round(theta1 / math.pi - 0.5))
        sign = -1.0 if mu % 2 else 1.0
        M1k = table.M[k - 1, 0]
        with np.errstate(divide="ignore"):
            row = -sign * 4.0 * math.pi * math.sqrt(2.0) * M1k / (math.sqrt(N) * G_k)
        g1[k - 1] = np.where(np.isfinite(row), row, 0.0)
        if k == 1:
            g0 = (alpha_ref - np.arange(alpha_max + 1)) \
                + sign * (2 * mu + 1) * math.pi / G_k

    # quadratic scale of the ground thin spectrum over the first part of a period
    n_fit = np.arange(0, N // 8 + 1)
    data = np.array([spec.eps_at(int(n), 0) - spec.eps_at(0, 0) for n in n_fit])
    design = np.stack([np.ones_like(n_fit, dtype=float), n_fit.astype(float) ** 2], axis=1)
    coef, *_ = np.linalg.lstsq(design, data, rcond=None)
    delta_e = float(coef[1])
    fit = design @ coef
    fit_residual = float(np.max(np.abs(fit - data))) if data.size else 0.0
    fit_range = float(np.max(data) - np.min(data)) if data.size else 0.0
    poor = fit_range > 0.0 and fit_residual > 0.2 * fit_range

    delta_e_prime = delta_e + hbar * hbar / (2.0 * params.m * N * params.R ** 2)
    if not delta_e_prime > 0.0:
        raise SpectrumError(
            f"delta_e_prime={delta_e_prime:.3e} must be positive for the "
            "thermal Gaussian to converge"
        )
    delta_g = float(g1[0, 1] - g1[0, 0])
    omega1 = table.omega[0]
    g = (spec.delta_E(N // 4) - spec.delta_E(0)) / (hbar * omega1)

    return LinearizedCoeffs(g0=g0, g1=g1, delta_e=delta_e,
                            delta_e_prime=delta_e_prime, delta_g=delta_g,
                            g=float(g), fit_residual=fit_residual,
                            fit_range=fit_range, quadratic_fit_poor=bool(poor))


# ----------------------------------------------------------------------
# Golden-file records for oracle references
# ----------------------------------------------------------------------

def save_golden_records(path, records) -> None:
    """Write oracle reference records as JSON.

    Each record: {"lambda": float, "theta": float, "grid": int,
    "nu": [...], "richardson_err": [...]} (optionally "nu_solver": [...]).
    """
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(list(records), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_golden_records(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
