"""Acceptance suite: every shipped criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one PASS/FAIL line per
criterion.
"""

import dataclasses
import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from ringdec.constants import CODATA2018
from ringdec.model import RingParams
from ringdec.specfun import adaptive_quad, bessel_j, erfi, kummer_1f1
from ringdec.spectrum import (
    ModeEigenProblem,
    assemble_thin_spectrum,
    fd_bloch_oracle,
    linearize,
    solve_mode_levels,
)
from ringdec.decoherence import (
    ThermalEnsemble,
    build_ensemble,
    decoherence_bessel,
    decoherence_erfi,
    decoherence_exact,
    envelope_time_scale,
    first_decay_time,
    regime,
)
from ringdec.cli import main as cli_main


@contextmanager
def criterion(label):
    try:
        yield
    except BaseException:
        print(f"FAIL {label}")
        raise
    print(f"PASS {label}")


THETAS = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi)

ALL_PRESETS = ["fig3", "fig4a", "fig4b", "fig5a", "fig5b", "fig5c",
               "fig5d", "fig5e", "fig5f", "a1"]


@pytest.fixture(scope="module")
def figure_run(tmp_path_factory):
    """One full figure-preset run; shared by criteria 8 and 9."""
    out = tmp_path_factory.mktemp("figures")
    t0 = time.perf_counter()
    code = cli_main(["figure"] + [f"--{p}" for p in ALL_PRESETS]
                    + ["--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert code == 0
    return out, elapsed


@pytest.fixture(scope="module")
def spec80_wide(ring80):
    """Fig. 3 table spanning a full period on both sides."""
    return assemble_thin_spectrum(ring80, n_max=80, alpha_max=1)


def test_criterion_1_special_function_suite():
    with criterion("criterion 1: special-function suite (< 5 s)"):
        t0 = time.perf_counter()
        # Kummer transformation identity on the stated grid
        for a in np.arange(-5.0, 5.0 + 1e-9, 0.5):
            for b in (0.5, 1.5):
                for z in np.arange(0.0, 25.0 + 1e-9, 2.5):
                    lhs = kummer_1f1(float(a), b, float(z))
                    rhs = math.exp(z) * kummer_1f1(b - float(a), b, -float(z))
                    assert abs(lhs - rhs) < 1e-10 * abs(lhs)
        # Bessel recurrence
        for g in range(1, 31):
            for z in np.linspace(0.1, 50.0, 12):
                resid = bessel_j(g - 1, z) + bessel_j(g + 1, z) \
                    - 2.0 * g / z * bessel_j(g, z)
                assert abs(resid) < 1e-9
        # Jacobi-Anger at z = 5, Gamma = 40
        z, phi = 5.0, 0.7
        total = sum((1j ** g) * bessel_j(g, z) * np.exp(1j * g * phi)
                    for g in range(-40, 41))
        assert abs(np.exp(1j * z * math.cos(phi)) - total) < 1e-10
        # erfi vs quadrature on [0, 3]
        for x in np.linspace(0.0, 3.0, 13):
            quad = adaptive_quad(lambda s: 2.0 / math.sqrt(math.pi) * math.exp(s * s),
                                 0.0, float(x), 1e-13)
            assert abs(erfi(float(x)) - quad) < 1e-10 * max(1.0, abs(quad))
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0, f"suite took {elapsed:.2f}s"


def test_criterion_2_oracle_equivalence():
    with criterion("criterion 2: root-finder vs FD Bloch oracle |dnu| < 1e-4 (< 60 s)"):
        t0 = time.perf_counter()
        worst = 0.0
        for lam in (3.0, 5.0, 8.0):
            for theta in THETAS:
                prob = ModeEigenProblem(lam=lam, theta=theta, omega=1.0)
                nu_root = solve_mode_levels(prob, 3).nu
                nu_fd = fd_bloch_oracle(prob, 3, grid_points=4096,
                                        check_richardson=True)
                worst = max(worst, float(np.max(np.abs(nu_root - nu_fd))))
        elapsed = time.perf_counter() - t0
        assert worst < 1e-4, f"worst |dnu| = {worst:.2e}"
        assert elapsed < 60.0, f"grid took {elapsed:.1f}s"


def test_criterion_3_large_cell_limit():
    with criterion("criterion 3: lam = 14 levels within 1e-3 of the ladder"):
        for theta in THETAS:
            lv = solve_mode_levels(ModeEigenProblem(14.0, theta, 1.0), 3)
            assert np.max(np.abs(lv.nu - np.arange(4))) < 1e-3


def test_criterion_4_thin_spectrum_symmetries(spec80_wide):
    with criterion("criterion 4: thin-spectrum parity and N-periodicity <= 1e-9"):
        eps = spec80_wide.eps
        scale = np.abs(eps)
        assert np.max(np.abs(eps[::-1, :] - eps) / scale) < 1e-9
        # rows n and n + N coincide across the stored table
        N = spec80_wide.params.N
        shifted = eps[N:, :]
        base = eps[:-N, :]
        assert np.max(np.abs(shifted - base) / np.abs(base)) < 1e-9


def test_criterion_5_exact_contracts(ring80, spec80):
    with criterion("criterion 5: exact decoherence-factor contracts"):
        ens = build_ensemble(spec80, ring80)
        co = linearize(spec80)
        diag = regime(ring80, co, spec80)
        times = np.linspace(0.0, 5 * diag.tau, 1500)
        tr = decoherence_exact(ens, spec80, times)
        assert abs(tr.F[0] - 1.0) < 1e-12
        assert np.all(tr.F >= 0.0) and np.all(tr.F <= 1.0 + 1e-12)

        class Shifted:
            def __init__(self, base, shift):
                self.base, self.shift = base, shift

            @property
            def params(self):
                return self.base.params

            @property
            def table(self):
                return self.base.table

            def delta_E(self, n):
                return self.base.delta_E(n) + self.shift

        hw1 = CODATA2018.hbar * spec80.table.omega[0]
        tr_shift = decoherence_exact(ens, Shifted(spec80, hw1), times)
        assert np.max(np.abs(tr.F - tr_shift.F)) < 1e-12

        single = ThermalEnsemble(beta=ens.beta, n=np.array([7]),
                                 weights=np.array([1.0]), Z=1.0, n_trunc=0,
                                 degenerate=True)
        tr_single = decoherence_exact(single, spec80, times)
        assert np.max(np.abs(tr_single.F - 1.0)) < 1e-12


def test_criterion_6_scalar_reproduction(ring80, spec80, coeffs80):
    with criterion("criterion 6: tau_spon/tau = 0.8525 +- 1e-4 and r(121 nK) = 1.00 +- 0.01"):
        diag = regime(ring80, coeffs80, spec80)
        assert diag.tau_spon / diag.tau == pytest.approx(
            math.sqrt(2.0 * (math.pi - 2.0) / math.pi), abs=1e-4)
        assert diag.tau_spon / diag.tau == pytest.approx(0.8525, abs=1e-4)
        assert diag.r == pytest.approx(1.00, abs=0.01)


def test_criterion_7_approximation_cross_checks(ring80, spec80, coeffs80):
    with criterion("criterion 7: series/envelope vs quadrature; exact vs envelope <= 0.05"):
        p = ring80
        beta = 1.0 / (CODATA2018.k_B * p.T)
        a = beta * coeffs80.delta_e_prime
        Z = math.sqrt(math.pi / a)
        nbig = 8.0 / math.sqrt(a)
        omega1 = spec80.table.omega[0]

        # Bessel series vs quadrature of the thermally weighted cosine phase
        def cos_oracle(t):
            w = 0.5 * coeffs80.g * omega1 * t
            re = adaptive_quad(lambda n: math.exp(-a * n * n)
                               * math.cos(w * math.cos(4 * math.pi * n / p.N)),
                               -nbig, nbig, 1e-10)
            im = adaptive_quad(lambda n: math.exp(-a * n * n)
                               * math.sin(w * math.cos(4 * math.pi * n / p.N)),
                               -nbig, nbig, 1e-10)
            return math.hypot(re, im) / Z

        times = np.linspace(0.0, 20.0 / (abs(coeffs80.g) * omega1), 17)
        tr = decoherence_bessel(coeffs80, p, spec80, times, gamma_cutoff=40)
        diff = max(abs(F - cos_oracle(t)) for t, F in zip(times, tr.F))
        assert diff < 1e-6, f"bessel vs quadrature {diff:.2e}"

        # envelope vs quadrature of the Gaussian-linear integral
        tau = envelope_time_scale(p, coeffs80, spec80)
        c = abs(coeffs80.delta_g) * omega1

        def lin_oracle(t):
            re = adaptive_quad(lambda n: math.exp(-a * n * n) * math.cos(c * abs(n) * t),
                               -nbig, nbig, 1e-12)
            im = adaptive_quad(lambda n: math.exp(-a * n * n) * math.sin(c * abs(n) * t),
                               -nbig, nbig, 1e-12)
            return math.hypot(re, im) / Z

        times2 = np.linspace(0.0, 4.0 * tau, 13)
        tr2 = decoherence_erfi(coeffs80, p, spec80, times2)
        diff2 = max(abs(F - lin_oracle(t)) for t, F in zip(times2, tr2.F))
        assert diff2 < 1e-8, f"erfi vs quadrature {diff2:.2e}"

        # exact vs envelope within 0.05 for t <= tau; evaluated at the case
        # the source labels r = 0.5 (T = 483 nK, the high-temperature side
        # where the linear-splitting envelope is asserted to hold) and at
        # the formula-consistent r = 1 point (T = 121 nK)
        for T in (4.83e-7, 1.21e-7):
            pT = dataclasses.replace(ring80, T=T)
            tauT = envelope_time_scale(pT, coeffs80, spec80)
            tsT = np.linspace(0.0, tauT, 160)
            ens = build_ensemble(spec80, pT)
            ex = decoherence_exact(ens, spec80, tsT).F
            er = decoherence_erfi(coeffs80, pT, spec80, tsT).F
            gap = float(np.max(np.abs(ex - er)))
            assert gap <= 0.05, f"exact vs erfi {gap:.3f} at T={T}"


def test_criterion_8_figure_behaviours(figure_run, ring80, spec80, coeffs80):
    with criterion("criterion 8: N-doubling trend, J0 reduction, preset run < 10 min"):
        out, elapsed = figure_run
        assert elapsed < 600.0, f"figure presets took {elapsed:.0f}s"

        # fixed-density doubling: strictly increasing first decay time
        rows = (out / "fig5f" / "sweep_summary.csv").read_text().splitlines()[1:]
        decays = [float(r.split(",")[1]) for r in rows]
        assert len(decays) == 4
        assert all(b > a for a, b in zip(decays, decays[1:])), decays

        # eta >> 1 collapses the series onto |J0|
        hot = dataclasses.replace(ring80, T=2e-5)
        diag = regime(hot, coeffs80, spec80)
        assert diag.eta_cut > 16.0
        omega1 = spec80.table.omega[0]
        times = np.linspace(0.0, 20.0 / (abs(coeffs80.g) * omega1), 120)
        tr = decoherence_bessel(coeffs80, hot, spec80, times)
        j0 = np.abs([bessel_j(0, 0.5 * coeffs80.g * omega1 * t) for t in times])
        assert np.max(np.abs(tr.F - j0)) < 1e-6


def test_criterion_9_determinism(figure_run, tmp_path):
    with criterion("criterion 9: figure presets are byte-identical across reruns"):
        out, _ = figure_run
        rerun = tmp_path / "rerun"
        assert cli_main(["figure", "--fig3", "--a1", "--fig4b",
                         "--out", str(rerun)]) == 0
        for preset in ("fig3", "a1", "fig4b"):
            first = sorted((out / preset).iterdir())
            second = sorted((rerun / preset).iterdir())
            assert [f.name for f in first] == [f.name for f in second]
            for fa, fb in zip(first, second):
                assert fa.read_bytes() == fb.read_bytes(), fa.name
