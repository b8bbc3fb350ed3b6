#!/usr/bin/env python3
"""Regenerate the oracle reference records under tests/golden/.

Each record pins the finite-difference Bloch levels (with their
grid-doubling error) and the root-solver levels for one (lambda, theta)
point.  Run from the repository root after any solver change:

    python3 tools/generate_golden.py
"""

import math
from pathlib import Path

from ringdec.spectrum import (
    ModeEigenProblem,
    fd_richardson_error,
    _fd_levels,
    solve_mode_levels,
    save_golden_records,
)

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"
GRID = 4096
ALPHA_MAX = 3


def record(lam: float, theta: float, with_fd: bool = True) -> dict:
    prob = ModeEigenProblem(lam=lam, theta=theta, omega=1.0)
    rec = {"lambda": lam, "theta": theta, "grid": GRID,
           "nu_solver": [float(v) for v in solve_mode_levels(prob, ALPHA_MAX).nu]}
    if with_fd:
        nu_fd = _fd_levels(lam, prob.theta, ALPHA_MAX, GRID, 12345)
        err = fd_richardson_error(prob, ALPHA_MAX, GRID)
        rec["nu"] = [float(v) for v in nu_fd]
        rec["richardson_err"] = [float(v) for v in err]
    else:
        rec["nu"] = rec["nu_solver"]
        rec["richardson_err"] = []
    return rec


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)

    grid_records = [record(lam, theta)
                    for lam in (3.0, 5.0, 8.0)
                    for theta in (0.0, math.pi / 4, math.pi / 2,
                                  3 * math.pi / 4, math.pi)]
    save_golden_records(GOLDEN_DIR / "fd_bloch_grid.json", grid_records)

    thetas = [i * 2.0 * math.pi / 64 for i in range(64)]
    theta_records = [record(5.0, th, with_fd=(i % 8 == 0))
                     for i, th in enumerate(thetas)]
    save_golden_records(GOLDEN_DIR / "a1_theta_sweep.json", theta_records)

    lams = [1.0 + 0.25 * i for i in range(45)]
    lam_records = [record(lam, math.pi / 2, with_fd=(i % 8 == 0))
                   for i, lam in enumerate(lams)]
    save_golden_records(GOLDEN_DIR / "a1_lambda_sweep.json", lam_records)

    print(f"wrote goldens to {GOLDEN_DIR}")


if __name__ == "__main__":
    main()
