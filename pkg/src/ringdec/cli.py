"""Command-line front end: spectra, decoherence traces, sweeps, figure presets.

Physics parameters come from a flat JSON config (reproducibility artifacts
are files); flags only select the scenario and small overrides.  All output
is deterministic: floats are written with shortest round-trip formatting,
row order is fixed, and JSON keys are sorted, so identical configs produce
byte-identical files.

Exit codes: 0 success, 2 config error, 3 solver error, 4 I/O error.
Failures print a machine-readable JSON error object to stdout.

Config schema (unknown keys rejected)::

    {
      "N": 80,                       # particles, integer >= 3
      "mass_mp": 40,                 # oscillator mass in proton masses ...
      "mass_kg": 6.7e-26,            # ... or in kg (exactly one of the two)
      "kappa_N_per_m": 1e-13,        # spring constant
      "R_m": 5e-7,                   # ring radius
      "T_K": 1.21e-7,                # temperature
      "n_max": 80,                   # optional, default N
      "alpha_max": 1,                # optional, default 1
      "methods": ["exact"],          # optional subset of exact|bessel|erfi
      "times": {"t_max_s": "auto", "points": 2000},   # optional
      "output": {"dir": ".", "format": "csv"},        # optional
      "sweep": {"axis": "T", "values": [...]}         # sweep scenario only
    }
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .constants import CODATA2018
from .model import RingParams, build_mode_table, wave_vectors
from .specfun import QuadratureError, SeriesConvergenceError
from .spectrum import (
    ModeEigenProblem,
    SolverConfig,
    SpectrumError,
    ThinSpectrum,
    assemble_thin_spectrum,
    linearize,
    solve_mode_levels,
)
from .decoherence import (
    DecoherenceError,
    auto_time_grid,
    build_ensemble,
    decoherence_bessel,
    decoherence_erfi,
    decoherence_exact,
    first_decay_time,
    regime,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

_METHODS = ("exact", "bessel", "erfi")
_SWEEP_AXES = ("N", "T", "kappa", "R", "m", "fixed-density-N")


class ConfigError(ValueError):
    """Config schema violation; message carries the offending field path."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


@dataclass(frozen=True)
class SweepSpec:
    """One swept axis with explicit values.

    For fixed-density-N the values are particle numbers and R is recomputed
    per value to hold the linear density N/(2*pi*R) at its base-config value.
    """

    axis: str
    values: tuple

    def __post_init__(self):
        if self.axis not in _SWEEP_AXES:
            raise ConfigError("sweep.axis", f"must be one of {_SWEEP_AXES}")
        if not self.values:
            raise ConfigError("sweep.values", "must be non-empty")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if len(self.values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigError("sweep.values", "must be strictly monotone")


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters shared by all scenarios."""

    params: RingParams
    n_max: int
    alpha_max: int
    methods: tuple
    t_max_s: float | str           # "auto" or seconds
    points: int
    out_dir: Path
    out_format: str
    sweep: SweepSpec | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)


def _require(cfg: dict, key: str, types, path: str):
    if key not in cfg:
        raise ConfigError(f"{path}{key}", "missing required key")
    val = cfg[key]
    if not isinstance(val, types) or isinstance(val, bool):
        raise ConfigError(f"{path}{key}", f"expected {types}, got {type(val).__name__}")
    return val


def load_config(path) -> RunConfig:
    """Parse and validate the flat JSON config; unknown keys are rejected."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("<document>", "top level must be an object")

    allowed = {"N", "mass_mp", "mass_kg", "kappa_N_per_m", "R_m", "T_K",
               "n_max", "alpha_max", "methods", "times", "output", "sweep"}
    for key in cfg:
        if key not in allowed:
            raise ConfigError(key, "unknown key")

    N = _require(cfg, "N", int, "")
    if "mass_mp" in cfg and "mass_kg" in cfg:
        raise ConfigError("mass_mp", "mass_mp and mass_kg are mutually exclusive")
    if "mass_mp" in cfg:
        m = _require(cfg, "mass_mp", (int, float), "") * CODATA2018.m_p
    elif "mass_kg" in cfg:
        m = _require(cfg, "mass_kg", (int, float), "")
    else:
        raise ConfigError("mass_mp", "one of mass_mp or mass_kg is required")
    kappa = _require(cfg, "kappa_N_per_m", (int, float), "")
    R = _require(cfg, "R_m", (int, float), "")
    T = _require(cfg, "T_K", (int, float), "")
    for name, val in (("kappa_N_per_m", kappa), ("R_m", R)):
        if not val > 0:
            raise ConfigError(name, f"must be positive, got {val}")
    if T < 0:
        raise ConfigError("T_K", f"must be non-negative, got {T}")
    if N < 3:
        raise ConfigError("N", f"must be >= 3, got {N}")
    if m <= 0:
        raise ConfigError("mass_mp" if "mass_mp" in cfg else "mass_kg",
                          f"mass must be positive")
    params = RingParams(N=N, m=float(m), kappa=float(kappa), R=float(R), T=float(T))

    n_max = cfg.get("n_max", N)
    if not isinstance(n_max, int) or isinstance(n_max, bool) or n_max < 1:
        raise ConfigError("n_max", f"must be a positive integer, got {n_max!r}")
    alpha_max = cfg.get("alpha_max", 1)
    if not isinstance(alpha_max, int) or isinstance(alpha_max, bool) or alpha_max < 1:
        raise ConfigError("alpha_max", f"must be an integer >= 1, got {alpha_max!r}")

    methods = cfg.get("methods", ["exact"])
    if (not isinstance(methods, list) or not methods
            or any(mth not in _METHODS for mth in methods)):
        raise ConfigError("methods", f"must be a non-empty subset of {_METHODS}")

    times = cfg.get("times", {})
    if not isinstance(times, dict):
        raise ConfigError("times", "must be an object")
    for key in times:
        if key not in {"t_max_s", "points"}:
            raise ConfigError(f"times.{key}", "unknown key")
    t_max = times.get("t_max_s", "auto")
    if t_max != "auto" and (not isinstance(t_max, (int, float))
                            or isinstance(t_max, bool) or t_max <= 0):
        raise ConfigError("times.t_max_s", f"must be 'auto' or positive, got {t_max!r}")
    points = times.get("points", 2000)
    if not isinstance(points, int) or isinstance(points, bool) or points < 2:
        raise ConfigError("times.points", f"must be an integer >= 2, got {points!r}")

    output = cfg.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("output", "must be an object")
    for key in output:
        if key not in {"dir", "format"}:
            raise ConfigError(f"output.{key}", "unknown key")
    out_dir = Path(output.get("dir", "."))
    out_format = output.get("format", "csv")
    if out_format not in ("csv", "json"):
        raise ConfigError("output.format", f"must be csv or json, got {out_format!r}")

    sweep = None
    if "sweep" in cfg:
        sw = cfg["sweep"]
        if not isinstance(sw, dict):
            raise ConfigError("sweep", "must be an object")
        for key in sw:
            if key not in {"axis", "values"}:
                raise ConfigError(f"sweep.{key}", "unknown key")
        if "axis" not in sw or "values" not in sw:
            raise ConfigError("sweep", "requires axis and values")
        if not isinstance(sw["values"], list):
            raise ConfigError("sweep.values", "must be a list")
        sweep = SweepSpec(axis=sw["axis"], values=tuple(sw["values"]))

    return RunConfig(params=params, n_max=n_max, alpha_max=alpha_max,
                     methods=tuple(methods), t_max_s=t_max, points=points,
                     out_dir=out_dir, out_format=out_format, sweep=sweep)


# ----------------------------------------------------------------------
# Deterministic emission
# ----------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_rows(path_base: Path, header, rows, out_format: str) -> Path:
    """Emit a table as CSV or as a JSON list of row objects."""
    if out_format == "csv":
        path = path_base.with_suffix(".csv")
        write_csv(path, header, rows)
    else:
        path = path_base.with_suffix(".json")
        write_json(path, [dict(zip(header, [float(v) if isinstance(v, (float, np.floating))
                                            else int(v) if isinstance(v, (int, np.integer))
                                            else v for v in row])) for row in rows])
    return path


# ----------------------------------------------------------------------
# Scenarios
# ----------------------------------------------------------------------

def cmd_spectrum(config: RunConfig) -> list[Path]:
    """Emit the thin-spectrum table and the per-mode table."""
    params = config.params
    spec = assemble_thin_spectrum(params, config.n_max, config.alpha_max,
                                  config.solver)
    hw1 = params.constants.hbar * spec.table.omega[0]
    out = config.out_dir
    written = []

    rows = []
    for i, n in enumerate(range(-config.n_max, config.n_max + 1)):
        for alpha in range(config.alpha_max + 1):
            eps = spec.eps[i, alpha]
            E = spec.E[i, alpha]
            rows.append((n, alpha, float(eps), float(E),
                         float(eps / hw1), float(E / hw1)))
    written.append(write_rows(out / "thin_spectrum",
                              ["n", "alpha", "eps_joule", "E_joule",
                               "eps_hw1", "E_hw1"], rows, config.out_format))

    table = spec.table
    q1 = table.q1
    mode_rows = [(k, float(table.omega[k - 1]), float(q1[k - 1]),
                  float(table.l[k - 1]), int(table.degenerate[k - 1]))
                 for k in range(1, params.N)]
    written.append(write_rows(out / "modes",
                              ["k", "omega_rad_s", "q_per_m", "l_m",
                               "degenerate_flag"], mode_rows, config.out_format))
    return written


def _trace_rows(trace):
    return [(float(t), float(F)) for t, F in zip(trace.t, trace.F)]


def _decohere_files(config: RunConfig, out: Path, prefix: str = "") -> dict:
    """Run the decoherence pipeline for one parameter point.

    Writes trace_<method> files plus a diagnostics JSON and returns the
    diagnostics dict.
    """
    params = config.params
    spec = assemble_thin_spectrum(params, config.n_max, config.alpha_max,
                                  config.solver)
    coeffs = linearize(spec, config.solver)
    diag = regime(params, coeffs, spec)

    if config.t_max_s == "auto":
        times = auto_time_grid(coeffs, params, spec, config.points)
    else:
        times = np.linspace(0.0, float(config.t_max_s), config.points)

    traces = {}
    for method in config.methods:
        if method == "exact":
            ens = build_ensemble(spec, params)
            traces[method] = decoherence_exact(ens, spec, times)
        elif method == "bessel":
            traces[method] = decoherence_bessel(coeffs, params, spec, times)
        else:
            traces[method] = decoherence_erfi(coeffs, params, spec, times)

    for method in config.methods:
        write_rows(out / f"{prefix}trace_{method}", ["t_s", "F"],
                   _trace_rows(traces[method]), config.out_format)

    ref = traces.get("exact", traces[config.methods[0]])
    diagnostics = {
        "n_fwhm": diag.n_fwhm,
        "r": diag.r,
        "eta": diag.eta_cut,
        "gamma_cutoff": diag.gamma_cutoff,
        "tau_s": diag.tau,
        "tau_spon_s": diag.tau_spon,
        "g": coeffs.g,
        "delta_e_prime_joule": coeffs.delta_e_prime,
        "delta_g": coeffs.delta_g,
        "first_decay_time_s": first_decay_time(ref),
    }
    write_json(out / f"{prefix}diagnostics.json", diagnostics)
    return diagnostics


def cmd_decohere(config: RunConfig) -> dict:
    """Emit decoherence traces and diagnostics for one parameter set."""
    if config.n_max < config.params.N // 2:
        raise ConfigError("n_max", f"decohere needs n_max >= N/2 = {config.params.N // 2}")
    return _decohere_files(config, config.out_dir)


def _sweep_point_params(config: RunConfig, axis: str, value) -> RingParams:
    base = config.params
    if axis == "N":
        return replace(base, N=int(value))
    if axis == "T":
        return replace(base, T=float(value))
    if axis == "kappa":
        return replace(base, kappa=float(value))
    if axis == "R":
        return replace(base, R=float(value))
    if axis == "m":
        return replace(base, m=float(value))
    # fixed-density-N: R scales with N to keep N/(2*pi*R) at its base value
    return replace(base, N=int(value), R=base.R * int(value) / base.N)


def _run_sweep_point(args):
    config, axis, value, idx = args
    params = _sweep_point_params(config, axis, value)
    point = replace(config, params=params,
                    n_max=max(config.n_max, params.N) if axis in ("N", "fixed-density-N")
                    else config.n_max)
    try:
        diag = _decohere_files(point, config.out_dir, prefix=f"point_{idx:03d}_")
        return idx, value, diag, "ok"
    except (SpectrumError, DecoherenceError, SeriesConvergenceError,
            QuadratureError, ValueError) as exc:
        return idx, value, None, f"error:{type(exc).__name__}"


def cmd_sweep(config: RunConfig, jobs: int = 1) -> Path:
    """Run the decoherence pipeline over a swept axis.

    Each point writes its own trace files; failures are recorded in the
    summary's status column and do not stop the sweep.
    """
    if config.sweep is None:
        raise ConfigError("sweep", "sweep scenario requires a sweep object in the config")
    sweep = config.sweep
    tasks = [(config, sweep.axis, value, idx)
             for idx, value in enumerate(sweep.values)]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_sweep_point, tasks))
    else:
        results = [_run_sweep_point(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    rows = []
    for idx, value, diag, status in results:
        if diag is None:
            rows.append((value, math.inf, math.inf, math.inf, status))
        else:
            rows.append((value, diag["first_decay_time_s"], diag["r"],
                         diag["tau_s"], status))
    path = config.out_dir / "sweep_summary.csv"
    write_csv(path, ["axis_value", "first_decay_time_s", "r", "tau_s", "status"],
              rows)
    return path


# ----------------------------------------------------------------------
# Figure presets
# ----------------------------------------------------------------------

def _preset_config(out_dir: Path, *, N, mass_mp, kappa, R, T, n_max=None,
                   alpha_max=1, methods=("exact",), t_max="auto",
                   points=2000, sweep=None) -> RunConfig:
    params = RingParams(N=N, m=mass_mp * CODATA2018.m_p, kappa=kappa, R=R, T=T)
    return RunConfig(params=params, n_max=n_max if n_max is not None else N,
                     alpha_max=alpha_max, methods=tuple(methods),
                     t_max_s=t_max, points=points, out_dir=out_dir,
                     out_format="csv", sweep=sweep)


def _figure_fig3(out: Path) -> None:
    """Ground thin spectrum of mode 1 and the thermal momentum profile."""
    for label, T in (("a", 1e-7), ("b", 8e-6)):
        config = _preset_config(out, N=80, mass_mp=40, kappa=1e-13, R=0.5e-6, T=T)
        params = config.params
        spec = assemble_thin_spectrum(params, config.n_max, config.alpha_max,
                                      config.solver)
        hw1 = params.constants.hbar * spec.table.omega[0]
        beta = 1.0 / (params.constants.k_B * params.T)
        ns = np.arange(-config.n_max, config.n_max + 1)
        kin = np.array([params.kinetic_energy(int(n)) for n in ns])
        gauss = np.exp(-beta * kin)
        gauss /= math.fsum(gauss)
        rows = [(int(n), float(spec.eps_mode[0, i, 0]),
                 float(spec.eps_mode[0, i, 0] / hw1), float(gauss[i]))
                for i, n in enumerate(ns)]
        write_csv(out / f"fig3{label}_mode1_spectrum.csv",
                  ["n", "eps1_joule", "eps1_hw1", "P_n"], rows)


_FIG4_CASES = (("T483nK", 4.83e-7), ("T121nK", 1.21e-7), ("T31nK", 3.1e-8))


def _figure_fig4(out: Path, methods) -> None:
    for label, T in _FIG4_CASES:
        config = _preset_config(out, N=80, mass_mp=40, kappa=1e-13, R=0.5e-6,
                                T=T, methods=methods)
        _decohere_files(config, out, prefix=f"{label}_")


_FIG5_BASE = dict(N=80, mass_mp=4, kappa=1e-13, R=1e-6, T=1e-5)

_FIG5_SWEEPS = {
    "fig5a": ("N", (40, 80, 160)),
    "fig5b": ("T", (2.5e-6, 1e-5, 4e-5)),
    "fig5c": ("kappa", (2.5e-14, 1e-13, 4e-13)),
    "fig5d": ("R", (5e-7, 1e-6, 2e-6)),
    "fig5e": ("m", tuple(f * CODATA2018.m_p for f in (1, 4, 16))),
    "fig5f": ("fixed-density-N", (80, 160, 320, 640)),
}


def _figure_fig5(out: Path, name: str, jobs: int) -> None:
    axis, values = _FIG5_SWEEPS[name]
    sweep = SweepSpec(axis=axis, values=values)
    config = _preset_config(out, **_FIG5_BASE, sweep=sweep)
    cmd_sweep(config, jobs=jobs)


def _figure_a1(out: Path) -> None:
    """Level curves of the periodic cell: theta sweep and cell-size sweep."""
    cfg = SolverConfig()
    thetas = np.arange(64) * (2.0 * math.pi / 64)
    rows = []
    for th in thetas:
        lv = solve_mode_levels(ModeEigenProblem(lam=5.0, theta=float(th), omega=1.0),
                               3, cfg)
        rows.append((float(th),) + tuple(float(v) for v in lv.nu))
    write_csv(out / "a1_theta_sweep.csv",
              ["theta", "nu0", "nu1", "nu2", "nu3"], rows)

    lams = np.arange(1.0, 12.0 + 1e-9, 0.25)
    rows = []
    for lam in lams:
        lv = solve_mode_levels(ModeEigenProblem(lam=float(lam), theta=0.5 * math.pi,
                                                omega=1.0), 3, cfg)
        rows.append((float(lam),) + tuple(float(v) for v in lv.nu))
    write_csv(out / "a1_lambda_sweep.csv",
              ["lambda", "nu0", "nu1", "nu2", "nu3"], rows)


FIGURE_PRESETS = ("fig3", "fig4a", "fig4b", "fig5a", "fig5b", "fig5c",
                  "fig5d", "fig5e", "fig5f", "a1")


def cmd_figure(presets, out_root: Path, jobs: int = 1) -> None:
    for name in presets:
        out = out_root / name
        if name == "fig3":
            _figure_fig3(out)
        elif name == "fig4a":
            _figure_fig4(out, ("exact", "bessel"))
        elif name == "fig4b":
            _figure_fig4(out, ("exact", "erfi"))
        elif name.startswith("fig5"):
            _figure_fig5(out, name, jobs)
        elif name == "a1":
            _figure_a1(out)
        else:
            raise ConfigError("figure", f"unknown preset {name}")


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringdec",
        description="Thin spectrum and spontaneous decoherence of oscillators on a ring",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON parameter file")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--jobs", type=int, default=1,
                        help="concurrent sweep points (default 1)")
    common.add_argument("--method", help="comma-separated methods override "
                                         "(exact,bessel,erfi)")

    sub.add_parser("spectrum", parents=[common],
                   help="emit thin-spectrum and mode tables")
    sub.add_parser("decohere", parents=[common],
                   help="emit decoherence traces and diagnostics")
    sub.add_parser("sweep", parents=[common],
                   help="sweep one axis and summarise decay times")
    fig = sub.add_parser("figure", parents=[common],
                         help="run named figure-reproduction presets")
    for name in FIGURE_PRESETS:
        fig.add_argument(f"--{name}", action="store_true",
                         help=f"run the {name} preset")
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if args.out:
        config = replace(config, out_dir=Path(args.out))
    if args.method:
        methods = tuple(m.strip() for m in args.method.split(",") if m.strip())
        for mth in methods:
            if mth not in _METHODS:
                raise ConfigError("--method", f"unknown method {mth!r}")
        if not methods:
            raise ConfigError("--method", "no methods given")
        config = replace(config, methods=methods)
    return config


def _error_json(code: int, exc: Exception) -> str:
    payload = {"error": {"code": code, "type": type(exc).__name__,
                         "message": str(exc)}}
    if isinstance(exc, ConfigError):
        payload["error"]["field"] = exc.field_path
    return json.dumps(payload, sort_keys=True)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "figure":
            presets = [name for name in FIGURE_PRESETS if getattr(args, name)]
            if not presets:
                raise ConfigError("figure", "select at least one preset "
                                            f"from {FIGURE_PRESETS}")
            out_root = Path(args.out) if args.out else Path("figures")
            cmd_figure(presets, out_root, jobs=args.jobs)
            return EXIT_OK

        if not args.config:
            raise ConfigError("--config", f"{args.command} requires a config file")
        config = _apply_overrides(load_config(args.config), args)
        if args.command == "spectrum":
            cmd_spectrum(config)
        elif args.command == "decohere":
            cmd_decohere(config)
        elif args.command == "sweep":
            cmd_sweep(config, jobs=args.jobs)
        return EXIT_OK
    except ConfigError as exc:
        print(_error_json(EXIT_CONFIG, exc))
        return EXIT_CONFIG
    except (SpectrumError, DecoherenceError, SeriesConvergenceError,
            QuadratureError, ValueError) as exc:
        print(_error_json(EXIT_SOLVER, exc))
        return EXIT_SOLVER
    except OSError as exc:
        print(_error_json(EXIT_IO, exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
