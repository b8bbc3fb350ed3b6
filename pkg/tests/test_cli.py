import json
import math
from pathlib import Path

import numpy as np
import pytest

from ringdec.cli import (
    ConfigError,
    SweepSpec,
    load_config,
    main,
)
from ringdec.spectrum import load_golden_records

GOLDEN = Path(__file__).parent / "golden"

MINIMAL = {"N": 80, "mass_mp": 40, "kappa_N_per_m": 1e-13, "R_m": 5e-7,
           "T_K": 1.21e-7}


def write_cfg(tmp_path, extra=None, name="cfg.json", base=None):
    cfg = dict(base if base is not None else MINIMAL)
    if extra:
        cfg.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


# ----------------------------------------------------------------------
# config loading
# ----------------------------------------------------------------------

def test_minimal_config_accepted(tmp_path):
    cfg = load_config(write_cfg(tmp_path))
    assert cfg.params.N == 80
    assert cfg.params.m == pytest.approx(40 * 1.67262192369e-27, rel=1e-12)
    assert cfg.n_max == 80 and cfg.alpha_max == 1
    assert cfg.methods == ("exact",)
    assert cfg.t_max_s == "auto" and cfg.points == 2000
    assert cfg.out_format == "csv"


def test_mass_exclusivity(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, {"mass_kg": 1e-26}))
    assert "mass" in exc.value.field_path


def test_negative_kappa_field_path(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, {"kappa_N_per_m": -1e-13}))
    assert exc.value.field_path == "kappa_N_per_m"


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, {"spring": 1.0}))
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, {"times": {"dt": 1.0}}))
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, {"output": {"path": "x"}}))


def test_times_and_methods_validation(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, {"times": {"points": 1}}))
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, {"times": {"t_max_s": -1.0}}))
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, {"methods": ["exact", "magic"]}))
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, {"methods": []}))


def test_sweep_spec_validation(tmp_path):
    with pytest.raises(ConfigError):
        SweepSpec(axis="Q", values=(1.0,))
    with pytest.raises(ConfigError):
        SweepSpec(axis="T", values=())
    with pytest.raises(ConfigError):
        SweepSpec(axis="T", values=(1.0, 3.0, 2.0))
    cfg = load_config(write_cfg(tmp_path, {"sweep": {"axis": "T",
                                                     "values": [1e-8, 1e-7]}}))
    assert cfg.sweep.axis == "T"


# ----------------------------------------------------------------------
# spectrum command
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def spectrum_out(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("spectrum")
    cfg = write_cfg(tmp, {"n_max": 12, "output": {"dir": str(tmp / "out")},
                          "N": 8})
    assert main(["spectrum", "--config", str(cfg)]) == 0
    return tmp / "out"


def test_spectrum_files_and_columns(spectrum_out):
    header, rows = read_csv(spectrum_out / "thin_spectrum.csv")
    assert header == ["n", "alpha", "eps_joule", "E_joule", "eps_hw1", "E_hw1"]
    ns = sorted({int(r[0]) for r in rows})
    assert ns == list(range(-12, 13))
    header2, rows2 = read_csv(spectrum_out / "modes.csv")
    assert header2 == ["k", "omega_rad_s", "q_per_m", "l_m", "degenerate_flag"]
    assert len(rows2) == 7


def test_spectrum_round_trip_parity(spectrum_out):
    _, rows = read_csv(spectrum_out / "thin_spectrum.csv")
    eps = {(int(r[0]), int(r[1])): float(r[2]) for r in rows}
    for (n, alpha), value in eps.items():
        assert eps[(-n, alpha)] == value


# ----------------------------------------------------------------------
# decohere command
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def decohere_out(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("decohere")
    cfg = write_cfg(tmp, {"n_max": 40, "methods": ["exact", "bessel", "erfi"],
                          "times": {"points": 300},
                          "output": {"dir": str(tmp / "out")}})
    assert main(["decohere", "--config", str(cfg)]) == 0
    return tmp / "out"


def test_decohere_trace_starts_at_unity(decohere_out):
    for method in ("exact", "bessel", "erfi"):
        _, rows = read_csv(decohere_out / f"trace_{method}.csv")
        t0, f0 = float(rows[0][0]), float(rows[0][1])
        assert t0 == 0.0
        assert abs(f0 - 1.0) < 1e-12


def test_decohere_diagnostics_contract(decohere_out):
    diag = json.loads((decohere_out / "diagnostics.json").read_text())
    expected = {"n_fwhm", "r", "eta", "gamma_cutoff", "tau_s", "tau_spon_s",
                "g", "delta_e_prime_joule", "delta_g", "first_decay_time_s"}
    assert set(diag) == expected
    assert diag["r"] == pytest.approx(1.00, abs=0.01)
    assert diag["gamma_cutoff"] == 5


def test_decohere_erfi_with_flat_splitting_fails(tmp_path, capsys):
    # N=4 has a degenerate mode 1: no splitting, erfi undefined
    cfg = write_cfg(tmp_path, base={"N": 4, "mass_mp": 40,
                                    "kappa_N_per_m": 1e-13, "R_m": 5e-7,
                                    "T_K": 1e-7, "methods": ["erfi"],
                                    "output": {"dir": str(tmp_path / "o")}})
    code = main(["decohere", "--config", str(cfg)])
    assert code == 3
    err = json.loads(capsys.readouterr().out)
    assert err["error"]["code"] == 3


def test_exit_code_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"kappa_N_per_m": -1.0})
    assert main(["decohere", "--config", str(cfg)]) == 2
    err = json.loads(capsys.readouterr().out)
    assert err["error"]["field"] == "kappa_N_per_m"


def test_exit_code_io_error(tmp_path, capsys):
    assert main(["decohere", "--config", str(tmp_path / "missing.json")]) == 4


def test_determinism_rerun_byte_identical(tmp_path):
    outs = []
    for run in ("one", "two"):
        out = tmp_path / run
        cfg = write_cfg(tmp_path, {"n_max": 40, "times": {"points": 50},
                                   "output": {"dir": str(out)}},
                        name=f"cfg_{run}.json")
        assert main(["decohere", "--config", str(cfg)]) == 0
        outs.append(out)
    for name in ("trace_exact.csv", "diagnostics.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


# ----------------------------------------------------------------------
# sweep command
# ----------------------------------------------------------------------

def test_sweep_single_value_matches_decohere(tmp_path):
    base = {"N": 8, "mass_mp": 40, "kappa_N_per_m": 1e-16, "R_m": 5e-7,
            "T_K": 1.21e-7, "n_max": 8, "times": {"points": 40}}
    out_a = tmp_path / "a"
    cfg_a = write_cfg(tmp_path, {"output": {"dir": str(out_a)}},
                      name="a.json", base=base)
    assert main(["decohere", "--config", str(cfg_a)]) == 0

    out_b = tmp_path / "b"
    cfg_b = write_cfg(tmp_path, {"output": {"dir": str(out_b)},
                                 "sweep": {"axis": "T", "values": [1.21e-7]}},
                      name="b.json", base=base)
    assert main(["sweep", "--config", str(cfg_b)]) == 0
    a = (out_a / "trace_exact.csv").read_bytes()
    b = (out_b / "point_000_trace_exact.csv").read_bytes()
    assert a == b


def test_sweep_r_scales_with_sqrt_T(tmp_path):
    base = {"N": 8, "mass_mp": 40, "kappa_N_per_m": 1e-16, "R_m": 5e-7,
            "T_K": 1e-7, "n_max": 8, "times": {"points": 40}}
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, {"output": {"dir": str(out)},
                               "sweep": {"axis": "T",
                                         "values": [1e-7, 4e-7, 1.6e-6]}},
                    base=base)
    assert main(["sweep", "--config", str(cfg)]) == 0
    header, rows = read_csv(out / "sweep_summary.csv")
    assert header == ["axis_value", "first_decay_time_s", "r", "tau_s", "status"]
    rs = [float(r[2]) for r in rows]
    assert rs[1] == pytest.approx(2 * rs[0], rel=1e-12)
    assert rs[2] == pytest.approx(2 * rs[1], rel=1e-12)
    assert all(r[4] == "ok" for r in rows)


def test_sweep_records_point_failures(tmp_path):
    # N = 4 has no qubit splitting: that point fails, the sweep continues
    base = {"N": 8, "mass_mp": 40, "kappa_N_per_m": 1e-16, "R_m": 5e-7,
            "T_K": 1.21e-7, "n_max": 8, "times": {"points": 20}}
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, {"output": {"dir": str(out)},
                               "sweep": {"axis": "N", "values": [4, 8]}},
                    base=base)
    assert main(["sweep", "--config", str(cfg)]) == 0
    _, rows = read_csv(out / "sweep_summary.csv")
    assert rows[0][4].startswith("error:")
    assert rows[1][4] == "ok"


# ----------------------------------------------------------------------
# figure presets
# ----------------------------------------------------------------------

def test_figure_requires_preset(tmp_path, capsys):
    assert main(["figure", "--out", str(tmp_path)]) == 2


def test_figure_a1_matches_golden(tmp_path):
    assert main(["figure", "--a1", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "a1" / "a1_theta_sweep.csv")
    assert header == ["theta", "nu0", "nu1", "nu2", "nu3"]
    golden = load_golden_records(GOLDEN / "a1_theta_sweep.json")
    assert len(rows) == len(golden)
    for row, rec in zip(rows, golden):
        assert float(row[0]) == pytest.approx(rec["theta"], abs=1e-12)
        got = np.array([float(v) for v in row[1:]])
        assert np.max(np.abs(got - np.array(rec["nu_solver"]))) < 1e-9
        if rec["richardson_err"]:
            assert np.max(np.abs(got - np.array(rec["nu"]))) < 1e-4

    header, rows = read_csv(tmp_path / "a1" / "a1_lambda_sweep.csv")
    golden = load_golden_records(GOLDEN / "a1_lambda_sweep.json")
    for row, rec in zip(rows, golden):
        got = np.array([float(v) for v in row[1:]])
        assert np.max(np.abs(got - np.array(rec["nu_solver"]))) < 1e-9
        if rec["richardson_err"]:
            assert np.max(np.abs(got - np.array(rec["nu"]))) < 1e-4
