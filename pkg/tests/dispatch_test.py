import numpy as np
import pytest

from kondometry import ERROR, RESOURCE_ERROR, SUCCESS, __version__
from kondometry.io import CsvFileIO, load_run
from kondometry.main import main
from kondometry.sweep import CRITICAL_COLUMNS


def test_unknown_command(capsys):
    assert main(["benchmark"]) == ERROR
    assert "kondometry: Unknown command 'benchmark'" in capsys.readouterr().err


def test_bare_invocation_prints_help(capsys):
    assert main([]) == ERROR
    assert "nrg-tune-kc" in capsys.readouterr().out


def test_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_config_roundtrip(tmp_path, capsys):
    path = str(tmp_path / "config.yaml")
    # negative values must not be taken for flags
    assert main(["config", "set", "critical.c_star", "-0.4", "--file", path]) == SUCCESS
    assert main(["config", "get", "critical.c_star", "--file", path]) == SUCCESS
    assert "critical.c_star = -0.4" in capsys.readouterr().out

    assert main(["config", "list", "--file", path]) == SUCCESS
    assert "c_star: -0.4" in capsys.readouterr().out

    assert main(["config", "set", "nrg.kept_states", "plenty", "--file", path]) == ERROR
    assert main(["config", "unset"]) == ERROR


def test_critical_command_writes_table(tmp_path, capsys):
    output = tmp_path / "critical.csv"
    args = ["critical", "-T", "1e-5:1e-3:3:log", "--dK", "1e-4:1e-3:2", "-o", str(output)]
    assert main(args) == SUCCESS
    assert "Wrote 6 rows" in capsys.readouterr().out

    columns, rows = CsvFileIO().read(output, kind="critical")
    assert tuple(columns) == CRITICAL_COLUMNS
    assert all(row["in_window"] for row in rows)


def test_critical_command_needs_both_grids(tmp_path):
    assert main(["critical", "-T", "1e-5:1e-3:3:log", "-o", str(tmp_path / "c.csv")]) == ERROR


def test_sweep_command(tmp_path, capsys):
    output = tmp_path / "sweep.csv"
    args = ["sweep", "--backend", "large-k", "-T", "0.5:1:3", "-K", "0.5:1:2"]
    assert main(args + ["-o", str(output), "--threads", "1"]) == SUCCESS

    out = capsys.readouterr().out
    assert "6 grid points, 6 with a singular QFIM." in out
    _, rows = CsvFileIO().read(output, kind="sweep")
    assert len(rows) == 6


def test_sweep_validation_failure_is_an_error(tmp_path, capsys):
    output = tmp_path / "sweep.csv"
    args = ["sweep", "--backend", "critical", "-T", "0.01:0.3:3", "-K", "0.6:0.62:2"]
    assert main(args + ["-o", str(output), "--threads", "1"]) == ERROR
    assert "cannot evaluate" in capsys.readouterr().err
    assert not output.exists()


def test_resource_errors_get_their_own_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr("kondometry.nrg.engine._BYTES_PER_MIB", 0)
    args = ["nrg-run", "-K", "0.3", "--chain-length", "12", "--kept-states", "150"]
    assert main(args + ["--threads", "1", "-o", str(tmp_path / "run")]) == RESOURCE_ERROR
    assert "Error:" in capsys.readouterr().err


def test_band_halfwidth_flag_reaches_the_wilson_chain(tmp_path):
    args = ["nrg-run", "-K", "0.3", "--chain-length", "10", "--kept-states", "100"]
    assert main(args + ["--threads", "1", "-o", str(tmp_path / "narrow")]) == SUCCESS
    assert main(args + ["-D", "2", "--threads", "1", "-o", str(tmp_path / "wide")]) == SUCCESS

    narrow = load_run(tmp_path / "narrow", shells=False)
    wide = load_run(tmp_path / "wide", shells=False)
    assert narrow.config.band_halfwidth == 1.0
    assert wide.config.band_halfwidth == 2.0
    np.testing.assert_allclose(wide.tables.temperatures, 2.0 * narrow.tables.temperatures)
    # J and K are fixed while the band widens
    assert not np.allclose(wide.tables.correlator, narrow.tables.correlator)
