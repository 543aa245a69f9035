import numpy as np
import pytest

from kondometry import __version__
from kondometry.exceptions import (
    ArtifactNotFoundError,
    InvalidInputError,
    SweepValidationError,
)
from kondometry.io import CsvFileIO, load_run, save_run
from kondometry.io.csv import format_value
from kondometry.models import CriticalConstants, SweepRow
from kondometry.models.large_k import qsnr_sp_universal
from kondometry.nrg import flows
from kondometry.sweep import (
    COMPARISON_COLUMNS,
    THREADS_ENV,
    GridRange,
    SweepConfig,
    compare_critical_vs_nrg,
    comparison_rows,
    exact_grid,
    load_experiment,
    maxima_rows,
    resolve_threads,
    run_sweep,
)

CONSTS = CriticalConstants()


def sweep_config(settings, tmp_path, backend="large-k", **kwargs):
    return SweepConfig(
        backend=backend,
        temperatures=kwargs.pop("temperatures", GridRange(0.5, 2.0, 4)),
        couplings=kwargs.pop("couplings", GridRange(-1.0, 1.0, 3)),
        output=tmp_path / "sweep.csv",
        settings=settings,
        threads=1,
        **kwargs,
    )


def test_grid_range_parse():
    grid = GridRange.parse("1e-3:1:4:log")
    np.testing.assert_allclose(grid.values(), [1e-3, 1e-2, 1e-1, 1.0])
    assert GridRange.parse("0:1:3").values().tolist() == [0.0, 0.5, 1.0]


@pytest.mark.parametrize("text", ["0:1", "a:1:3", "0:1:1", "1:0:3", "0:1:3:log", "0:1:3:cubic"])
def test_grid_range_errors(text):
    with pytest.raises(InvalidInputError):
        GridRange.parse(text)


def test_grid_range_from_dict():
    grid = GridRange.from_dict({"min": "1e-4", "max": 1.0, "count": 3, "spacing": "log"})
    assert grid == GridRange(1e-4, 1.0, 3, "log")

    with pytest.raises(InvalidInputError):
        GridRange.from_dict({"min": 0.0, "max": 1.0})
    with pytest.raises(InvalidInputError):
        GridRange.from_dict({"min": "low", "max": 1.0, "count": 3})


def test_sweep_writes_k_major_csv(settings, tmp_path):
    result = run_sweep(sweep_config(settings, tmp_path))

    with open(result.output) as f:
        header = f.readline()
    assert header == f"# kondometry sweep v1 ({__version__})\n"

    columns, rows = CsvFileIO().read(result.output, kind="sweep")
    assert tuple(columns) == SweepRow.columns()
    assert len(rows) == 12
    assert [row["K"] for row in rows[:4]] == [-1.0] * 4
    assert [row["T"] for row in rows[:4]] == [0.5, 1.0, 1.5, 2.0]

    for row in rows:
        assert row["Q_SP_T"] == pytest.approx(qsnr_sp_universal(row["K"] / row["T"]), rel=1e-10)
        # zero field leaves T and K confounded
        assert row["singular_flag"] is True


def test_sweep_is_reproducible(settings, tmp_path):
    first = run_sweep(sweep_config(settings, tmp_path)).output.read_bytes()
    second = run_sweep(sweep_config(settings, tmp_path)).output.read_bytes()
    assert first == second


def test_sweep_maxima(settings, tmp_path):
    cfg = sweep_config(
        settings,
        tmp_path,
        temperatures=GridRange(0.05, 2.0, 400, "log"),
        couplings=GridRange(0.5, 1.0, 2),
        maxima=tmp_path / "maxima.csv",
    )
    result = run_sweep(cfg)

    _, rows = CsvFileIO().read(result.maxima, kind="maxima")
    assert [row["K"] for row in rows] == [0.5, 1.0]
    for row in rows:
        # the universal maximum sits at K/T ~ 2.845
        assert row["max_Q_SP_T"] == pytest.approx(1.024, abs=0.01)
        assert row["K"] / row["T_max_Q_SP_T"] == pytest.approx(2.845, rel=0.02)

    assert maxima_rows(result.rows)[0][0] == 0.5


def test_critical_sweep_rejects_points_outside_the_window(settings, tmp_path):
    cfg = sweep_config(
        settings,
        tmp_path,
        backend="critical",
        temperatures=GridRange(1e-4, 0.2, 3),
        couplings=GridRange(0.6, 0.63, 2),
    )
    with pytest.raises(SweepValidationError) as excinfo:
        run_sweep(cfg)

    assert excinfo.value.rows
    assert not cfg.output.exists()


def test_unknown_backend(settings, tmp_path):
    with pytest.raises(InvalidInputError):
        run_sweep(sweep_config(settings, tmp_path, backend="dmrg"))


def test_resolve_threads(settings, monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    settings.set_value("core.threads", 3)
    assert resolve_threads(None, settings) == 3

    monkeypatch.setenv(THREADS_ENV, "5")
    assert resolve_threads(None, settings) == 5
    assert resolve_threads(2, settings) == 2

    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(InvalidInputError):
        resolve_threads(None, settings)
    with pytest.raises(InvalidInputError):
        resolve_threads(0, settings)


def test_load_experiment(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text("backend: nbl\ngrid:\n  T: {min: 0.1, max: 1.0, count: 3}\n")
    experiment = load_experiment(path)
    assert experiment["backend"] == "nbl"
    assert GridRange.from_dict(experiment["grid"]["T"]).count == 3

    with pytest.raises(InvalidInputError):
        load_experiment(tmp_path / "missing.yaml")

    path.write_text("- just\n- a list\n")
    with pytest.raises(InvalidInputError):
        load_experiment(path)


def test_exact_grid_compares_cleanly_with_itself():
    temperatures = np.geomspace(1e-5, 1e-3, 4) * CONSTS.t_k
    couplings = CONSTS.k_c + np.array([-1e-3, 1e-3]) * CONSTS.t_k
    rows = comparison_rows(exact_grid(CONSTS, temperatures, couplings), CONSTS)

    assert len(rows) == 8
    assert all(len(row) == len(COMPARISON_COLUMNS) for row in rows)
    for row in rows:
        assert row[8:11] == (0.0, 0.0, 0.0)
        assert row[-1] is False


def test_csv_formatting(tmp_path):
    assert format_value(True) == "true"
    assert format_value(0.1 + 0.2, digits=3) == "0.3"
    assert format_value("large-k") == "large-k"

    with pytest.raises(InvalidInputError):
        CsvFileIO(digits=0)

    io = CsvFileIO(digits=6)
    path = io.write(tmp_path / "table.csv", ("a", "b"), [(1.0, False)], kind="maxima")
    with pytest.raises(InvalidInputError):
        io.read(path, kind="sweep")
    with pytest.raises(InvalidInputError):
        io.write(tmp_path / "bad.csv", ("a", "b"), [(1.0,)])
    with pytest.raises(ArtifactNotFoundError):
        io.read(tmp_path / "missing.csv")

    path.write_text("a,b\n1,2\n")
    with pytest.raises(InvalidInputError):
        io.read(path)


@pytest.fixture
def saved_runs(small_nrg, tmp_path):
    rundirs = []
    for k in (0.2, 0.3, 0.4):
        tables, shells = flows(small_nrg, coupling=k, exchange=1.0)
        rundirs.append(save_run(tmp_path / f"K{k}", small_nrg, tables, shells))
    return rundirs


def test_run_artifacts_round_trip(small_nrg, tmp_path):
    tables, shells = flows(small_nrg, coupling=0.3, exchange=1.0)
    rundir = save_run(tmp_path / "run", small_nrg, tables, shells, constants=CONSTS)

    loaded = load_run(rundir)
    assert loaded.config == small_nrg
    assert loaded.constants == CONSTS
    assert loaded.tables.coupling == 0.3
    np.testing.assert_array_equal(loaded.tables.temperatures, tables.temperatures)
    np.testing.assert_array_equal(loaded.tables.correlator, tables.correlator)
    np.testing.assert_array_equal(loaded.tables.impurity_entropy, tables.impurity_entropy)

    assert len(loaded.shells) == len(shells)
    for a, b in zip(loaded.shells, shells):
        assert a.kept == b.kept
        np.testing.assert_array_equal(a.spectrum(), b.spectrum())

    assert load_run(rundir, shells=False).shells == []

    with pytest.raises(InvalidInputError):
        save_run(rundir, small_nrg, tables, shells)
    save_run(rundir, small_nrg, tables, shells, overwrite=True)

    with pytest.raises(ArtifactNotFoundError):
        load_run(tmp_path / "nowhere")


@pytest.mark.filterwarnings("ignore::kondometry.exceptions.GridResolutionWarning")
def test_compare_saved_runs(saved_runs, tmp_path):
    output = compare_critical_vs_nrg(saved_runs, tmp_path / "comparison.csv", consts=CONSTS)

    columns, rows = CsvFileIO().read(output, kind="comparison")
    assert tuple(columns) == COMPARISON_COLUMNS
    assert len(rows) % 3 == 0
    for row in rows:
        assert -0.75 <= row["C_nrg"] <= 0.25
        assert isinstance(row["flagged"], bool)
