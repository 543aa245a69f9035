import math
import warnings

import numpy as np
import pytest

from kondometry.exceptions import (
    ChainTooShortError,
    GridResolutionWarning,
    InvalidBracketError,
    InvalidInputError,
)
from kondometry.models import GridPoint
from kondometry.models.critical import entropy_scaling
from kondometry.nrg import (
    KcResult,
    NrgBackend,
    NrgConfig,
    crossing_temperature,
    estimate_tk,
    extract_critical_constants,
    flows,
    metrology_grid,
    nrg_metrology,
    tune_kc,
)
from kondometry.nrg.thermo import phase_indicator, plateau
from kondometry.sweep import exact_grid

from .conftest import flow_tables

LOG_TWO = math.log(2.0)
HALF_LOG_TWO = 0.5 * LOG_TWO
SHELL_TEMPERATURES = np.geomspace(1.0, 1e-12, 400)

K_C, T_K, CROSSOVER, C_STAR = 0.4, 0.3, 0.035, -0.4


def critical_entropy(t):
    # ln 2 at T_K, ln(2)/2 plateau far below it
    return HALF_LOG_TWO * (1.0 + 2.0 * t / (t + T_K))


def fake_flow(coupling):
    """Flow towards the critical plateau, leaving it at T* on either side of K_C."""
    t = SHELL_TEMPERATURES
    s = critical_entropy(t)
    c = np.full(len(t), C_STAR)

    dk = coupling - K_C
    if dk != 0.0:
        t_star = CROSSOVER * dk**2 / T_K
        s = s + entropy_scaling(t / t_star)
        locked = t_star**2 / (t**2 + t_star**2)
        # towards -3/4 in the local singlet phase, away from it on the Kondo side
        c = c - 0.35 * locked if dk > 0.0 else c + 0.1 * locked
    return flow_tables(coupling, t, s, c)


@pytest.fixture
def fake_flows(monkeypatch):
    calls = []

    def flows(config, coupling, exchange, field=0.0, workers=1):
        calls.append(coupling)
        return fake_flow(coupling), []

    monkeypatch.setattr("kondometry.nrg.thermo.flows", flows)
    return calls


def test_crossing_temperature():
    tables = flow_tables(0.0, [1.0, 0.1, 0.01], [1.0, 0.5, 0.1], [0.0, 0.0, 0.0])
    # halfway between 1.0 and 0.5 in entropy, halfway in log T
    assert crossing_temperature(tables, 0.75) == pytest.approx(math.sqrt(0.1))

    with pytest.raises(ChainTooShortError):
        crossing_temperature(tables, 0.01)


def test_phase_indicator():
    assert phase_indicator(fake_flow(K_C + 0.01)) == 1
    assert phase_indicator(fake_flow(K_C - 0.01)) == -1
    assert phase_indicator(fake_flow(K_C)) == 0
    assert len(plateau(fake_flow(K_C))) > 0

    hot = flow_tables(0.0, [1.0, 0.5], [1.2, 1.1], [0.0, 0.0])
    with pytest.raises(ChainTooShortError):
        phase_indicator(hot)


def test_tune_kc_bisects_to_the_critical_point(small_nrg, fake_flows):
    result = tune_kc(1.0, small_nrg, tk=T_K)
    assert result.lower <= K_C <= result.upper
    assert result.upper - result.lower <= 1e-3 * T_K
    assert result.k_c == pytest.approx(K_C, abs=1e-3 * T_K)
    # the first two trials are the default bracket ends
    assert fake_flows[:2] == [0.0, 2.0]


def test_tune_kc_rejects_bad_brackets(small_nrg, fake_flows):
    with pytest.raises(InvalidBracketError):
        tune_kc(1.0, small_nrg, bracket=(0.5, 1.0), tk=T_K)
    with pytest.raises(InvalidBracketError):
        tune_kc(1.0, small_nrg, bracket=(1.0, 0.5), tk=T_K)


def test_extract_critical_constants(small_nrg, fake_flows):
    kc = KcResult(K_C, K_C, K_C, fake_flow(K_C))
    consts = extract_critical_constants(1.0, small_nrg, kc=kc)

    assert consts.k_c == K_C
    assert consts.t_k == pytest.approx(T_K, rel=1e-2)
    assert consts.c_star == pytest.approx(C_STAR)
    assert consts.c == pytest.approx(CROSSOVER, rel=1e-2)


def bilinear_tables(couplings, temperatures):
    # C = -0.3 + 0.05 K T has exact finite differences on any grid
    return [
        flow_tables(k, temperatures, np.zeros(len(temperatures)), -0.3 + 0.05 * k * temperatures)
        for k in couplings
    ]


def test_metrology_grid_derivatives():
    temperatures = np.geomspace(1.0, 1e-3, 12)
    grid = metrology_grid(bilinear_tables([0.5, 0.3, 0.4], temperatures))

    np.testing.assert_allclose(grid.couplings, [0.3, 0.4, 0.5])
    np.testing.assert_allclose(grid.temperatures, temperatures[::-1])
    t, k = np.meshgrid(grid.temperatures, grid.couplings)
    np.testing.assert_allclose(grid.correlator, -0.3 + 0.05 * k * t)
    np.testing.assert_allclose(grid.dc_dt, 0.05 * k, rtol=1e-10)
    np.testing.assert_allclose(grid.dc_dk, 0.05 * t, rtol=1e-10)
    assert not grid.coarse.any()


def test_metrology_rows_follow_the_grid():
    temperatures = np.geomspace(1.0, 1e-3, 6)
    grid = metrology_grid(bilinear_tables([0.3, 0.4, 0.5], temperatures))
    rows = grid.rows()

    assert len(rows) == 18
    assert [row.K for row in rows[:6]] == [0.3] * 6
    q_t, q_k = grid.qsnr()
    np.testing.assert_allclose([row.Q_SP_T for row in rows], q_t.ravel(), rtol=1e-12)
    np.testing.assert_allclose([row.Q_SP_K for row in rows], q_k.ravel(), rtol=1e-12)
    assert all(row.singular_flag for row in rows)


def test_metrology_grid_temperature_window():
    temperatures = np.geomspace(1.0, 1e-3, 12)
    grid = metrology_grid(bilinear_tables([0.3, 0.4, 0.5], temperatures), t_range=(1e-2, 0.5))
    assert grid.temperatures.min() >= 1e-2
    assert grid.temperatures.max() <= 0.5
    assert grid.correlator.shape == (3, len(grid.temperatures))

    with pytest.raises(InvalidInputError):
        metrology_grid(bilinear_tables([0.3, 0.4, 0.5], temperatures), t_range=(2.0, 3.0))


def test_metrology_grid_rejects_bad_inputs():
    temperatures = np.geomspace(1.0, 1e-3, 6)
    with pytest.raises(InvalidInputError):
        metrology_grid(bilinear_tables([0.3, 0.4], temperatures))
    with pytest.raises(InvalidInputError):
        metrology_grid(bilinear_tables([0.3, 0.3, 0.4], temperatures))

    tables = bilinear_tables([0.3, 0.4], temperatures)
    tables += bilinear_tables([0.5], temperatures * 1.1)
    with pytest.raises(InvalidInputError):
        metrology_grid(tables)


def test_kinks_are_flagged():
    temperatures = np.geomspace(1.0, 1e-3, 6)
    tables = [
        flow_tables(k, temperatures, np.zeros(6), -0.3 + 0.1 * abs(k - 0.4) * temperatures)
        for k in (0.3, 0.4, 0.5)
    ]
    with pytest.warns(GridResolutionWarning):
        grid = metrology_grid(tables)
    assert grid.coarse[1].all()


def test_nrg_metrology_runs_each_coupling_once(small_nrg, monkeypatch):
    temperatures = np.geomspace(1.0, 1e-3, 6)
    calls = []

    def flows(config, coupling, exchange, field=0.0, workers=1):
        calls.append(coupling)
        return bilinear_tables([coupling], temperatures)[0], []

    monkeypatch.setattr("kondometry.nrg.metrology.flows", flows)
    grid = nrg_metrology(1.0, small_nrg, [0.5, 0.3, 0.4, 0.3])
    assert calls == [0.3, 0.4, 0.5]
    assert grid.correlator.shape == (3, 6)


def test_nrg_backend_validation(settings, small_nrg):
    backend = NrgBackend(settings, nrg=small_nrg)
    points = [GridPoint(0.1, k) for k in (0.3, 0.4)]
    assert len(backend.validate(points)) == 1
    assert backend.validate(points + [GridPoint(0.1, 0.5)]) == []

    with pytest.raises(InvalidInputError):
        backend.evaluate(points[0])


@pytest.mark.filterwarnings("ignore::kondometry.exceptions.GridResolutionWarning")
def test_nrg_backend_end_to_end(settings, small_nrg):
    backend = NrgBackend(settings, nrg=small_nrg)
    points = [GridPoint(t, k) for k in (0.2, 0.3, 0.4) for t in (1e-3, 0.5)]
    rows = backend.evaluate_grid(points)

    couplings = sorted({row.K for row in rows})
    assert couplings == [0.2, 0.3, 0.4]
    assert all(1e-3 <= row.T <= 0.5 for row in rows)
    assert all(-0.75 <= row.C <= 0.25 for row in rows)


def longest_run(mask):
    best = current = 0
    for inside in mask:
        current = current + 1 if inside else 0
        best = max(best, current)
    return best


@pytest.fixture(scope="module")
def desk_nrg():
    # lowest shell near 1e-8 D, far below T_K at J = 1
    return NrgConfig(discretization=3.0, kept_states=800, chain_length=34)


@pytest.fixture(scope="module")
def tuned(desk_nrg):
    tk = estimate_tk(1.0, desk_nrg)
    return tk, tune_kc(1.0, desk_nrg, tk=tk)


@pytest.mark.slow
def test_tuned_flow_has_the_critical_plateau(tuned):
    tk, kc = tuned
    assert kc.upper - kc.lower <= 1e-3 * tk
    assert kc.k_c == pytest.approx(0.618, rel=0.3)

    s = kc.tables.impurity_entropy
    assert longest_run(np.abs(s - HALF_LOG_TWO) <= 0.02) >= 4


@pytest.mark.slow
def test_flows_leave_the_critical_point_in_opposite_directions(desk_nrg, tuned):
    tk, kc = tuned
    above, _ = flows(desk_nrg, kc.k_c + 0.1 * tk, 1.0)
    below, _ = flows(desk_nrg, kc.k_c - 0.1 * tk, 1.0)

    assert phase_indicator(above) == 1
    assert phase_indicator(below) == -1
    assert above.correlator[-1] < below.correlator[-1]
    assert above.impurity_entropy[-1] == pytest.approx(0.0, abs=0.05)
    assert below.impurity_entropy[-1] == pytest.approx(0.0, abs=0.05)


@pytest.mark.slow
def test_coupling_precision_peaks_at_the_critical_point(desk_nrg, tuned):
    tk, kc = tuned
    offsets = np.arange(-3, 4)
    couplings = kc.k_c + 0.01 * tk * offsets
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridResolutionWarning)
        grid = nrg_metrology(1.0, desk_nrg, couplings)
    q_t, q_k = grid.qsnr()

    # well below every detuned T* but above the residual one of the tuned coupling
    j = int(np.argmin(np.abs(np.log(grid.temperatures / 1e-7))))
    assert int(np.argmax(q_k[:, j])) == 3

    deep = (grid.temperatures >= 1e-4 * tk) & (grid.temperatures <= 1e-3 * tk)
    assert deep.any()
    assert np.all(q_t[3, deep] < 1e-3)


@pytest.mark.slow
def test_derivatives_match_the_critical_solution(desk_nrg, tuned):
    tk, kc = tuned
    consts = extract_critical_constants(1.0, desk_nrg, kc=kc)
    couplings = consts.k_c + consts.t_k * np.array([2e-3, 4e-3, 6e-3])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridResolutionWarning)
        grid = nrg_metrology(1.0, desk_nrg, couplings)
    exact = exact_grid(consts, grid.temperatures, grid.couplings)

    window = (grid.temperatures >= 1e-4 * consts.t_k) & (grid.temperatures <= 1e-2 * consts.t_k)
    assert window.any()
    # interior coupling only: its K derivative is a central difference
    np.testing.assert_allclose(grid.dc_dt[1, window], exact.dc_dt[1, window], rtol=0.1)
    np.testing.assert_allclose(grid.dc_dk[1, window], exact.dc_dk[1, window], rtol=0.1)


@pytest.fixture(scope="module")
def weak_coupling_nrg():
    # reaches 1e-11 D, below T_K at J = 0.12
    return NrgConfig(discretization=3.0, kept_states=600, chain_length=48)


@pytest.mark.slow
def test_kondo_temperature_scale(weak_coupling_nrg):
    exchanges = np.array([0.12, 0.15, 0.2])
    tks = np.array([estimate_tk(j, weak_coupling_nrg) for j in exchanges])

    assert 1e-8 <= tks[1] <= 1e-6
    slope, _ = np.polyfit(1.0 / exchanges, np.log(tks), 1)
    assert slope < 0.0
    r = np.corrcoef(1.0 / exchanges, np.log(tks))[0, 1]
    assert r**2 > 0.99


@pytest.mark.slow
def test_critical_coupling_in_units_of_kondo_temperature(weak_coupling_nrg):
    tk = estimate_tk(0.15, weak_coupling_nrg)
    kc = tune_kc(0.15, weak_coupling_nrg, bracket=(0.0, 100.0 * tk), tk=tk)
    assert 3.0 <= kc.k_c / tk <= 12.0
