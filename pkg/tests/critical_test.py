import math
import warnings

import numpy as np
import pytest
import scipy.special

from kondometry.exceptions import CriticalValidityWarning, InvalidInputError, ValidityDomainError
from kondometry.models import CriticalBackend, CriticalConstants, GridPoint
from kondometry.models.critical import (
    correlator,
    dc_dk,
    dc_dt,
    entropy_crossover,
    entropy_scaling,
    fit_coupling_asymptote,
    fit_thermometry_asymptote,
    in_universal_window,
    qsnr_critical,
    qsnr_pipeline,
    t_star,
)

CONSTS = CriticalConstants()
TK = CONSTS.t_k
HALF_LOG_TWO = 0.5 * math.log(2.0)

quiet = pytest.mark.filterwarnings("ignore::kondometry.exceptions.CriticalValidityWarning")


def _reference_scaling(t):
    x = 1.0 / t
    a = 0.5 + x
    gamma = scipy.special.gammaln(a) - 0.5 * math.log(math.pi)
    return x * (scipy.special.digamma(a) - 1.0) - gamma


def test_constants_validation():
    with pytest.raises(InvalidInputError):
        CriticalConstants(t_k=0.0)
    with pytest.raises(InvalidInputError):
        CriticalConstants(c_star=0.3)


def test_t_star():
    assert t_star(0.0, CONSTS) == 0.0
    assert t_star(TK, CONSTS) == pytest.approx(CONSTS.c * TK)
    assert t_star(-0.01, CONSTS) == t_star(0.01, CONSTS)


def test_entropy_limits():
    assert entropy_scaling(1e9) == pytest.approx(0.0, abs=1e-6)
    assert entropy_scaling(1e-6) == pytest.approx(-HALF_LOG_TWO, abs=1e-3)
    # vanishing detuning: the crossover scale is zero and S sits on the plateau
    assert entropy_crossover(1e-3 * TK, 0.0, CONSTS) == HALF_LOG_TWO
    assert entropy_crossover(1e-4 * TK, 1e-2 * TK, CONSTS) < HALF_LOG_TWO


def test_entropy_scaling_is_increasing():
    values = entropy_scaling(np.geomspace(1e-6, 1e9, 10_000))
    assert np.all(np.diff(values) > 0.0)


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0 / 7.5, 0.5, 3.0, 100.0])
def test_entropy_scaling_against_scipy(t):
    assert entropy_scaling(t) == pytest.approx(_reference_scaling(t), abs=1e-10)


def test_entropy_branches_join_continuously():
    # 1/2 + 1/t crosses the asymptotic-series threshold at t = 1/7.5
    below, above = entropy_scaling(np.array([1.0 / 7.5 - 1e-9, 1.0 / 7.5 + 1e-9]))
    assert below == pytest.approx(above, abs=1e-8)


def test_maxwell_relation():
    t, dk = 1e-3 * TK, 1e-3 * TK
    h = 1e-4 * dk
    slope = (entropy_crossover(t, dk + h, CONSTS) - entropy_crossover(t, dk - h, CONSTS)) / (
        2.0 * h
    )
    assert dc_dt(t, CONSTS.k_c + dk, CONSTS) == pytest.approx(-slope, rel=1e-6)


def test_critical_point_values():
    for t in (1e-6 * TK, 1e-4 * TK, 1e-2 * TK):
        assert dc_dt(t, CONSTS.k_c, CONSTS) == 0.0
        assert correlator(t, CONSTS.k_c, CONSTS) == pytest.approx(CONSTS.c_star)
        q_t, q_k = qsnr_critical(t, CONSTS.k_c, CONSTS)
        assert q_t == 0.0
        assert q_k > 0.0


def test_symmetry_in_detuning():
    t, dk = 1e-3 * TK, 2e-3 * TK
    up, down = CONSTS.k_c + dk, CONSTS.k_c - dk
    assert dc_dt(t, up, CONSTS) == pytest.approx(-dc_dt(t, down, CONSTS), rel=1e-12)
    assert dc_dk(t, up, CONSTS) == pytest.approx(dc_dk(t, down, CONSTS), rel=1e-12)


def test_correlator_derivatives_match_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(20):
        t = TK * 10.0 ** rng.uniform(-4, -2)
        k = CONSTS.k_c + TK * rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-3, -2)

        ht = 1e-4 * t
        slope_t = (correlator(t + ht, k, CONSTS) - correlator(t - ht, k, CONSTS)) / (2.0 * ht)
        assert dc_dt(t, k, CONSTS) == pytest.approx(slope_t, rel=1e-7)

        hk = 1e-4 * abs(k - CONSTS.k_c)
        slope_k = (correlator(t, k + hk, CONSTS) - correlator(t, k - hk, CONSTS)) / (2.0 * hk)
        assert dc_dk(t, k, CONSTS) == pytest.approx(slope_k, rel=1e-7)


def test_coupling_sensitivity_grows_as_temperature_drops():
    temperatures = np.geomspace(1e-2, 1e-6, 30) * TK
    _, q_k = qsnr_critical(temperatures, np.full(30, CONSTS.k_c), CONSTS)
    assert np.all(np.diff(q_k) > 0.0)
    assert np.all(np.diff(np.abs(dc_dk(temperatures, CONSTS.k_c, CONSTS))) > 0.0)


def test_correlator_stays_close_to_critical_value():
    c = correlator(1e-4 * TK, CONSTS.k_c + 5e-4 * TK, CONSTS)
    assert c == pytest.approx(CONSTS.c_star, abs=1e-3)


@pytest.mark.parametrize("t", [1e-6 * TK, 1e-4 * TK, 1e-2 * TK])
@pytest.mark.parametrize("dk", [-1e-3 * TK, 1e-4 * TK, 1e-3 * TK])
def test_closed_forms_match_pipeline(t, dk):
    k = CONSTS.k_c + dk
    closed = qsnr_critical(t, k, CONSTS)
    assembled = qsnr_pipeline(t, k, CONSTS)
    assert closed[0] == pytest.approx(assembled[0], rel=1e-12)
    assert closed[1] == pytest.approx(assembled[1], rel=1e-12)

    approx_t, approx_k = qsnr_critical(t, k, CONSTS, exact_denominator=False)
    assert approx_t == pytest.approx(closed[0], rel=1e-2)
    assert approx_k == pytest.approx(closed[1], rel=1e-2)


def test_validity_warnings():
    with pytest.warns(CriticalValidityWarning):
        correlator(0.5 * TK, CONSTS.k_c, CONSTS)
    with pytest.warns(CriticalValidityWarning):
        dc_dt(1e-3 * TK, CONSTS.k_c + 0.5 * TK, CONSTS)

    with warnings.catch_warnings():
        warnings.simplefilter("error", CriticalValidityWarning)
        correlator(1e-3 * TK, CONSTS.k_c + 1e-3 * TK, CONSTS)

    assert in_universal_window(1e-3 * TK, CONSTS.k_c, CONSTS)
    assert not in_universal_window(0.2 * TK, CONSTS.k_c, CONSTS)


@quiet
def test_correlator_out_of_range_is_rejected():
    with pytest.raises(ValidityDomainError):
        qsnr_critical(1e-3, CONSTS.k_c + 10.0, CONSTS)


def test_thermometry_asymptote_fit():
    temperatures = np.geomspace(1e-6, 1e-4, 25) * TK
    detunings = np.geomspace(1e-4, 1e-2, 25) * TK
    fit = fit_thermometry_asymptote(CONSTS, temperatures, detunings)
    assert 0.02 <= fit.scale <= 0.08
    assert fit.amplitude > 0.0

    with pytest.raises(InvalidInputError):
        fit_thermometry_asymptote(CONSTS, temperatures, [0.0, 1e-3])


def test_coupling_asymptote_fit():
    # dK^2 << b T throughout, where the log-squared form holds with b = exp(psi(1/2))
    temperatures = np.geomspace(1e-6, 1e-4, 25) * TK
    detunings = np.geomspace(1e-6, 1e-4, 25) * TK
    fit = fit_coupling_asymptote(CONSTS, temperatures, detunings)
    assert 0.1 <= fit.scale <= 0.2

    denominator = (0.25 - CONSTS.c_star) * (0.75 + CONSTS.c_star)
    amplitude = 4.0 * CONSTS.c**2 * CONSTS.k_c**2 / (TK**2 * denominator)
    assert fit.amplitude == pytest.approx(amplitude, rel=0.05)


def test_backend_rows(settings):
    backend = CriticalBackend(settings)
    points = [GridPoint(1e-3 * TK, CONSTS.k_c + 1e-3 * TK), GridPoint(2.0 * TK, CONSTS.k_c)]
    assert len(backend.validate(points)) == 1

    row = backend.evaluate(points[0])
    q_t, q_k = qsnr_critical(points[0].temperature, points[0].coupling, CONSTS)
    assert row.Q_SP_T == pytest.approx(q_t, rel=1e-12)
    assert row.Q_SP_K == pytest.approx(q_k, rel=1e-12)
    assert row.M == 0.0
    # a single observable cannot separate T and K
    assert row.singular_flag


def test_backend_rejects_field(settings):
    settings.set_value("sweep.field", 0.1)
    with pytest.raises(InvalidInputError):
        CriticalBackend(settings)
