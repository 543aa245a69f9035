import numpy as np
import pytest

from kondometry.estimation import single_parameter_qfi
from kondometry.exceptions import DerivativeError, InvalidInputError, SymmetryViolationError
from kondometry.models import GridPoint, NarrowBandBackend
from kondometry.models import large_k
from kondometry.models.narrow_band import (
    DenseHermitian,
    NblParams,
    build_hamiltonian,
    finite_difference,
    finite_step,
    nbl_metrology,
    observables,
    population_jacobian,
    solve,
    spin_correlator_operator,
    total_sz_operator,
)


def test_hamiltonian_dimension():
    h = build_hamiltonian(coupling=0.5, exchange=1.0, field=0.2)
    assert h.dimension == 64
    np.testing.assert_array_equal(h.matrix, h.matrix.T)


def test_total_spin_is_conserved():
    h = build_hamiltonian(coupling=0.7, exchange=1.3, field=0.1).matrix
    sz = total_sz_operator()
    np.testing.assert_allclose(h @ sz - sz @ h, 0.0, atol=1e-13)


@pytest.mark.parametrize("field", [0.0, 0.4])
def test_weak_exchange_reduces_to_isolated_dimer(field):
    for t, k in ((0.5, 1.0), (0.2, -0.3), (2.0, 0.8)):
        nbl = observables(NblParams(t, k, exchange=1e-6, field=field))
        dimer = large_k.observables(large_k.LargeKParams(t, k, field))
        assert nbl.c == pytest.approx(dimer.c, abs=1e-5)
        assert nbl.m == pytest.approx(dimer.m, abs=1e-5)
        assert nbl.chi == pytest.approx(dimer.chi, abs=1e-5)


def test_weak_exchange_qsnr_matches_closed_form():
    t, k = 0.4, 1.1
    _, report = nbl_metrology(NblParams(t, k, exchange=1e-6))
    assert report.single("T") == pytest.approx(large_k.qsnr_sp_universal(k / t), rel=1e-4)
    assert report.single("K") == pytest.approx(large_k.qsnr_sp_universal(k / t), rel=1e-4)


def test_entropy_obeys_maxwell_relation():
    params = NblParams(temperature=0.3, coupling=0.6, exchange=1.0, field=0.05)
    slope = finite_difference(lambda p: solve(p).free_energy, params, "T")
    assert solve(params).entropy == pytest.approx(-float(slope), rel=1e-6)


def test_high_temperature_entropy_counts_all_states():
    solution = solve(NblParams(temperature=1e4, coupling=0.5, exchange=1.0))
    assert solution.entropy == pytest.approx(np.log(64.0), rel=1e-4)


def test_correlator_matches_operator_expectation():
    params = NblParams(temperature=0.25, coupling=0.3, exchange=1.0)
    solution = solve(params)
    assert solution.expectation(spin_correlator_operator()) == pytest.approx(
        observables(params).c, abs=1e-12
    )


def test_finite_difference_guards():
    params = NblParams(temperature=1e-3, coupling=0.5)
    with pytest.raises(DerivativeError):
        finite_difference(lambda p: solve(p).energy, params, "T", step=1e-2)
    with pytest.raises(InvalidInputError):
        finite_difference(lambda p: solve(p).energy, params, "D")


def test_backend_row_is_consistent(settings):
    settings.set_value("sweep.field", 0.2)
    row = NarrowBandBackend(settings).evaluate(GridPoint(temperature=0.3, coupling=0.5))

    params = NblParams(0.3, 0.5, exchange=1.0, field=0.2)
    assert row.C == pytest.approx(observables(params).c, abs=1e-12)
    assert row.B == 0.2
    assert row.H_TT * row.T**2 == pytest.approx(row.Q_SP_T, rel=1e-12)
    # with a field T and K are separately identifiable
    assert not row.singular_flag
    assert 0.0 < row.Q_MP_TT <= row.Q_SP_T


def test_non_hermitian_matrices_are_rejected():
    h = build_hamiltonian(coupling=0.5, exchange=1.0)
    skewed = h.matrix.copy()
    skewed[0, 1] += 1e-3
    with pytest.raises(SymmetryViolationError):
        DenseHermitian(skewed, h.labels)


@pytest.mark.parametrize("coupling,exchange,field", [(0.5, 1.0, 0.0), (-1.2, 0.3, 0.7)])
def test_hamiltonian_is_traceless(coupling, exchange, field):
    h = build_hamiltonian(coupling, exchange, field)
    assert np.trace(h.matrix) == pytest.approx(0.0, abs=1e-12)


def test_decoupled_baths_spectrum():
    k = 0.7
    spectrum = np.linalg.eigvalsh(build_hamiltonian(k, exchange=0.0).matrix)
    expected = np.sort([-0.75 * k] * 16 + [0.25 * k] * 48)
    np.testing.assert_allclose(spectrum, expected, atol=1e-12)


def test_correlator_is_coupling_derivative_of_free_energy(rng):
    for _ in range(20):
        k = rng.uniform(0.1, 2.0) * rng.choice([-1.0, 1.0])
        params = NblParams(rng.uniform(0.2, 2.0), k, exchange=rng.uniform(0.5, 1.5))
        slope = finite_difference(lambda p: solve(p).free_energy, params, "K")
        assert float(slope) == pytest.approx(observables(params).c, rel=1e-6, abs=1e-7)


def test_correlator_and_entropy_maxwell_relation():
    params = NblParams(temperature=0.3, coupling=0.8, exchange=1.0)
    dc_dt = finite_difference(lambda p: observables(p).c, params, "T")
    ds_dk = finite_difference(lambda p: solve(p).entropy, params, "K")
    assert float(dc_dt) == pytest.approx(-float(ds_dk), abs=1e-5)


def test_correlator_sign_follows_the_coupling():
    # at K = 0 the two halves decouple and the impurity spins are uncorrelated
    for t in (0.1, 0.5):
        assert observables(NblParams(t, 0.0, exchange=1.0)).c == pytest.approx(0.0, abs=1e-12)
    assert observables(NblParams(0.1, 0.1, exchange=1.0)).c < 0.0
    assert observables(NblParams(0.1, -0.1, exchange=1.0)).c > 0.0


@pytest.mark.parametrize("coupling,exchange", [(1.0, 1.0), (-0.5, 1.0), (2.0, 0.5)])
def test_correlator_decays_at_high_temperature(coupling, exchange):
    t = 1e3 * max(abs(coupling), exchange)
    assert abs(observables(NblParams(t, coupling, exchange)).c) < 1e-3


def test_zero_field_triplet_populations_are_equal():
    probe = solve(NblParams(temperature=0.4, coupling=0.6, exchange=1.0)).probe
    assert probe.rho_tp == pytest.approx(probe.rho_t0, abs=1e-12)
    assert probe.rho_tm == pytest.approx(probe.rho_t0, abs=1e-12)


@pytest.mark.parametrize("t,k", [(0.3, 0.8), (0.5, 1.5), (1.0, 2.0), (0.5, -1.0)])
def test_zero_field_qfim_is_singular(t, k):
    _, report = nbl_metrology(NblParams(t, k, exchange=1.0))
    assert report.singular
    assert report.multi("T") == 0.0
    assert report.multi("K") == 0.0
    assert report.single("T") > 0.0


@pytest.mark.parametrize("name", ["T", "K"])
def test_halving_the_step_leaves_the_qfi_unchanged(name):
    params = NblParams(temperature=0.3, coupling=0.8, exchange=1.0)
    h = finite_step(params.value(name))
    coarse = single_parameter_qfi(population_jacobian(params, (name,), step=h))
    fine = single_parameter_qfi(population_jacobian(params, (name,), step=h / 2))
    assert fine == pytest.approx(coarse, rel=1e-6)


def test_weak_exchange_approaches_the_dimer():
    # the singlet-triplet mixing induced by J is of order (J / K)^2
    t, k = 0.5, 4.0
    _, report = nbl_metrology(NblParams(t, k, exchange=0.02))
    assert report.single("T") == pytest.approx(large_k.qsnr_sp_universal(k / t), rel=0.02)


@pytest.mark.parametrize("t,k", [(0.5, 0.0), (0.1, 0.0), (0.05, 1e-3), (0.2, -0.5)])
def test_population_derivatives_conserve_normalization(t, k):
    params = NblParams(t, k, exchange=1.0)
    jac = population_jacobian(params)
    scale = max(1.0, float(np.abs(jac.derivs).max()))
    assert np.all(np.abs(jac.derivs.sum(axis=1)) <= 1e-12 * scale)

    _, report = nbl_metrology(params)
    assert np.isfinite(report.single("K"))


def test_backend_rows_at_decoupled_impurities(settings):
    backend = NarrowBandBackend(settings)
    row = backend.evaluate(GridPoint(temperature=0.1, coupling=0.0))
    assert row.C == pytest.approx(0.0, abs=1e-12)
    # Q_SP(K) carries a factor K^2, the information itself does not vanish
    assert row.Q_SP_K == 0.0
    assert row.H_KK > 0.0
