import numpy as np
import pytest
import scipy.special

from kondometry.exceptions import SpecialFunctionDomainError
from kondometry.special import (
    DIGAMMA_SERIES,
    LN_GAMMA_SERIES,
    TRIGAMMA_SERIES,
    digamma,
    ln_gamma,
    trigamma,
)

POINTS = np.array([1e-3, 0.1, 0.5, 1.0, 2.5, 7.9, 8.0, 12.0, 150.0, 1e5])


def test_ln_gamma_against_scipy():
    np.testing.assert_allclose(
        ln_gamma(POINTS), scipy.special.gammaln(POINTS), rtol=1e-12, atol=1e-13
    )


def test_digamma_against_scipy():
    np.testing.assert_allclose(digamma(POINTS), scipy.special.digamma(POINTS), rtol=1e-12)


def test_trigamma_against_scipy():
    np.testing.assert_allclose(
        trigamma(POINTS), scipy.special.polygamma(1, POINTS), rtol=1e-12
    )


def test_known_values():
    assert digamma(1.0) == pytest.approx(-np.euler_gamma, rel=1e-14)
    assert trigamma(1.0) == pytest.approx(np.pi**2 / 6.0, rel=1e-14)
    assert ln_gamma(0.5) == pytest.approx(0.5 * np.log(np.pi), rel=1e-13)


def test_scalars_stay_scalars():
    assert isinstance(digamma(3.0), float)
    assert digamma(np.ones((2, 3))).shape == (2, 3)


@pytest.mark.parametrize("fn", [ln_gamma, digamma, trigamma])
def test_nonpositive_arguments_are_rejected(fn):
    with pytest.raises(SpecialFunctionDomainError):
        fn(0.0)
    with pytest.raises(SpecialFunctionDomainError):
        fn([1.0, -2.0])


def test_recurrence_identities():
    x = np.linspace(0.5, 100.0, 500)
    np.testing.assert_allclose(digamma(x + 1.0), digamma(x) + 1.0 / x, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(trigamma(x + 1.0), trigamma(x) - 1.0 / x**2, rtol=1e-13)


@pytest.mark.parametrize("series", [DIGAMMA_SERIES, TRIGAMMA_SERIES, LN_GAMMA_SERIES])
def test_asymptotic_series_stop_at_six_terms(series):
    assert len(series) == 6


def test_asymptotic_branch_at_the_recurrence_threshold():
    x = np.linspace(8.0, 9.0, 50)
    np.testing.assert_allclose(digamma(x), scipy.special.digamma(x), rtol=1e-13)
    np.testing.assert_allclose(trigamma(x), scipy.special.polygamma(1, x), rtol=1e-12)
