"""
Log-gamma, digamma and trigamma for positive real arguments.

Digamma and trigamma use upward recurrence until x >= 8 followed by the Bernoulli
asymptotic series; log-gamma uses a Lanczos approximation. All three accept scalars or
numpy arrays and return a float for scalar input.
"""
import math

import numpy as np

from kondometry.exceptions import SpecialFunctionDomainError

__all__ = [
    "DIGAMMA_SERIES",
    "LN_GAMMA_SERIES",
    "TRIGAMMA_SERIES",
    "digamma",
    "even_series",
    "ln_gamma",
    "trigamma",
]

_RECURRENCE_THRESHOLD = 8.0

_LANCZOS_G = 7.0
_LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)

# Bernoulli coefficients of the asymptotic expansions: B_2n / 2n for digamma, B_2n for
# trigamma and B_2n / (2n (2n - 1)) for log-gamma
DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
)
TRIGAMMA_SERIES = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
)
LN_GAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
)


def _as_domain(x) -> np.ndarray:
    arr = np.atleast_1d(np.array(x, dtype=float))
    if not np.all(arr > 0.0):
        raise SpecialFunctionDomainError(
            f"Special functions are only defined here for x > 0, got {x!r}."
        )
    return arr


def _output(result: np.ndarray, like):
    return float(result[0]) if np.ndim(like) == 0 else result.reshape(np.shape(like))


def even_series(inv2: np.ndarray, coefficients) -> np.ndarray:
    """sum_i coefficients[i] * inv2 ** (i + 1), by Horner's rule."""
    acc = np.zeros_like(inv2)
    for coefficient in reversed(coefficients):
        acc = (acc + coefficient) * inv2
    return acc


def _lanczos(x: np.ndarray) -> np.ndarray:
    z = x - 1.0
    a = np.full_like(z, _LANCZOS_COEFFICIENTS[0])
    for i, coefficient in enumerate(_LANCZOS_COEFFICIENTS[1:], start=1):
        a += coefficient / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_TWO_PI + (z + 0.5) * np.log(t) - t + np.log(a)


def ln_gamma(x):
    arr = _as_domain(x)
    small = arr < 0.5
    # ln Gamma(x) = ln Gamma(x + 1) - ln x keeps the Lanczos sum away from its poles
    shifted = np.where(small, arr + 1.0, arr)
    result = _lanczos(shifted) - np.where(small, np.log(arr), 0.0)
    return _output(result, x)


def digamma(x):
    arr = _as_domain(x).copy()
    acc = np.zeros_like(arr)

    small = arr < _RECURRENCE_THRESHOLD
    while np.any(small):
        acc[small] -= 1.0 / arr[small]
        arr[small] += 1.0
        small = arr < _RECURRENCE_THRESHOLD

    series = even_series(1.0 / arr**2, DIGAMMA_SERIES)
    result = acc + np.log(arr) - 0.5 / arr - series
    return _output(result, x)


def trigamma(x):
    arr = _as_domain(x).copy()
    acc = np.zeros_like(arr)

    small = arr < _RECURRENCE_THRESHOLD
    while np.any(small):
        acc[small] += 1.0 / arr[small] ** 2
        arr[small] += 1.0
        small = arr < _RECURRENCE_THRESHOLD

    inv = 1.0 / arr
    series = inv + 0.5 * inv**2 + inv * even_series(inv**2, TRIGAMMA_SERIES)
    return _output(acc + series, x)
