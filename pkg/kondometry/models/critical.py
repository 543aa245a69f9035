"""
Exact universal solution around the two-impurity critical point.

All quantities depend on the detuning dK = K - K_c through the crossover scale
T* = c dK^2 / T_K. The correlator and its derivatives contain ln T, so temperatures must be
given in the band units the constants were extracted in (D = 1).
"""
import math
import warnings
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

from kondometry.config import KondometryConfig
from kondometry.estimation import ParamVector, build_qfim, qsnr_report
from kondometry.exceptions import (
    CriticalValidityWarning,
    InvalidInputError,
    ValidityDomainError,
)
from kondometry.models.base import BaseBackend, GridPoint, SweepRow, assemble_row
from kondometry.probe import correlator_jacobian
from kondometry.special import (
    DIGAMMA_SERIES,
    LN_GAMMA_SERIES,
    digamma,
    even_series,
    ln_gamma,
    trigamma,
)

__all__ = [
    "CriticalBackend",
    "CriticalConstants",
    "AsymptoteFit",
    "correlator",
    "dc_dk",
    "dc_dt",
    "entropy_crossover",
    "entropy_scaling",
    "fit_coupling_asymptote",
    "fit_thermometry_asymptote",
    "in_universal_window",
    "qsnr_critical",
    "qsnr_pipeline",
    "t_star",
]

HALF_LOG_TWO = 0.5 * math.log(2.0)

# fraction of T_K bounding the universal window in T and |dK|
WINDOW = 0.1

_ASYMPTOTIC_THRESHOLD = 8.0


@dataclass(frozen=True)
class CriticalConstants:
    k_c: float = 0.618
    t_k: float = 0.362
    c: float = 0.035
    c_star: float = -0.385

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.k_c, self.t_k, self.c, self.c_star)):
            raise InvalidInputError("Critical constants must be finite.")
        if self.t_k <= 0.0:
            raise InvalidInputError(f"T_K must be positive, got {self.t_k}.")
        if self.c <= 0.0:
            raise InvalidInputError(f"The crossover constant c must be positive, got {self.c}.")
        if not -0.75 < self.c_star < 0.25:
            raise InvalidInputError(f"C* = {self.c_star} lies outside (-3/4, 1/4).")

    @classmethod
    def from_config(cls, cfg: KondometryConfig) -> "CriticalConstants":
        return cls(
            k_c=cfg.get_value("critical.k_c"),
            t_k=cfg.get_value("critical.t_k"),
            c=cfg.get_value("critical.c"),
            c_star=cfg.get_value("critical.c_star"),
        )

    def detuning(self, coupling):
        return np.asarray(coupling, dtype=float) - self.k_c


class AsymptoteFit(NamedTuple):
    amplitude: float
    scale: float


def _output(result, *inputs):
    return float(result) if all(np.ndim(v) == 0 for v in inputs) else result


def in_universal_window(temperature, coupling, consts: CriticalConstants):
    t = np.asarray(temperature, dtype=float)
    dk = consts.detuning(coupling)
    inside = (t <= WINDOW * consts.t_k) & (np.abs(dk) <= WINDOW * consts.t_k)
    return bool(inside) if inside.ndim == 0 else inside


def _check_window(temperature, delta_k, consts: CriticalConstants):
    t = np.asarray(temperature, dtype=float)
    if np.any(t <= 0.0):
        raise InvalidInputError("Temperature must be strictly positive.")

    limit = WINDOW * consts.t_k
    if np.any(t > limit):
        warnings.warn(
            f"T above {WINDOW} T_K is outside the universal critical regime.",
            CriticalValidityWarning,
            stacklevel=3,
        )
    if np.any(np.abs(delta_k) > limit):
        warnings.warn(
            f"|dK| above {WINDOW} T_K is outside the universal critical regime.",
            CriticalValidityWarning,
            stacklevel=3,
        )


def t_star(delta_k, consts: CriticalConstants):
    dk = np.asarray(delta_k, dtype=float)
    return _output(consts.c * dk**2 / consts.t_k, delta_k)


def _bernoulli_sums(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """sum_n B_2n / (2n a^2n) and sum_n B_2n / (2n (2n - 1) a^(2n - 1))."""
    inv2 = 1.0 / a**2
    digamma_tail = even_series(inv2, DIGAMMA_SERIES)
    # one power of 1/a less than the even series
    gamma_tail = a * even_series(inv2, LN_GAMMA_SERIES)
    return digamma_tail, gamma_tail


def entropy_scaling(t):
    """
    Universal entropy crossover function

        S(t) = (1/t) [psi(1/2 + 1/t) - 1] - ln[Gamma(1/2 + 1/t) / sqrt(pi)],

    rising from -ln(2)/2 at t -> 0 to 0 at t -> infinity.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0.0):
        raise InvalidInputError("The scaling variable T/T* must be positive.")

    with np.errstate(divide="ignore", over="ignore"):
        x = np.where(np.isinf(t_arr), 0.0, 1.0 / t_arr)
    a = 0.5 + x
    result = np.zeros_like(a)

    # for large a the leading terms cancel analytically; sum the remainder directly
    large = a >= _ASYMPTOTIC_THRESHOLD
    if np.any(large):
        al, xl = a[large], x[large]
        digamma_tail, gamma_tail = _bernoulli_sums(al)
        result[large] = -HALF_LOG_TWO + 0.25 / al - xl * digamma_tail - gamma_tail

    moderate = ~large & (x > 0.0)
    if np.any(moderate):
        am, xm = a[moderate], x[moderate]
        result[moderate] = (
            xm * (digamma(am) - 1.0) - ln_gamma(am) + 0.5 * math.log(math.pi)
        )

    return float(result[0]) if np.ndim(t) == 0 else result.reshape(np.shape(t))


def entropy_crossover(temperature, delta_k, consts: CriticalConstants):
    _check_window(temperature, delta_k, consts)
    ts = np.asarray(t_star(delta_k, consts), dtype=float)
    t = np.asarray(temperature, dtype=float)

    with np.errstate(divide="ignore"):
        scaled = np.where(ts > 0.0, t / np.where(ts > 0.0, ts, 1.0), np.inf)
    return _output(HALF_LOG_TWO + entropy_scaling(scaled), temperature, delta_k)


def _phi(t: np.ndarray, dk: np.ndarray, consts: CriticalConstants) -> np.ndarray:
    return 0.5 + consts.c * dk**2 / (consts.t_k * t)


def _prepare(temperature, coupling, consts: CriticalConstants):
    dk = consts.detuning(coupling)
    _check_window(temperature, dk, consts)
    t = np.asarray(temperature, dtype=float)
    return t, dk, _phi(t, dk, consts)


def dc_dt(temperature, coupling, consts: CriticalConstants):
    t, dk, phi = _prepare(temperature, coupling, consts)
    c, tk = consts.c, consts.t_k
    result = 2.0 * c * dk * (t * tk - c * dk**2 * trigamma(phi)) / (t**2 * tk**2)
    return _output(result, temperature, coupling)


def correlator(temperature, coupling, consts: CriticalConstants):
    t, dk, phi = _prepare(temperature, coupling, consts)
    result = 2.0 * consts.c * dk * (np.log(t) + digamma(phi)) / consts.t_k + consts.c_star
    return _output(result, temperature, coupling)


def dc_dk(temperature, coupling, consts: CriticalConstants):
    t, dk, phi = _prepare(temperature, coupling, consts)
    c, tk = consts.c, consts.t_k
    result = (
        2.0
        * c
        * (t * tk * (np.log(t) + digamma(phi)) + 2.0 * c * dk**2 * trigamma(phi))
        / (t * tk**2)
    )
    return _output(result, temperature, coupling)


def _denominator(c_value: np.ndarray) -> np.ndarray:
    if np.any((c_value <= -0.75) | (c_value >= 0.25)):
        raise ValidityDomainError(
            "The correlator left (-3/4, 1/4); the point is outside the universal regime."
        )
    return (0.25 - c_value) * (0.75 + c_value)


def qsnr_critical(temperature, coupling, consts: CriticalConstants, exact_denominator=True):
    """
    Single-parameter QSNRs (Q_SP(T), Q_SP(K)) in closed form. With
    ``exact_denominator=False`` the correlator in the denominator is replaced by C*.
    """
    t, dk, phi = _prepare(temperature, coupling, consts)
    k = np.asarray(coupling, dtype=float)
    c, tk = consts.c, consts.t_k
    psi, psi1 = digamma(phi), trigamma(phi)

    if exact_denominator:
        c_value = 2.0 * c * dk * (np.log(t) + psi) / tk + consts.c_star
    else:
        c_value = np.full_like(t * dk, consts.c_star)
    denominator = _denominator(c_value)

    scale = t**2 * tk**4 * denominator
    q_t = 4.0 * c**2 * dk**2 * (t * tk - c * dk**2 * psi1) ** 2 / scale
    q_k = (
        4.0 * c**2 * k**2 * (t * tk * (np.log(t) + psi) + 2.0 * c * dk**2 * psi1) ** 2 / scale
    )
    return _output(q_t, temperature, coupling), _output(q_k, temperature, coupling)


def _jacobian(temperature: float, coupling: float, consts: CriticalConstants):
    return correlator_jacobian(
        correlator(temperature, coupling, consts),
        {
            "T": dc_dt(temperature, coupling, consts),
            "K": dc_dk(temperature, coupling, consts),
        },
    )


def qsnr_pipeline(temperature: float, coupling: float, consts: CriticalConstants):
    """(Q_SP(T), Q_SP(K)) assembled through the generic probe and QFIM machinery."""
    _, jac = _jacobian(temperature, coupling, consts)
    report = qsnr_report(ParamVector(("T", "K"), (temperature, coupling)), build_qfim(jac))
    return report.single("T"), report.single("K")


def _grid(
    temperatures: Sequence[float], detunings: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray]:
    t, dk = np.meshgrid(
        np.asarray(temperatures, dtype=float), np.asarray(detunings, dtype=float)
    )
    return t.ravel(), dk.ravel()


def fit_thermometry_asymptote(
    consts: CriticalConstants, temperatures: Sequence[float], detunings: Sequence[float]
) -> AsymptoteFit:
    """
    Least-squares fit of Q_SP(T) to A T^4 dK^2 / (a dK^8 + T^4), carried out on
    logarithms so every decade of the grid carries equal weight. Returns (A, a).
    """
    t, dk = _grid(temperatures, detunings)
    if np.any(dk == 0.0):
        raise InvalidInputError("Thermometry fits need non-zero detunings.")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CriticalValidityWarning)
        q_t, _ = qsnr_critical(t, consts.k_c + dk, consts)

    def model(x, log_amplitude, log_scale):
        log_t4, log_dk = 4.0 * np.log(x[0]), np.log(np.abs(x[1]))
        return (
            log_amplitude
            + log_t4
            + 2.0 * log_dk
            - np.logaddexp(log_scale + 8.0 * log_dk, log_t4)
        )

    p0 = (
        math.log(4.0 * consts.c**2 / (consts.t_k**2 * _denominator(np.array(consts.c_star)))),
        math.log(144.0 * consts.c**4 / consts.t_k**4),
    )
    (log_amplitude, log_scale), _ = curve_fit(model, np.vstack([t, dk]), np.log(q_t), p0=p0)
    return AsymptoteFit(math.exp(log_amplitude), math.exp(log_scale))


def fit_coupling_asymptote(
    consts: CriticalConstants, temperatures: Sequence[float], detunings: Sequence[float]
) -> AsymptoteFit:
    """Relative least-squares fit of Q_SP(K) to A log^2(b T + dK^2). Returns (A, b)."""
    t, dk = _grid(temperatures, detunings)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CriticalValidityWarning)
        _, q_k = qsnr_critical(t, consts.k_c + dk, consts)

    def model(x, amplitude, log_scale):
        return amplitude * np.log(np.exp(log_scale) * x[0] + x[1] ** 2) ** 2

    p0 = (
        4.0 * consts.c**2 * consts.k_c**2 / (consts.t_k**2 * _denominator(np.array(consts.c_star))),
        float(digamma(0.5)),
    )
    (amplitude, log_scale), _ = curve_fit(model, np.vstack([t, dk]), q_k, p0=p0, sigma=q_k)
    return AsymptoteFit(float(amplitude), math.exp(log_scale))


class CriticalBackend(BaseBackend):
    name = "critical"

    def __init__(self, cfg: Optional[KondometryConfig] = None, consts=None):
        super().__init__(cfg)
        self.consts: CriticalConstants = consts or CriticalConstants.from_config(self.cfg)

        if self.field != 0.0:
            raise InvalidInputError("The critical backend is restricted to zero field.")

    def validate(self, points: Sequence[GridPoint]) -> List[str]:
        tk = self.consts.t_k
        return [
            f"T={p.temperature:g}, K={p.coupling:g}"
            for p in points
            if p.temperature > tk or abs(p.coupling - self.consts.k_c) > tk
        ]

    def evaluate(self, point: GridPoint) -> SweepRow:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CriticalValidityWarning)
            obs, jac = _jacobian(point.temperature, point.coupling, self.consts)

        return assemble_row(
            point,
            exchange=self.exchange,
            field=0.0,
            obs=obs,
            jac=jac,
            unknowns=self.unknowns,
        )
