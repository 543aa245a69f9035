"""
Closed-form probe for the decoupled (large-K) limit.

The two impurity spins form an isolated dimer with energies E_S = -3K/4 and
E_T,m = K/4 + m B. Everything here is analytic; the QFIM pipeline in
``kondometry.estimation`` is only used where no closed form is printed.
"""
import math
from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from kondometry.estimation import (
    ParamVector,
    PopulationJacobian,
    QfiMatrix,
    QsnrReport,
    build_qfim,
    qsnr_report,
)
from kondometry.exceptions import InvalidInputError
from kondometry.models.base import BaseBackend, GridPoint, SweepRow, assemble_row
from kondometry.probe import (
    OBSERVABLE_SPECTRA,
    ProbeObservables,
    ProbeState,
    observable_snr,
    observables_of,
)

__all__ = [
    "LargeKBackend",
    "LargeKParams",
    "Maximum",
    "energies",
    "maximize_over_temperature",
    "maximize_qsnr_sp",
    "multiparameter_report",
    "observables",
    "populations",
    "population_jacobian",
    "qfi_coupling",
    "qfi_thermometry",
    "qsnr_mp_closed_form",
    "qsnr_mp_universal",
    "qsnr_sp_field",
    "qsnr_sp_universal",
    "scaled_qfim",
    "suboptimal_thermometry",
]

# dE/dK and dE/dB over (S, T+1, T0, T-1)
_COUPLING_WEIGHTS = np.array([-0.75, 0.25, 0.25, 0.25])
_FIELD_WEIGHTS = np.array(OBSERVABLE_SPECTRA["M"])

_SCAN_STEP = 0.01
_SCAN_LIMIT = 20.0
_GOLDEN_TOL = 1e-8


@dataclass(frozen=True)
class LargeKParams:
    temperature: float
    coupling: float
    field: float = 0.0

    def __post_init__(self):
        values = (self.temperature, self.coupling, self.field)
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError(f"Large-K parameters must be finite, got {values}.")
        if self.temperature <= 0.0:
            raise InvalidInputError("Temperature must be strictly positive.")
        if self.field < 0.0:
            raise InvalidInputError("The control field must be non-negative.")

    def values_of(self, names: Sequence[str]) -> ParamVector:
        lookup = {"T": self.temperature, "K": self.coupling, "B": self.field}
        return ParamVector(tuple(names), tuple(lookup[n] for n in names))


class Maximum(NamedTuple):
    location: float
    value: float


def energies(p: LargeKParams) -> np.ndarray:
    return p.coupling * _COUPLING_WEIGHTS + p.field * _FIELD_WEIGHTS


def _boltzmann(p: LargeKParams) -> np.ndarray:
    e = energies(p)
    weights = np.exp(-(e - e.min()) / p.temperature)
    return weights / weights.sum()


def populations(p: LargeKParams) -> ProbeState:
    return ProbeState.from_array(_boltzmann(p))


def observables(p: LargeKParams) -> ProbeObservables:
    return observables_of(populations(p))


def population_jacobian(
    p: LargeKParams, unknowns: Sequence[str] = ("T", "K")
) -> PopulationJacobian:
    """Analytic Boltzmann derivatives d rho_k / d lambda = rho_k (g_k - <g>)."""
    rho = _boltzmann(p)
    t = p.temperature
    e = energies(p)

    # g = -d(E_k / T) / d lambda; shifting E leaves rho_k (g_k - <g>) unchanged
    generators: Dict[str, np.ndarray] = {
        "T": (e - e.min()) / t**2,
        "K": -_COUPLING_WEIGHTS / t,
        "B": -_FIELD_WEIGHTS / t,
    }

    unknown = [n for n in unknowns if n not in generators]
    if unknown:
        raise InvalidInputError(f"Unknown large-K parameter(s): {', '.join(unknown)}.")

    rows = [rho * (generators[n] - rho @ generators[n]) for n in unknowns]
    return PopulationJacobian(tuple(unknowns), rho, np.array(rows))


def _weight(y):
    """3 e^y / (3 + e^y)^2 without overflow."""
    y = np.asarray(y, dtype=float)
    u = np.exp(-np.abs(y))
    return np.where(y >= 0.0, 3.0 * u / (1.0 + 3.0 * u) ** 2, 3.0 * u / (3.0 + u) ** 2)


def qfi_thermometry(temperature, coupling):
    t = np.asarray(temperature, dtype=float)
    k = np.asarray(coupling, dtype=float)
    result = k**2 / t**4 * _weight(k / t)
    return float(result) if result.ndim == 0 else result


def qfi_coupling(temperature, coupling):
    t = np.asarray(temperature, dtype=float)
    k = np.asarray(coupling, dtype=float)
    result = _weight(k / t) / t**2
    return float(result) if result.ndim == 0 else result


def qsnr_sp_universal(y):
    """Zero-field single-parameter QSNR as a function of y = K/T, identical for T and K."""
    y = np.asarray(y, dtype=float)
    result = y**2 * _weight(y)
    return float(result) if result.ndim == 0 else result


def _golden_maximum(
    fn: Callable[[float], float], grid: np.ndarray, lower: float, upper: float
) -> Maximum:
    values = np.array([fn(x) for x in grid])
    i = int(np.argmax(values))

    if i == 0 or i == len(grid) - 1:
        # maximum at the edge of the scan window, nothing to refine
        return Maximum(float(grid[i]), float(values[i]))

    res = minimize_scalar(
        lambda x: -fn(x),
        bracket=(grid[i - 1], grid[i], grid[i + 1]),
        method="golden",
        tol=_GOLDEN_TOL,
    )
    x = float(np.clip(res.x, lower, upper))
    return Maximum(x, float(fn(x)))


def maximize_qsnr_sp(sign: int = 1) -> Maximum:
    """Maximum of the zero-field QSNR over y = K/T > 0 (sign=1) or y < 0 (sign=-1)."""
    if sign not in (1, -1):
        raise InvalidInputError(f"Sign must be 1 or -1, got {sign!r}.")

    grid = sign * np.arange(_SCAN_STEP, _SCAN_LIMIT + _SCAN_STEP / 2, _SCAN_STEP)
    lower, upper = sorted((sign * _SCAN_STEP, sign * _SCAN_LIMIT))
    return _golden_maximum(qsnr_sp_universal, grid, lower, upper)


def qsnr_mp_closed_form(t, k):
    """
    Universal multiparameter QSNR for temperature at t = T/B, k = K/B:

        2 e^{2/t} (2 + cosh(1/t))
        -------------------------------------------------------------------
        (1 + e^{1/t} + e^{2/t}) (1 + e^{1/t} (1 + e^{1/t} + e^{k/t})) t^2
    """
    t = np.asarray(t, dtype=float)
    k = np.asarray(k, dtype=float)
    x = 1.0 / t

    # numerator and both factors are scaled by their largest exponential
    top = np.maximum(2.0 * x, (1.0 + k) * x)
    numerator = 4.0 * np.exp(-x) + 1.0 + np.exp(-2.0 * x)
    first = np.exp(-2.0 * x) + np.exp(-x) + 1.0
    second = (
        np.exp(-top) + np.exp(x - top) + np.exp(2.0 * x - top) + np.exp((1.0 + k) * x - top)
    )
    result = numerator * np.exp(x - top) / (first * second * t**2)
    return float(result) if result.ndim == 0 else result


def _field_params(t: float, k: float) -> LargeKParams:
    return LargeKParams(temperature=t, coupling=k, field=1.0)


def scaled_qfim(t: float, k: float) -> QfiMatrix:
    """B^2 H over (T, K) as a function of t = T/B and k = K/B only."""
    return build_qfim(population_jacobian(_field_params(t, k), ("T", "K")))


def multiparameter_report(
    p: LargeKParams, unknowns: Sequence[str] = ("T", "K")
) -> QsnrReport:
    h = build_qfim(population_jacobian(p, unknowns))
    return qsnr_report(p.values_of(unknowns), h)


def qsnr_mp_universal(t: float, k: float):
    """(Q_MP(T,T), Q_MP(K,K)); the first from the closed form, the second from the QFIM."""
    report = multiparameter_report(_field_params(t, k))
    return qsnr_mp_closed_form(t, k), report.multi("K")


def qsnr_sp_field(t: float, k: float):
    report = multiparameter_report(_field_params(t, k))
    return report.single("T"), report.single("K")


def suboptimal_thermometry(t: float, k: float, observable: str = "C") -> float:
    """SNR for temperature when only one observable (C, M or chi) is measured."""
    p = _field_params(t, k)
    jac = population_jacobian(p, ("T",))
    return observable_snr(populations(p), jac.derivs[0], observable, t)


_TEMPERATURE_CURVES: Dict[str, Callable[[float, float], float]] = {
    "qsnr-t": lambda t, k: qsnr_sp_field(t, k)[0],
    "qsnr-k": lambda t, k: qsnr_sp_field(t, k)[1],
    "mp-t": lambda t, k: qsnr_mp_universal(t, k)[0],
    "snr-c": lambda t, k: suboptimal_thermometry(t, k, "C"),
    "snr-m": lambda t, k: suboptimal_thermometry(t, k, "M"),
}


def maximize_over_temperature(
    k: float, quantity: str = "qsnr-t", t_range: Optional[Sequence[float]] = None
) -> Maximum:
    """Maximum over t = T/B of a universal curve at fixed k = K/B."""
    try:
        curve = _TEMPERATURE_CURVES[quantity]
    except KeyError:
        raise InvalidInputError(
            f"Unknown quantity {quantity!r}; choose from {', '.join(_TEMPERATURE_CURVES)}."
        )

    lo, hi = t_range or (1e-2, 1e2)
    if not 0.0 < lo < hi:
        raise InvalidInputError(f"Invalid temperature range {(lo, hi)}.")

    def on_log_scale(s: float) -> float:
        try:
            return curve(math.exp(s), k)
        except InvalidInputError:
            # frozen-out populations: no observable fluctuations left to read
            return 0.0

    grid = np.linspace(math.log(lo), math.log(hi), 400)
    best = _golden_maximum(on_log_scale, grid, grid[0], grid[-1])
    return Maximum(math.exp(best.location), best.value)


class LargeKBackend(BaseBackend):
    name = "large-k"

    def evaluate(self, point: GridPoint) -> SweepRow:
        p = LargeKParams(point.temperature, point.coupling, self.field)
        return assemble_row(
            point,
            exchange=self.exchange,
            field=self.field,
            obs=observables(p),
            jac=population_jacobian(p, ("T", "K")),
            unknowns=self.unknowns,
        )
