"""
Two-impurity probe reduced density matrix.

The probe state is diagonal in the basis (S, T+1, T0, T-1): the spin singlet followed by
the triplet components ordered by their magnetic quantum number. All conversions between
populations and the observables (C, M, chi) use this ordering.
"""
import math
from dataclasses import astuple, dataclass
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from kondometry.estimation import (
    EPS_POP,
    PopulationJacobian,
    QfiMatrix,
    classical_fisher,
)
from kondometry.exceptions import (
    AnsatzDomainError,
    InconsistentObservablesError,
    InvalidInputError,
)

__all__ = [
    "BASIS",
    "OBSERVABLE_SPECTRA",
    "ProbeObservables",
    "ProbeState",
    "chi_ansatz",
    "correlator_jacobian",
    "correlator_qfi",
    "observable_snr",
    "observables_of",
    "population_jacobian",
    "qfim_from_observables",
    "rdm_with_field",
    "rdm_zero_field",
]

BASIS = ("S", "T+1", "T0", "T-1")

# eigenvalues of S_L.S_R, S^z_tot and (S^z_tot)^2 in the probe basis
OBSERVABLE_SPECTRA: Dict[str, Tuple[float, ...]] = {
    "C": (-0.75, 0.25, 0.25, 0.25),
    "M": (0.0, 1.0, 0.0, -1.0),
    "chi": (0.0, 1.0, 0.0, 1.0),
}

_SLACK = 1e-12

# d rho / dC at zero field
_ZERO_FIELD_SLOPE = np.array([-1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])


@dataclass(frozen=True)
class ProbeState:
    rho_s: float
    rho_tp: float
    rho_t0: float
    rho_tm: float

    def __post_init__(self):
        values = astuple(self)
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError(f"Probe populations must be finite, got {values}.")
        if any(v < -_SLACK or v > 1.0 + _SLACK for v in values):
            raise InvalidInputError(f"Probe populations must lie in [0, 1], got {values}.")
        if abs(sum(values) - 1.0) > _SLACK:
            raise InvalidInputError(f"Probe populations sum to {sum(values)!r}, expected 1.")

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ProbeState":
        rho_s, rho_tp, rho_t0, rho_tm = (float(v) for v in values)
        return cls(rho_s, rho_tp, rho_t0, rho_tm)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))

    @property
    def rho_t(self) -> float:
        """Mean triplet population."""
        return (self.rho_tp + self.rho_t0 + self.rho_tm) / 3.0


@dataclass(frozen=True)
class ProbeObservables:
    c: float
    m: float
    chi: float

    def __post_init__(self):
        c, m, chi = self.c, self.m, self.chi
        if not all(math.isfinite(v) for v in (c, m, chi)):
            raise InvalidInputError(f"Observables must be finite, got {(c, m, chi)}.")

        violations = []
        if not -0.75 - _SLACK <= c <= 0.25 + _SLACK:
            violations.append("C outside [-3/4, 1/4]")
        if abs(m) > 1.0 + _SLACK:
            violations.append("|M| > 1")
        if not -_SLACK <= chi <= 1.0 + _SLACK:
            violations.append("chi outside [0, 1]")
        if chi < abs(m) - _SLACK:
            violations.append("chi < |M|")
        if 0.75 + c - chi < -_SLACK:
            violations.append("3/4 + C - chi < 0")

        if violations:
            raise InconsistentObservablesError(
                f"Observables (C, M, chi) = {(c, m, chi)} violate: {'; '.join(violations)}."
            )


def rdm_zero_field(c: float) -> ProbeState:
    if not -0.75 - _SLACK <= c <= 0.25 + _SLACK:
        raise InvalidInputError(f"Correlator {c!r} outside [-3/4, 1/4].")

    rho_t = 0.25 + c / 3.0
    return ProbeState(0.25 - c, rho_t, rho_t, rho_t)


def rdm_with_field(obs: ProbeObservables) -> ProbeState:
    c, m, chi = obs.c, obs.m, obs.chi
    populations = (0.25 - c, 0.5 * (chi + m), 0.75 + c - chi, 0.5 * (chi - m))

    if min(populations) < -_SLACK:
        raise InconsistentObservablesError(
            f"Observables {(c, m, chi)} imply negative populations {populations}."
        )

    return ProbeState(*populations)


def observables_of(state: ProbeState) -> ProbeObservables:
    triplet = state.rho_tp + state.rho_t0 + state.rho_tm
    return ProbeObservables(
        c=-0.75 * state.rho_s + 0.25 * triplet,
        m=state.rho_tp - state.rho_tm,
        chi=state.rho_tp + state.rho_tm,
    )


def chi_ansatz(c: float, m: float) -> float:
    """
    Squared magnetization from C and M, assuming geometric triplet weights
    rho_T+1 / rho_T0 = rho_T0 / rho_T-1. Exact for Boltzmann-distributed triplets, so
    exact in the large-K limit and at small fields.
    """
    radicand = (0.5 + 2.0 * c / 3.0) ** 2 - m**2 / 3.0
    if radicand < 0.0:
        raise AnsatzDomainError(f"No real ansatz value for (C, M) = {(c, m)}.")
    return 1.0 + 4.0 * c / 3.0 - math.sqrt(radicand)


def _population_rows(jac: np.ndarray) -> np.ndarray:
    dc, dm, dchi = jac[:, 0], jac[:, 1], jac[:, 2]
    return np.stack([-dc, 0.5 * (dchi + dm), dc - dchi, 0.5 * (dchi - dm)], axis=1)


def population_jacobian(
    obs: ProbeObservables, jac: Sequence[Sequence[float]], names: Sequence[str]
) -> PopulationJacobian:
    """Population derivatives implied by derivatives of (C, M, chi) via the chain rule."""
    jac = np.asarray(jac, dtype=float).reshape(len(names), 3)
    state = rdm_with_field(obs)
    return PopulationJacobian(tuple(names), state.as_array(), _population_rows(jac))


def qfim_from_observables(
    obs: ProbeObservables, jac: Sequence[Sequence[float]], names: Sequence[str]
) -> QfiMatrix:
    """QFIM written directly in the observables (C, M, chi) and their derivatives."""
    names = tuple(names)
    jac = np.asarray(jac, dtype=float).reshape(len(names), 3)
    c, m, chi = obs.c, obs.m, obs.chi
    dc, dm, dchi = jac[:, 0], jac[:, 1], jac[:, 2]

    # (numerator vectors, denominator, population the denominator belongs to)
    terms = (
        (dchi + dm, 2.0 * (chi + m), 0.5 * (chi + m)),
        (dchi - dm, 2.0 * (chi - m), 0.5 * (chi - m)),
        (dc - dchi, 0.75 + c - chi, 0.75 + c - chi),
        (dc, 0.25 - c, 0.25 - c),
    )

    h = np.zeros((len(names), len(names)))
    divergent = set()

    for numerator, denominator, population in terms:
        if population < EPS_POP:
            # a vanishing population only contributes through the 0 * 0/0 limit
            divergent.update(n for n, u in zip(names, numerator) if abs(u) >= EPS_POP)
            continue
        h += np.outer(numerator, numerator) / denominator

    for name in divergent:
        i = names.index(name)
        h[i, i] = math.inf

    return QfiMatrix(names, h, tuple(n for n in names if n in divergent))


def correlator_qfi(c: float, dc: float) -> float:
    """Zero-field QFI (dC)^2 / ((1/4 - C)(3/4 + C)) of a probe fixed by C alone."""
    denominator = (0.25 - c) * (0.75 + c)
    if denominator <= 0.0:
        return 0.0 if abs(dc) < EPS_POP else math.inf
    return dc**2 / denominator


def observable_snr(
    state: ProbeState, derivs: Sequence[float], observable: str, value: float
) -> float:
    """Suboptimal SNR lambda^2 F_O for measuring only one of C, M or chi."""
    if observable not in OBSERVABLE_SPECTRA:
        raise InvalidInputError(
            f"Unknown observable {observable!r}; choose from {', '.join(OBSERVABLE_SPECTRA)}."
        )
    fisher = classical_fisher(state.as_array(), derivs, OBSERVABLE_SPECTRA[observable])
    return value**2 * fisher


def correlator_jacobian(
    c: float, dc: Mapping[str, float]
) -> Tuple[ProbeObservables, PopulationJacobian]:
    """Zero-field observables and population jacobian of a probe fixed by C alone."""
    state = rdm_zero_field(c)
    rows = np.array([_ZERO_FIELD_SLOPE * dc[name] for name in dc])
    obs = ProbeObservables(c=c, m=0.0, chi=2.0 * state.rho_t)
    return obs, PopulationJacobian(tuple(dc), state.as_array(), rows.reshape(len(dc), 4))
