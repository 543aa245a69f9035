"""
Narrow band limit: two impurity spins, each exchange-coupled to a single bath orbital.

The 64-dimensional product basis is ordered imp-L (2) x imp-R (2) x orb-L (4) x orb-R (4).
Impurities use (up, down); each orbital uses (empty, up, down, double). Every term of the
Hamiltonian is an on-site fermion bilinear, so no Jordan-Wigner strings appear and the
representation stays real.
"""
import dataclasses
import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from kondometry.estimation import (
    ParamVector,
    PopulationJacobian,
    QfiMatrix,
    QsnrReport,
    build_qfim,
    qsnr_report,
)
from kondometry.exceptions import DerivativeError, InvalidInputError, SymmetryViolationError
from kondometry.models.base import BaseBackend, GridPoint, SweepRow, assemble_row
from kondometry.probe import ProbeObservables, ProbeState, observables_of

__all__ = [
    "DenseHermitian",
    "NarrowBandBackend",
    "NblParams",
    "ThermalSolution",
    "build_hamiltonian",
    "finite_difference",
    "nbl_metrology",
    "observables",
    "population_jacobian",
    "solve",
    "thermal_solution",
]

IMPURITY_STATES = ("up", "dn")
ORBITAL_STATES = ("0", "up", "dn", "updn")
DIMENSIONS = (2, 2, 4, 4)

_HERMITICITY_TOL = 1e-13
_OFF_DIAGONAL_TOL = 1e-10
_RELATIVE_STEP = 1e-5
_STEP_FLOOR = 1e-7

# rows: singlet, T+1, T0, T-1 over (up up, up dn, dn up, dn dn)
_PROBE_ROTATION = np.array(
    [
        [0.0, 1.0, -1.0, 0.0],
        [math.sqrt(2.0), 0.0, 0.0, 0.0],
        [0.0, 1.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, math.sqrt(2.0)],
    ]
) / math.sqrt(2.0)

_PARAMETER_FIELDS = {"T": "temperature", "K": "coupling", "J": "exchange", "B": "field"}


@dataclass(frozen=True)
class NblParams:
    temperature: float
    coupling: float
    exchange: float = 1.0
    field: float = 0.0

    def __post_init__(self):
        values = dataclasses.astuple(self)
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError(f"Narrow band parameters must be finite, got {values}.")
        if self.temperature <= 0.0:
            raise InvalidInputError("Temperature must be strictly positive.")

    def value(self, name: str) -> float:
        return getattr(self, _PARAMETER_FIELDS[name])

    def shifted(self, name: str, step: float) -> "NblParams":
        field = _PARAMETER_FIELDS[name]
        return dataclasses.replace(self, **{field: getattr(self, field) + step})


@dataclass(frozen=True, eq=False)
class DenseHermitian:
    matrix: np.ndarray
    labels: Tuple[Tuple[str, str, str, str], ...]

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(self.labels):
            raise InvalidInputError(f"Matrix shape {m.shape} does not match the basis labels.")
        if np.max(np.abs(m - m.T), initial=0.0) > _HERMITICITY_TOL:
            raise SymmetryViolationError("Hamiltonian is not Hermitian.")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class ThermalSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    log_partition: float
    free_energy: float
    energy: float
    entropy: float
    probe: ProbeState
    temperature: float

    @property
    def partition_function(self) -> float:
        return math.exp(self.log_partition)

    def expectation(self, operator: np.ndarray) -> float:
        weights = np.exp(-(self.eigenvalues - self.eigenvalues[0]) / self.temperature)
        weights /= weights.sum()
        diagonal = np.einsum("ij,ik,kj->j", self.eigenvectors, operator, self.eigenvectors)
        return float(weights @ diagonal)


def _spin_operators(dimension: int) -> Dict[str, np.ndarray]:
    if dimension == 2:
        sz = np.diag([0.5, -0.5])
        sp = np.zeros((2, 2))
        sp[0, 1] = 1.0
    else:
        # s = c^dag sigma c / 2 on (empty, up, down, double)
        sz = np.diag([0.0, 0.5, -0.5, 0.0])
        sp = np.zeros((4, 4))
        sp[1, 2] = 1.0
    return {"z": sz, "+": sp, "-": sp.T.copy()}


def _embed(op: np.ndarray, slot: int) -> np.ndarray:
    factors = [np.eye(d) for d in DIMENSIONS]
    factors[slot] = op
    return functools.reduce(np.kron, factors)


def _dot(a: int, b: int) -> np.ndarray:
    sa = _spin_operators(DIMENSIONS[a])
    sb = _spin_operators(DIMENSIONS[b])
    return (
        _embed(sa["z"], a) @ _embed(sb["z"], b)
        + 0.5 * (_embed(sa["+"], a) @ _embed(sb["-"], b))
        + 0.5 * (_embed(sa["-"], a) @ _embed(sb["+"], b))
    )


@functools.lru_cache(maxsize=None)
def _operators() -> Dict[str, np.ndarray]:
    total_sz = sum(_embed(_spin_operators(d)["z"], slot) for slot, d in enumerate(DIMENSIONS))
    ops = {
        "impurity": _dot(0, 1),
        "kondo": _dot(0, 2) + _dot(1, 3),
        "sz": total_sz,
    }
    for op in ops.values():
        op.setflags(write=False)
    return ops


def _labels() -> Tuple[Tuple[str, str, str, str], ...]:
    return tuple(
        itertools.product(IMPURITY_STATES, IMPURITY_STATES, ORBITAL_STATES, ORBITAL_STATES)
    )


def spin_correlator_operator() -> np.ndarray:
    return _operators()["impurity"]


def total_sz_operator() -> np.ndarray:
    return _operators()["sz"]


def build_hamiltonian(coupling: float, exchange: float, field: float = 0.0) -> DenseHermitian:
    ops = _operators()
    matrix = coupling * ops["impurity"] + exchange * ops["kondo"] + field * ops["sz"]
    return DenseHermitian(matrix, _labels())


def _probe_rdm(rho: np.ndarray) -> np.ndarray:
    # trace out the 16 bath configurations, then rotate to (S, T+1, T0, T-1)
    rho_imp = np.einsum("ajbj->ab", rho.reshape(4, 16, 4, 16))
    return _PROBE_ROTATION @ rho_imp @ _PROBE_ROTATION.T


def thermal_solution(h: DenseHermitian, temperature: float) -> ThermalSolution:
    if not temperature > 0.0:
        raise InvalidInputError("Temperature must be strictly positive.")

    eigenvalues, eigenvectors = scipy.linalg.eigh(h.matrix)
    ground = eigenvalues[0]
    weights = np.exp(-(eigenvalues - ground) / temperature)
    z_shifted = weights.sum()
    p = weights / z_shifted

    log_partition = math.log(z_shifted) - ground / temperature
    free_energy = -temperature * log_partition
    energy = float(p @ eigenvalues)
    entropy = (energy - free_energy) / temperature

    rho = (eigenvectors * p) @ eigenvectors.T
    probe = _probe_rdm(rho)

    off_diagonal = probe - np.diag(np.diag(probe))
    worst = float(np.max(np.abs(off_diagonal)))
    if worst >= _OFF_DIAGONAL_TOL:
        raise SymmetryViolationError(
            f"Probe density matrix has off-diagonal weight {worst:.3g} in the singlet/triplet "
            f"basis."
        )

    return ThermalSolution(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        log_partition=log_partition,
        free_energy=free_energy,
        energy=energy,
        entropy=entropy,
        probe=ProbeState.from_array(np.diag(probe)),
        temperature=temperature,
    )


def solve(params: NblParams) -> ThermalSolution:
    h = build_hamiltonian(params.coupling, params.exchange, params.field)
    return thermal_solution(h, params.temperature)


def observables(params: NblParams) -> ProbeObservables:
    return observables_of(solve(params).probe)


def finite_step(value: float) -> float:
    return max(_RELATIVE_STEP * abs(value), _STEP_FLOOR)


def finite_difference(
    fn: Callable[[NblParams], np.ndarray],
    params: NblParams,
    name: str,
    step: Optional[float] = None,
) -> np.ndarray:
    """Central difference of ``fn`` with respect to one of T, K, J or B."""
    if name not in _PARAMETER_FIELDS:
        raise InvalidInputError(f"Unknown narrow band parameter {name!r}.")

    h = step if step is not None else finite_step(params.value(name))
    if not h > 0.0 or params.value(name) + h == params.value(name):
        raise DerivativeError(f"Finite-difference step {h!r} underflows for {name}.")
    if name == "T" and params.temperature - h <= 0.0:
        raise DerivativeError(
            f"Temperature {params.temperature!r} is too small for a central difference."
        )

    upper = np.asarray(fn(params.shifted(name, h)), dtype=float)
    lower = np.asarray(fn(params.shifted(name, -h)), dtype=float)
    derivative = (upper - lower) / (2.0 * h)

    if not np.all(np.isfinite(derivative)):
        raise DerivativeError(f"Non-finite derivative with respect to {name}.")
    return derivative


def _populations(params: NblParams) -> np.ndarray:
    return solve(params).probe.as_array()


def population_jacobian(
    params: NblParams, names: Sequence[str] = ("T", "K"), step: Optional[float] = None
) -> PopulationJacobian:
    rows = np.array([finite_difference(_populations, params, name, step) for name in names])
    # normalization rounding, amplified by 1/2h, must not leak into the row sums
    rows -= rows.mean(axis=1, keepdims=True)
    return PopulationJacobian(tuple(names), _populations(params), rows)


def nbl_metrology(
    params: NblParams, unknowns: Sequence[str] = ("T", "K")
) -> Tuple[QfiMatrix, QsnrReport]:
    h = build_qfim(population_jacobian(params, unknowns))
    values = ParamVector(tuple(unknowns), tuple(params.value(n) for n in unknowns))
    return h, qsnr_report(values, h)


class NarrowBandBackend(BaseBackend):
    name = "nbl"

    def evaluate(self, point: GridPoint) -> SweepRow:
        params = NblParams(point.temperature, point.coupling, self.exchange, self.field)
        return assemble_row(
            point,
            exchange=self.exchange,
            field=self.field,
            obs=observables(params),
            jac=population_jacobian(params, ("T", "K")),
            unknowns=self.unknowns,
        )
