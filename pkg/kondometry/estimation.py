"""
Parameter-agnostic estimation algebra.

Quantum Fisher information matrices are assembled from parameter-dependent populations of
a diagonal probe state, inverted, and condensed into single- and multiparameter quantum
signal-to-noise ratios (QSNRs). Everything here is a pure function of its inputs.
"""
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from kondometry.exceptions import InvalidInputError

__all__ = [
    "EPS_POP",
    "EPS_SING",
    "Inversion",
    "ParamVector",
    "PopulationJacobian",
    "QfiMatrix",
    "QsnrReport",
    "VarianceBounds",
    "build_qfim",
    "classical_fisher",
    "invert_qfim",
    "observable_moments",
    "qsnr_report",
    "single_parameter_qfi",
    "suboptimal_snr",
    "variance_bounds",
    "weighted_bound",
]

# populations below this are exact zeros
EPS_POP = 1e-14
# relative determinant threshold for a singular QFIM
EPS_SING = 1e-12

TEMPERATURE = "T"
_NORMALIZATION_TOL = 1e-12
_DERIVATIVE_SUM_TOL = 1e-10
_CLAMP_TOL = 1e-12
_SYMMETRY_TOL = 1e-12
_PSD_TOL = 1e-10


@dataclass(frozen=True)
class ParamVector:
    names: Tuple[str, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        values = tuple(float(v) for v in self.values)

        if len(names) != len(values):
            raise InvalidInputError(
                f"Got {len(names)} parameter names but {len(values)} values."
            )
        if len(set(names)) != len(names):
            raise InvalidInputError(f"Parameter names must be unique, got {names}.")
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError(f"Parameter values must be finite, got {values}.")
        if TEMPERATURE in names and values[names.index(TEMPERATURE)] <= 0.0:
            raise InvalidInputError("Temperature must be strictly positive.")

        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, **values: float) -> "ParamVector":
        return cls(names=tuple(values.keys()), values=tuple(values.values()))

    def __getitem__(self, name: str) -> float:
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise InvalidInputError(f"Unknown parameter {name!r}.")

    def __len__(self) -> int:
        return len(self.names)

    def subset(self, names: Iterable[str]) -> "ParamVector":
        names = tuple(names)
        return ParamVector(names, tuple(self[n] for n in names))


@dataclass(frozen=True, eq=False)
class PopulationJacobian:
    """Populations rho_k and the n x m matrix of derivatives d rho_k / d lambda_i."""

    names: Tuple[str, ...]
    populations: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        rho = np.array(self.populations, dtype=float).reshape(-1)
        derivs = np.array(self.derivs, dtype=float).reshape(len(names), -1)

        if derivs.shape[1] != rho.size:
            raise InvalidInputError(
                f"Derivative rows have {derivs.shape[1]} entries for {rho.size} populations."
            )
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(derivs))):
            raise InvalidInputError("Populations and derivatives must be finite.")
        if np.any(rho < -_CLAMP_TOL):
            raise InvalidInputError(f"Negative population in {rho.tolist()}.")
        if abs(rho.sum() - 1.0) > _NORMALIZATION_TOL:
            raise InvalidInputError(f"Populations sum to {rho.sum()!r}, expected 1.")

        for name, row in zip(names, derivs):
            scale = max(1.0, float(np.max(np.abs(row), initial=0.0)))
            if abs(row.sum()) > _DERIVATIVE_SUM_TOL * scale:
                raise InvalidInputError(
                    f"Derivatives with respect to {name!r} sum to {row.sum()!r}; "
                    f"normalization cannot depend on a parameter."
                )

        # partial traces leave tiny negative rounding residue
        rho = np.where(rho < 0.0, 0.0, rho)
        rho.setflags(write=False)
        derivs.setflags(write=False)

        object.__setattr__(self, "names", names)
        object.__setattr__(self, "populations", rho)
        object.__setattr__(self, "derivs", derivs)

    def restrict(self, *names: str) -> "PopulationJacobian":
        rows = [self.names.index(n) for n in names]
        return PopulationJacobian(tuple(names), self.populations, self.derivs[rows])


@dataclass(frozen=True, eq=False)
class QfiMatrix:
    names: Tuple[str, ...]
    elements: np.ndarray
    # parameters whose QFI diverges (a vanishing population with a finite derivative)
    divergent: Tuple[str, ...] = ()
    determinant: float = field(init=False)

    def __post_init__(self):
        names = tuple(self.names)
        h = np.array(self.elements, dtype=float).reshape(len(names), len(names))
        divergent = tuple(self.divergent)

        finite = np.isfinite(h)
        norm = float(np.max(np.abs(h[finite]), initial=0.0))
        with np.errstate(invalid="ignore"):
            asymmetry = np.abs(h - h.T)[finite & finite.T]
        if np.any(asymmetry > _SYMMETRY_TOL * max(norm, 1.0)):
            raise InvalidInputError("QFI matrix must be symmetric.")
        if np.any(np.diag(h) < 0.0):
            raise InvalidInputError("QFI matrix must have a non-negative diagonal.")

        if divergent:
            det = math.inf
        else:
            if np.linalg.eigvalsh(h).min(initial=0.0) < -_PSD_TOL * max(norm, 1e-300):
                raise InvalidInputError("QFI matrix must be positive semidefinite.")
            det = _determinant(h)

        h.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "elements", h)
        object.__setattr__(self, "divergent", divergent)
        object.__setattr__(self, "determinant", det)

    def __getitem__(self, pair: Tuple[str, str]) -> float:
        a, b = pair
        return float(self.elements[self.index(a), self.index(b)])

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInputError(f"Parameter {name!r} not in QFIM labels {self.names}.")

    def restrict(self, names: Sequence[str]) -> "QfiMatrix":
        idx = [self.index(n) for n in names]
        return QfiMatrix(
            tuple(names),
            self.elements[np.ix_(idx, idx)],
            tuple(n for n in self.divergent if n in names),
        )


class Inversion(NamedTuple):
    inverse: Optional[np.ndarray]
    singular: bool


@dataclass(frozen=True, eq=False)
class QsnrReport:
    names: Tuple[str, ...]
    sp: np.ndarray
    mp: np.ndarray
    correlation: np.ndarray
    determinant: float
    singular: bool

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInputError(f"Parameter {name!r} not in report labels {self.names}.")

    def single(self, name: str) -> float:
        return float(self.sp[self._index(name)])

    def multi(self, a: str, b: Optional[str] = None) -> float:
        b = a if b is None else b
        return float(self.mp[self._index(a), self._index(b)])

    def cor(self, a: str, b: str) -> float:
        return float(self.correlation[self._index(a), self._index(b)])

    def degradation(self, name: str) -> float:
        """Q_MP(l, l) / Q_SP(l), equal to 1 - Cor^2 for two parameters."""
        sp = self.single(name)
        return self.multi(name) / sp if sp > 0.0 else math.nan


@dataclass(frozen=True, eq=False)
class VarianceBounds:
    names: Tuple[str, ...]
    # other parameters unknown: (H^-1)_ii / N
    multiparameter: np.ndarray
    # other parameters known: 1 / (N H_ii)
    single: np.ndarray


def _determinant(h: np.ndarray) -> float:
    n = h.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(h[0, 0])
    if n == 2:
        return float(h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0])
    return float(np.linalg.det(h))


def build_qfim(pj: PopulationJacobian) -> QfiMatrix:
    rho, d = pj.populations, pj.derivs

    live = rho >= EPS_POP
    # vanishing population with a finite derivative: the 0 * 0/0 limit does not apply
    blown = (~live)[np.newaxis, :] & (np.abs(d) >= EPS_POP)
    divergent = tuple(name for name, row in zip(pj.names, blown) if row.any())

    dl = d[:, live]
    h = (dl / rho[live]) @ dl.T
    h = 0.5 * (h + h.T)

    for name in divergent:
        i = pj.names.index(name)
        h[i, i] = math.inf

    return QfiMatrix(pj.names, h, divergent)


def single_parameter_qfi(pj: PopulationJacobian) -> float:
    if len(pj.names) != 1:
        raise InvalidInputError(
            f"Single-parameter QFI needs exactly one derivative row, got {len(pj.names)}."
        )
    return float(build_qfim(pj).elements[0, 0])


def invert_qfim(h: QfiMatrix) -> Inversion:
    if h.divergent:
        raise InvalidInputError(
            f"Cannot invert a QFIM with divergent entries for {h.divergent}; "
            f"treat those parameters as known."
        )

    elements = h.elements
    n = elements.shape[0]
    scale = float(np.prod(np.maximum(np.diag(elements), EPS_POP)))

    if abs(h.determinant) <= EPS_SING * scale:
        return Inversion(None, True)

    if n == 2:
        a, b, d = elements[0, 0], elements[0, 1], elements[1, 1]
        inverse = np.array([[d, -b], [-b, a]]) / h.determinant
    else:
        identity = np.eye(n)
        try:
            inverse = scipy.linalg.solve(elements, identity, assume_a="pos")
        except np.linalg.LinAlgError:
            inverse = scipy.linalg.solve(elements, identity, assume_a="sym")
        inverse = 0.5 * (inverse + inverse.T)

    return Inversion(inverse, False)


def _scaled_inf(weight: float, sign: float = 1.0) -> float:
    return 0.0 if weight == 0.0 else math.copysign(math.inf, sign)


def qsnr_report(params: ParamVector, h: QfiMatrix) -> QsnrReport:
    if set(params.names) != set(h.names) or len(params.names) != len(h.names):
        raise InvalidInputError(
            f"Parameter labels {params.names} do not match QFIM labels {h.names}."
        )

    h = h.restrict(params.names)
    lam = np.array(params.values)
    n = len(lam)
    elements = h.elements
    diag = np.diag(elements)

    sp = np.empty(n)
    for i in range(n):
        sp[i] = _scaled_inf(lam[i] ** 2) if math.isinf(diag[i]) else lam[i] ** 2 * diag[i]

    correlation = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            denom = diag[i] * diag[j]
            if denom > 0.0 and math.isfinite(denom):
                cor = float(np.clip(elements[i, j] / math.sqrt(denom), -1.0, 1.0))
            else:
                cor = 0.0
            correlation[i, j] = correlation[j, i] = cor

    known = [i for i, name in enumerate(h.names) if name in h.divergent]
    free = [i for i in range(n) if i not in known]

    mp = np.zeros((n, n))
    singular = False

    if free:
        inversion = invert_qfim(h.restrict([h.names[i] for i in free]))
        singular = inversion.singular

    if not singular:
        if free:
            inverse = inversion.inverse
            for a, i in enumerate(free):
                for b, j in enumerate(free):
                    weight = abs(lam[i] * lam[j])
                    entry = inverse[a, b]
                    mp[i, j] = _scaled_inf(weight, entry) if entry == 0.0 else weight / entry

        # an infinitely well-determined parameter drops out of the correction term
        for i in known:
            for j in range(n):
                weight = abs(lam[i] * lam[j])
                sign = 1.0 if i == j else -elements[i, j] if elements[i, j] != 0.0 else 1.0
                mp[i, j] = mp[j, i] = _scaled_inf(weight, sign)

    return QsnrReport(
        names=h.names,
        sp=sp,
        mp=mp,
        correlation=correlation,
        determinant=h.determinant,
        singular=singular,
    )


def variance_bounds(h: QfiMatrix, measurements: int = 1) -> VarianceBounds:
    if measurements < 1:
        raise InvalidInputError("The number of measurements must be positive.")

    diag = np.diag(h.elements)
    with np.errstate(divide="ignore"):
        single = np.where(diag > 0.0, 1.0 / (measurements * diag), math.inf)

    inversion = invert_qfim(h)
    if inversion.singular:
        multi = np.full(len(h.names), math.inf)
    else:
        multi = np.diag(inversion.inverse) / measurements

    return VarianceBounds(h.names, multi, single)


def weighted_bound(h: QfiMatrix, weights: np.ndarray, measurements: int = 1) -> float:
    """Scalar Cramer-Rao bound Tr[W H^-1] / N for a positive semidefinite weight matrix."""
    w = np.asarray(weights, dtype=float)
    n = len(h.names)

    if w.shape != (n, n) or not np.allclose(w, w.T):
        raise InvalidInputError(f"Weight matrix must be symmetric with shape {(n, n)}.")
    if np.linalg.eigvalsh(w).min() < -_PSD_TOL * max(np.abs(w).max(), 1.0):
        raise InvalidInputError("Weight matrix must be positive semidefinite.")
    if measurements < 1:
        raise InvalidInputError("The number of measurements must be positive.")

    inversion = invert_qfim(h)
    if inversion.singular:
        return math.inf

    return float(np.trace(w @ inversion.inverse)) / measurements


def observable_moments(
    populations: Sequence[float], derivs: Sequence[float], spectrum: Sequence[float]
) -> Tuple[float, float, float]:
    """Mean, parameter derivative of the mean, and variance of a diagonal observable."""
    rho = np.asarray(populations, dtype=float)
    d = np.asarray(derivs, dtype=float)
    omega = np.asarray(spectrum, dtype=float)

    mean = float(rho @ omega)
    mean_deriv = float(d @ omega)
    variance = float(rho @ (omega - mean) ** 2)

    return mean, mean_deriv, variance


def classical_fisher(
    populations: Sequence[float], derivs: Sequence[float], spectrum: Sequence[float]
) -> float:
    """Error-propagation Fisher information |d<O>|^2 / Var[O] of a diagonal observable."""
    _, mean_deriv, variance = observable_moments(populations, derivs, spectrum)
    return suboptimal_snr(1.0, mean_deriv, variance)


def suboptimal_snr(lam: float, mean_deriv: float, variance: float) -> float:
    if not variance > 0.0:
        raise InvalidInputError(
            f"Observable variance must be positive, got {variance!r} "
            f"(a deterministic observable carries no parameter information)."
        )
    return lam**2 * mean_deriv**2 / variance
