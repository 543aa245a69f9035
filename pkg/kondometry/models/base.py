import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from typing import List, Optional, Sequence, Tuple

from kondometry.config import KondometryConfig, config
from kondometry.estimation import (
    PopulationJacobian,
    ParamVector,
    build_qfim,
    qsnr_report,
)
from kondometry.exceptions import InvalidInputError
from kondometry.probe import ProbeObservables

PARAMETERS = ("T", "K")


@dataclass(frozen=True)
class GridPoint:
    temperature: float
    coupling: float


@dataclass(frozen=True)
class SweepRow:
    T: float
    K: float
    J: float
    B: float
    C: float
    M: float
    chi: float
    H_TT: float
    H_KK: float
    H_TK: float
    det_H: float
    Q_SP_T: float
    Q_SP_K: float
    Q_MP_TT: float
    Q_MP_KK: float
    Q_MP_TK: float
    correlation: float
    singular_flag: bool

    @classmethod
    def columns(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple:
        return astuple(self)


def parse_unknowns(text: str) -> Tuple[str, ...]:
    names = {name.strip() for name in text.split(",") if name.strip()}
    if not names or not names <= set(PARAMETERS):
        raise InvalidInputError(
            f"Unknown parameter set {text!r} must be a non-empty subset of "
            f"{', '.join(PARAMETERS)}."
        )
    # fixed order so that the Q_MP columns line up
    return tuple(n for n in PARAMETERS if n in names)


def assemble_row(
    point: GridPoint,
    exchange: float,
    field: float,
    obs: ProbeObservables,
    jac: PopulationJacobian,
    unknowns: Sequence[str],
) -> SweepRow:
    """Fill one sweep row from probe observables and the (T, K) population jacobian."""
    t, k = point.temperature, point.coupling
    h = build_qfim(jac.restrict(*PARAMETERS))
    full = qsnr_report(ParamVector(PARAMETERS, (t, k)), h)

    params = ParamVector(PARAMETERS, (t, k)).subset(unknowns)
    report = qsnr_report(params, h.restrict(unknowns))

    def mp(a: str, b: str) -> float:
        if a in unknowns and b in unknowns:
            return report.multi(a, b)
        return 0.0

    return SweepRow(
        T=t,
        K=k,
        J=exchange,
        B=field,
        C=obs.c,
        M=obs.m,
        chi=obs.chi,
        H_TT=h["T", "T"],
        H_KK=h["K", "K"],
        H_TK=h["T", "K"],
        det_H=h.determinant,
        Q_SP_T=full.single("T"),
        Q_SP_K=full.single("K"),
        Q_MP_TT=mp("T", "T"),
        Q_MP_KK=mp("K", "K"),
        Q_MP_TK=mp("T", "K"),
        correlation=full.cor("T", "K"),
        singular_flag=report.singular,
    )


def _evaluate(backend: "BaseBackend", point: GridPoint) -> SweepRow:
    return backend.evaluate(point)


class BaseBackend:
    """Base class for all kondometry sweep backends."""

    name = "base"
    # whether grid points may be farmed out to worker processes
    parallel = True

    def __init__(self, cfg: Optional[KondometryConfig] = None):
        self.cfg = cfg = cfg or config
        self.exchange: float = cfg.get_value("sweep.exchange")
        self.field: float = cfg.get_value("sweep.field")
        self.unknowns = parse_unknowns(cfg.get_value("sweep.unknowns"))

        if not math.isfinite(self.field) or self.field < 0.0:
            raise InvalidInputError(f"Control field must be finite and >= 0, got {self.field}.")

    def validate(self, points: Sequence[GridPoint]) -> List[str]:
        """Describe every grid point this backend cannot evaluate. Empty means valid."""
        return []

    def evaluate(self, point: GridPoint) -> SweepRow:
        raise NotImplementedError

    def evaluate_grid(self, points: Sequence[GridPoint], threads: int = 1) -> List[SweepRow]:
        if not self.parallel or threads <= 1 or len(points) < 2:
            return [self.evaluate(p) for p in points]

        workers = min(threads, len(points))
        with ProcessPoolExecutor(max_workers=workers) as executor:
            # map preserves submission order regardless of completion order
            return list(executor.map(_evaluate, [self] * len(points), points))
