import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from kondometry.config import KondometryConfig
from kondometry.exceptions import GridResolutionWarning, InvalidInputError
from kondometry.logging import get_logger
from kondometry.models.base import BaseBackend, GridPoint, SweepRow, assemble_row
from kondometry.nrg.chain import NrgConfig
from kondometry.nrg.thermo import FlowTables, flows
from kondometry.probe import correlator_jacobian

__all__ = ["MetrologyGrid", "NrgBackend", "metrology_grid", "nrg_metrology"]

logger = get_logger(__name__)

# relative gap between one-sided and central differences that marks a cell as unresolved
RESOLUTION_TOL = 0.1


@dataclass(frozen=True, eq=False)
class MetrologyGrid:
    """Correlator flows and derivatives on a (K, T) grid, T ascending along axis 1."""

    couplings: np.ndarray
    temperatures: np.ndarray
    exchange: float
    field: float
    correlator: np.ndarray
    dc_dt: np.ndarray
    dc_dk: np.ndarray
    coarse: np.ndarray

    def rows(self, unknowns: Sequence[str] = ("T", "K")) -> List[SweepRow]:
        rows = []
        for i, k in enumerate(self.couplings):
            for j, t in enumerate(self.temperatures):
                obs, jac = correlator_jacobian(
                    float(self.correlator[i, j]),
                    {"T": float(self.dc_dt[i, j]), "K": float(self.dc_dk[i, j])},
                )
                rows.append(
                    assemble_row(
                        GridPoint(float(t), float(k)),
                        exchange=self.exchange,
                        field=self.field,
                        obs=obs,
                        jac=jac,
                        unknowns=unknowns,
                    )
                )
        return rows

    def qsnr(self) -> Tuple[np.ndarray, np.ndarray]:
        """Single-parameter QSNR grids (Q_SP(T), Q_SP(K))."""
        c = self.correlator
        denominator = (0.25 - c) * (0.75 + c)
        with np.errstate(divide="ignore", invalid="ignore"):
            h_tt = np.where(denominator > 0.0, self.dc_dt**2 / denominator, 0.0)
            h_kk = np.where(denominator > 0.0, self.dc_dk**2 / denominator, 0.0)
        t = self.temperatures[None, :]
        k = self.couplings[:, None]
        return t**2 * h_tt, k**2 * h_kk


def _unresolved(values: np.ndarray, coords: np.ndarray, central: np.ndarray, axis: int):
    """Cells where forward and central differences disagree by more than RESOLUTION_TOL."""
    flags = np.zeros(values.shape, dtype=bool)
    n = values.shape[axis]
    if n < 3:
        return flags

    diff = np.diff(values, axis=axis)
    step = np.diff(coords)
    shape = [1, 1]
    shape[axis] = n - 1
    forward = diff / step.reshape(shape)

    inner = [slice(None), slice(None)]
    inner[axis] = slice(1, n - 1)
    ahead = [slice(None), slice(None)]
    ahead[axis] = slice(1, n - 1)

    c = central[tuple(inner)]
    f = forward[tuple(ahead)]
    floor = 1e-3 * np.max(np.abs(central), initial=0.0)
    flags[tuple(inner)] = np.abs(f - c) > RESOLUTION_TOL * np.maximum(np.abs(c), floor)
    return flags


def metrology_grid(
    tables: Sequence[FlowTables], t_range: Optional[Tuple[float, float]] = None
) -> MetrologyGrid:
    """
    Derivatives of the NRG correlator on the grid spanned by runs at several couplings:
    central differences in K and across neighbouring shell temperatures.
    """
    if len(tables) < 3:
        raise InvalidInputError("At least three couplings are needed for central differences.")

    ordered = sorted(tables, key=lambda tab: tab.coupling)
    couplings = np.array([tab.coupling for tab in ordered])
    if np.any(np.diff(couplings) <= 0.0):
        raise InvalidInputError("NRG runs must have distinct couplings.")

    length = min(len(tab) for tab in ordered)
    temperatures = ordered[0].temperatures[:length]
    for tab in ordered:
        if not np.allclose(tab.temperatures[:length], temperatures, rtol=1e-12):
            raise InvalidInputError("NRG runs use different shell temperatures.")

    # shells run from high to low temperature; flip to ascending T
    temperatures = temperatures[::-1]
    c = np.stack([tab.correlator[:length][::-1] for tab in ordered])

    dc_dt = np.gradient(c, temperatures, axis=1)
    dc_dk = np.gradient(c, couplings, axis=0)
    coarse = _unresolved(c, temperatures, dc_dt, axis=1) | _unresolved(
        c, couplings, dc_dk, axis=0
    )

    if t_range is not None:
        lo, hi = t_range
        keep = (temperatures >= lo) & (temperatures <= hi)
        if not np.any(keep):
            raise InvalidInputError(f"No shell temperature lies within {t_range}.")
        temperatures, c = temperatures[keep], c[:, keep]
        dc_dt, dc_dk, coarse = dc_dt[:, keep], dc_dk[:, keep], coarse[:, keep]

    if np.any(coarse):
        warnings.warn(
            f"{int(coarse.sum())} of {coarse.size} grid cells have finite differences that "
            f"vary by more than {RESOLUTION_TOL:.0%}; refine the coupling grid.",
            GridResolutionWarning,
            stacklevel=2,
        )

    return MetrologyGrid(
        couplings=couplings,
        temperatures=temperatures,
        exchange=ordered[0].exchange,
        field=ordered[0].field,
        correlator=c,
        dc_dt=dc_dt,
        dc_dk=dc_dk,
        coarse=coarse,
    )


def nrg_metrology(
    exchange: float,
    config: NrgConfig,
    couplings: Sequence[float],
    t_range: Optional[Tuple[float, float]] = None,
    field: float = 0.0,
    workers: int = 1,
) -> MetrologyGrid:
    # memory-bound: one run at a time, threads go to the blocks inside each shell
    tables = []
    for k in sorted(set(couplings)):
        logger.info(f"NRG metrology: running K = {k:g}")
        flow, _ = flows(config, k, exchange, field, workers=workers)
        tables.append(flow)
    return metrology_grid(tables, t_range)


class NrgBackend(BaseBackend):
    """
    Sweep backend running one NRG flow per coupling. Temperatures are the shell
    temperatures inside the requested range, not the requested grid values.
    """

    name = "nrg"
    parallel = False

    def __init__(self, cfg: Optional[KondometryConfig] = None, nrg: Optional[NrgConfig] = None):
        super().__init__(cfg)
        self.nrg = nrg or NrgConfig.from_config(self.cfg)

    def validate(self, points: Sequence[GridPoint]) -> List[str]:
        problems = []
        if not self.exchange > 0.0:
            problems.append(f"J={self.exchange:g}: the Kondo exchange must be positive")
        if len({p.coupling for p in points}) < 3:
            problems.append("fewer than three distinct couplings: no central K differences")
        return problems

    def evaluate(self, point: GridPoint) -> SweepRow:
        raise InvalidInputError("The NRG backend only evaluates whole grids.")

    def evaluate_grid(self, points: Sequence[GridPoint], threads: int = 1) -> List[SweepRow]:
        temperatures = [p.temperature for p in points]
        grid = nrg_metrology(
            self.exchange,
            self.nrg,
            [p.coupling for p in points],
            t_range=(min(temperatures), max(temperatures)),
            field=self.field,
            workers=threads,
        )
        return grid.rows(self.unknowns)
