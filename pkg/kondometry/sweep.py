import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from kondometry.backends import get_backend_class
from kondometry.config import KondometryConfig, config
from kondometry.exceptions import (
    CriticalValidityWarning,
    InvalidInputError,
    SweepValidationError,
)
from kondometry.io import CsvFileIO, load_run
from kondometry.logging import get_logger
from kondometry.models import CriticalConstants, GridPoint, SweepRow
from kondometry.models.critical import (
    correlator,
    dc_dk,
    dc_dt,
    entropy_crossover,
    in_universal_window,
    qsnr_critical,
)
from kondometry.nrg import MetrologyGrid, metrology_grid

__all__ = [
    "CRITICAL_COLUMNS",
    "COMPARISON_COLUMNS",
    "GridRange",
    "MAXIMA_COLUMNS",
    "SweepConfig",
    "SweepResult",
    "THREADS_ENV",
    "compare_critical_vs_nrg",
    "comparison_rows",
    "critical_rows",
    "exact_grid",
    "load_experiment",
    "maxima_rows",
    "resolve_threads",
    "run_sweep",
]

logger = get_logger(__name__)

THREADS_ENV = "KONDOMETRY_THREADS"
SPACINGS = ("linear", "log")

MAXIMA_COLUMNS = ("K", "T_max_Q_SP_T", "max_Q_SP_T", "T_max_Q_SP_K", "max_Q_SP_K")
CRITICAL_COLUMNS = (
    "T",
    "dK",
    "T_over_TK",
    "dK_over_TK",
    "S",
    "C",
    "dC_dT",
    "dC_dK",
    "Q_SP_T",
    "Q_SP_K",
    "in_window",
)
COMPARISON_COLUMNS = (
    "T_over_TK",
    "dK_over_TK",
    "C_nrg",
    "C_exact",
    "dC_dT_nrg",
    "dC_dT_exact",
    "dC_dK_nrg",
    "dC_dK_exact",
    "dev_C",
    "dev_dC_dT",
    "dev_dC_dK",
    "in_window",
    "flagged",
)
# relative deviation above which a comparison row is flagged
DEVIATION_TOL = 0.1


@dataclass(frozen=True)
class GridRange:
    min: float
    max: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.count < 2:
            raise InvalidInputError(f"A grid range needs at least 2 points, got {self.count}.")
        if self.spacing not in SPACINGS:
            raise InvalidInputError(
                f"Grid spacing must be one of {', '.join(SPACINGS)}, got {self.spacing!r}."
            )
        if not self.min < self.max:
            raise InvalidInputError(f"Grid range [{self.min}, {self.max}] is empty.")
        if self.spacing == "log" and self.min <= 0.0:
            raise InvalidInputError("Logarithmic grid ranges must be strictly positive.")

    @classmethod
    def parse(cls, text: str) -> "GridRange":
        """Read ``min:max:count[:spacing]``."""
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise InvalidInputError(
                f"Grid ranges are given as min:max:count[:linear|log], got {text!r}."
            )
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise InvalidInputError(f"Malformed grid range {text!r}.")
        return cls(lo, hi, count, *parts[3:])

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "GridRange":
        # YAML reads exponent-only literals such as 1e-4 as strings
        try:
            return cls(
                min=float(obj["min"]),
                max=float(obj["max"]),
                count=int(obj["count"]),
                spacing=str(obj.get("spacing", "linear")),
            )
        except KeyError as e:
            raise InvalidInputError(f"Grid range is missing the {e.args[0]!r} entry.")
        except (TypeError, ValueError):
            raise InvalidInputError(f"Malformed grid range {dict(obj)!r}.")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.count)
        return np.linspace(self.min, self.max, self.count)


@dataclass
class SweepConfig:
    backend: str
    temperatures: GridRange
    couplings: GridRange
    output: Path
    settings: KondometryConfig = field(default_factory=lambda: config)
    maxima: Optional[Path] = None
    threads: Optional[int] = None

    def points(self) -> List[GridPoint]:
        # K-major: every temperature for the first coupling, then the next coupling
        return [
            GridPoint(float(t), float(k))
            for k in self.couplings.values()
            for t in self.temperatures.values()
        ]


@dataclass(frozen=True)
class SweepResult:
    output: Path
    rows: List[SweepRow]
    maxima: Optional[Path] = None


def load_experiment(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"Experiment file {str(path)!r} does not exist.")

    with open(path, "r") as experiment_file:
        obj = yaml.load(experiment_file, Loader=yaml.FullLoader) or {}

    if not isinstance(obj, dict):
        raise InvalidInputError(f"Experiment file {str(path)!r} must hold a mapping.")
    return obj


def resolve_threads(flag: Optional[int] = None, settings: Optional[KondometryConfig] = None):
    """Worker count: --threads, then KONDOMETRY_THREADS, then core.threads, then all cores."""
    settings = settings or config
    env = os.environ.get(THREADS_ENV, "")

    if flag is not None:
        threads = flag
    elif env:
        try:
            threads = int(env)
        except ValueError:
            raise InvalidInputError(f"{THREADS_ENV}={env!r} is not an integer.")
    elif settings.get_value("core.threads") > 0:
        threads = settings.get_value("core.threads")
    else:
        threads = os.cpu_count() or 1

    if threads < 1:
        raise InvalidInputError(f"The number of threads must be positive, got {threads}.")
    return threads


def maxima_rows(rows: Sequence[SweepRow]) -> List[Tuple[float, ...]]:
    """For every K, the largest Q_SP(T) and Q_SP(K) over T and where they occur."""
    by_coupling: Dict[float, List[SweepRow]] = {}
    for row in rows:
        by_coupling.setdefault(row.K, []).append(row)

    result = []
    for k, group in by_coupling.items():
        best_t = max(group, key=lambda r: r.Q_SP_T)
        best_k = max(group, key=lambda r: r.Q_SP_K)
        result.append((k, best_t.T, best_t.Q_SP_T, best_k.T, best_k.Q_SP_K))
    return result


def run_sweep(cfg: SweepConfig) -> SweepResult:
    backend = get_backend_class(cfg.backend)(cfg.settings)
    points = cfg.points()

    problems = backend.validate(points)
    if problems:
        raise SweepValidationError(
            f"The {cfg.backend} backend cannot evaluate {len(problems)} grid point(s):", problems
        )

    threads = resolve_threads(cfg.threads, cfg.settings)
    logger.info(f"Sweeping {len(points)} grid points with the {cfg.backend} backend.")
    rows = backend.evaluate_grid(points, threads=threads)

    io = CsvFileIO(digits=cfg.settings.get_value("sweep.digits"))
    output = io.write(cfg.output, SweepRow.columns(), [row.values() for row in rows])

    maxima = None
    if cfg.maxima is not None:
        maxima = io.write(cfg.maxima, MAXIMA_COLUMNS, maxima_rows(rows), kind="maxima")

    return SweepResult(output=output, rows=rows, maxima=maxima)


def critical_rows(
    consts: CriticalConstants, temperatures: Sequence[float], detunings: Sequence[float]
) -> List[Tuple[Any, ...]]:
    """Entropy, correlator, its derivatives and both QSNRs of the critical solution."""
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CriticalValidityWarning)
        for dk in detunings:
            k = consts.k_c + dk
            for t in temperatures:
                q_t, q_k = qsnr_critical(t, k, consts)
                rows.append(
                    (
                        t,
                        dk,
                        t / consts.t_k,
                        dk / consts.t_k,
                        entropy_crossover(t, dk, consts),
                        correlator(t, k, consts),
                        dc_dt(t, k, consts),
                        dc_dk(t, k, consts),
                        q_t,
                        q_k,
                        in_universal_window(t, k, consts),
                    )
                )
    return rows


def exact_grid(
    consts: CriticalConstants, temperatures: Sequence[float], couplings: Sequence[float]
) -> MetrologyGrid:
    """The critical solution laid out like an NRG metrology grid."""
    t = np.asarray(temperatures, dtype=float)
    k = np.asarray(couplings, dtype=float)
    tt, kk = np.meshgrid(t, k)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CriticalValidityWarning)
        c = correlator(tt, kk, consts)
        slope_t = dc_dt(tt, kk, consts)
        slope_k = dc_dk(tt, kk, consts)

    return MetrologyGrid(
        couplings=k,
        temperatures=t,
        exchange=float("nan"),
        field=0.0,
        correlator=np.asarray(c),
        dc_dt=np.asarray(slope_t),
        dc_dk=np.asarray(slope_k),
        coarse=np.zeros(tt.shape, dtype=bool),
    )


def _deviation(value: np.ndarray, reference: np.ndarray) -> np.ndarray:
    scale = np.abs(reference)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(scale > 0.0, np.abs(value - reference) / scale, np.abs(value - reference))


def comparison_rows(grid: MetrologyGrid, consts: CriticalConstants) -> List[Tuple[Any, ...]]:
    exact = exact_grid(consts, grid.temperatures, grid.couplings)
    dev_c = _deviation(grid.correlator, exact.correlator)
    dev_t = _deviation(grid.dc_dt, exact.dc_dt)
    dev_k = _deviation(grid.dc_dk, exact.dc_dk)

    rows = []
    for i, k in enumerate(grid.couplings):
        for j, t in enumerate(grid.temperatures):
            flagged = max(dev_t[i, j], dev_k[i, j]) > DEVIATION_TOL
            rows.append(
                (
                    t / consts.t_k,
                    (k - consts.k_c) / consts.t_k,
                    grid.correlator[i, j],
                    exact.correlator[i, j],
                    grid.dc_dt[i, j],
                    exact.dc_dt[i, j],
                    grid.dc_dk[i, j],
                    exact.dc_dk[i, j],
                    dev_c[i, j],
                    dev_t[i, j],
                    dev_k[i, j],
                    in_universal_window(t, k, consts),
                    bool(flagged),
                )
            )
    return rows


def compare_critical_vs_nrg(
    rundirs: Sequence[Union[str, Path]],
    output: Union[str, Path],
    consts: Optional[CriticalConstants] = None,
    t_range: Optional[Tuple[float, float]] = None,
    digits: int = 12,
) -> Path:
    """
    Compare NRG correlator derivatives, recomputed from saved runs, with the critical
    solution. Rows deviating by more than 10% are flagged, never rejected.
    """
    runs = [load_run(rundir, shells=False) for rundir in rundirs]
    if consts is None:
        stored = [run.constants for run in runs if run.constants is not None]
        consts = stored[0] if stored else CriticalConstants.from_config(config)

    grid = metrology_grid([run.tables for run in runs], t_range)
    rows = comparison_rows(grid, consts)

    flagged = sum(1 for row in rows if row[-1])
    if flagged:
        logger.info(f"{flagged} of {len(rows)} comparison rows deviate by more than 10%.")

    return CsvFileIO(digits=digits).write(output, COMPARISON_COLUMNS, rows, kind="comparison")
