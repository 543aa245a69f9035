import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from kondometry.exceptions import ChainTooShortError, InvalidBracketError, InvalidInputError
from kondometry.logging import get_logger
from kondometry.models.critical import HALF_LOG_TWO, CriticalConstants, entropy_scaling
from kondometry.nrg.chain import NrgConfig
from kondometry.nrg.engine import ShellRecord, reference_run, run

__all__ = [
    "FlowTables",
    "KcResult",
    "crossing_temperature",
    "estimate_tk",
    "extract_critical_constants",
    "flows",
    "phase_indicator",
    "plateau",
    "shell_thermodynamics",
    "thermodynamics",
    "tune_kc",
]

logger = get_logger(__name__)

LOG_TWO = math.log(2.0)
PLATEAU_BAND = 0.05
# smallest correlator drop read as a flow into the local singlet
PHASE_TOL = 1e-6
# relative bisection width, in units of T_K
KC_TOLERANCE = 1e-3


@dataclass(frozen=True, eq=False)
class FlowTables:
    coupling: float
    exchange: float
    field: float
    shells: np.ndarray
    temperatures: np.ndarray
    entropy: np.ndarray
    free_entropy: np.ndarray
    correlator: np.ndarray

    @property
    def impurity_entropy(self) -> np.ndarray:
        return self.entropy - self.free_entropy

    def __len__(self) -> int:
        return len(self.shells)


def shell_thermodynamics(record: ShellRecord, beta_bar: float) -> Tuple[float, float]:
    """Entropy and <S_L.S_R> of one shell at its own temperature T_n."""
    energies = record.spectrum()
    weights = np.exp(-beta_bar * energies)
    z = weights.sum()
    p = weights / z
    entropy = beta_bar * float(p @ energies) + math.log(z)
    return entropy, float(p @ record.diagonal())


def thermodynamics(
    shells: Sequence[ShellRecord],
    config: NrgConfig,
    reference: Optional[Sequence[ShellRecord]] = None,
    coupling: float = math.nan,
    exchange: float = math.nan,
    field: float = 0.0,
) -> FlowTables:
    if not reference:
        raise InvalidInputError(
            "An impurity-free reference run is required to subtract the chain entropy."
        )
    if len(reference) < len(shells):
        raise InvalidInputError(
            f"Reference run has {len(reference)} shells, fewer than the {len(shells)} given."
        )

    beta_bar = config.beta_bar
    rows = [shell_thermodynamics(record, beta_bar) for record in shells]
    free = [shell_thermodynamics(record, beta_bar)[0] for record in reference[: len(shells)]]

    return FlowTables(
        coupling=coupling,
        exchange=exchange,
        field=field,
        shells=np.array([record.index for record in shells]),
        temperatures=np.array([record.temperature for record in shells]),
        entropy=np.array([entropy for entropy, _ in rows]),
        free_entropy=np.array(free),
        correlator=np.array([c for _, c in rows]),
    )


def flows(
    config: NrgConfig, coupling: float, exchange: float, field: float = 0.0, workers: int = 1
) -> Tuple[FlowTables, List[ShellRecord]]:
    """Run the chain and subtract the cached impurity-free reference."""
    shells = run(config, coupling, exchange, field, workers=workers)
    tables = thermodynamics(
        shells,
        config,
        reference_run(config, field),
        coupling=coupling,
        exchange=exchange,
        field=field,
    )
    return tables, shells


def crossing_temperature(tables: FlowTables, level: float) -> float:
    """First temperature at which the impurity entropy falls below ``level``, log-interpolated."""
    s = tables.impurity_entropy
    t = tables.temperatures

    for n in range(len(s) - 1):
        if s[n] >= level > s[n + 1]:
            fraction = (level - s[n]) / (s[n + 1] - s[n])
            return math.exp(math.log(t[n]) + fraction * (math.log(t[n + 1]) - math.log(t[n])))

    raise ChainTooShortError(
        f"Impurity entropy never crosses {level:.4f} within {len(s)} shells "
        f"(lowest temperature {t[-1]:.3g}); use a longer chain."
    )


def estimate_tk(exchange: float, config: NrgConfig, workers: int = 1) -> float:
    """
    Kondo temperature from the decoupled (K = 0) flow: the impurity entropy of both
    impurities together crosses ln 2, i.e. ln(2)/2 per screened impurity.
    """
    tables, _ = flows(config, 0.0, exchange, workers=workers)
    tk = crossing_temperature(tables, LOG_TWO)
    logger.info(f"T_K({exchange:g}) = {tk:.6g}")
    return tk


def plateau(tables: FlowTables, band: float = PLATEAU_BAND) -> np.ndarray:
    """Indices of shells whose impurity entropy lies within ``band`` of ln(2)/2."""
    return np.flatnonzero(np.abs(tables.impurity_entropy - HALF_LOG_TWO) <= band)


def phase_indicator(tables: FlowTables) -> int:
    """
    +1 on the local-singlet side (K > K_c), -1 on the Kondo side, 0 if the critical
    plateau survives to the last shell.
    """
    s = tables.impurity_entropy
    below = np.flatnonzero(s < HALF_LOG_TWO + PLATEAU_BAND)
    if not len(below):
        raise ChainTooShortError(
            f"Impurity entropy never approaches ln(2)/2 within {len(s)} shells."
        )

    tail = s[below[0] :]
    if np.all(np.abs(tail - HALF_LOG_TWO) <= PLATEAU_BAND):
        return 0

    # leaving the critical point, C drops towards -3/4 only if the impurities lock up
    start = tables.correlator[below[0]]
    return 1 if tables.correlator[-1] < start - PHASE_TOL else -1


class KcResult(NamedTuple):
    k_c: float
    lower: float
    upper: float
    tables: FlowTables


def _midpoint(lo: float, hi: float, floor: float) -> float:
    if lo > 0.0 and hi / lo > 4.0:
        return math.sqrt(lo * hi)
    if lo <= 0.0 and hi > 4.0 * floor:
        return math.sqrt(floor * hi)
    return 0.5 * (lo + hi)


def tune_kc(
    exchange: float,
    config: NrgConfig,
    bracket: Optional[Tuple[float, float]] = None,
    tk: Optional[float] = None,
    workers: int = 1,
    max_iterations: int = 80,
) -> KcResult:
    """
    Bisect on K for the critical point. The bracket ends must flow to opposite phases;
    the search stops once it is narrower than 1e-3 T_K or the plateau survives to the
    lowest shell.
    """
    lo, hi = bracket or (0.0, 2.0 * exchange)
    if not 0.0 <= lo < hi:
        raise InvalidBracketError(f"Invalid bracket {(lo, hi)} for K_c.")

    tk = tk if tk is not None else estimate_tk(exchange, config, workers=workers)

    def trial(k: float) -> Tuple[int, FlowTables]:
        tables, _ = flows(config, k, exchange, workers=workers)
        return phase_indicator(tables), tables

    lo_phase, lo_tables = trial(lo)
    hi_phase, hi_tables = trial(hi)
    if lo_phase == 0:
        return KcResult(lo, lo, lo, lo_tables)
    if hi_phase == 0:
        return KcResult(hi, hi, hi, hi_tables)
    if not (lo_phase < 0 < hi_phase):
        raise InvalidBracketError(
            f"K = {lo:g} and K = {hi:g} do not flow to the Kondo and local-singlet phases "
            f"respectively; cannot bracket K_c."
        )

    best = hi_tables
    for iteration in range(max_iterations):
        if hi - lo <= KC_TOLERANCE * tk:
            break

        mid = _midpoint(lo, hi, floor=0.1 * tk)
        phase, tables = trial(mid)
        logger.debug(f"K_c bisection {iteration}: K = {mid:.10g}, phase {phase:+d}")

        best = tables
        if phase == 0:
            lo = hi = mid
            break
        if phase > 0:
            hi = mid
        else:
            lo = mid

    k_c = 0.5 * (lo + hi)
    logger.info(f"K_c({exchange:g}) = {k_c:.10g} in [{lo:.10g}, {hi:.10g}]")
    return KcResult(k_c, lo, hi, best)


def extract_critical_constants(
    exchange: float,
    config: NrgConfig,
    detuning: float = 0.03,
    workers: int = 1,
    kc: Optional[KcResult] = None,
) -> CriticalConstants:
    """
    Constants of the universal critical solution from NRG flows: K_c by bisection, T_K where
    the K_c flow crosses ln 2, C* from the plateau correlator, and c from the temperature at
    which a run detuned by ``detuning`` T_K reaches ln(2)/4.
    """
    kc = kc or tune_kc(exchange, config, workers=workers)
    critical, _ = flows(config, kc.k_c, exchange, workers=workers)

    tk = crossing_temperature(critical, LOG_TWO)
    shells = plateau(critical)
    if not len(shells):
        raise ChainTooShortError("No critical entropy plateau found to read off C*.")
    c_star = float(np.mean(critical.correlator[shells]))

    delta_k = detuning * tk
    detuned, _ = flows(config, kc.k_c + delta_k, exchange, workers=workers)
    t_cross = crossing_temperature(detuned, 0.5 * HALF_LOG_TWO)

    # S(t0) = -ln(2)/4 fixes T/T* at the crossing
    t0 = brentq(lambda t: entropy_scaling(t) + 0.5 * HALF_LOG_TWO, 1e-3, 1e3, xtol=1e-12)
    t_star = t_cross / t0
    c = t_star * tk / delta_k**2

    logger.info(
        f"critical constants: K_c = {kc.k_c:.6g}, T_K = {tk:.6g}, c = {c:.4g}, "
        f"C* = {c_star:.4f}"
    )
    return CriticalConstants(k_c=kc.k_c, t_k=tk, c=c, c_star=c_star)
