# flake8: noqa: F401
from .chain import NrgConfig, wilson_chain
from .engine import ShellRecord, reference_run, run
from .metrology import MetrologyGrid, NrgBackend, metrology_grid, nrg_metrology
from .thermo import (
    FlowTables,
    KcResult,
    crossing_temperature,
    estimate_tk,
    extract_critical_constants,
    flows,
    thermodynamics,
    tune_kc,
)
