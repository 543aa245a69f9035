import numpy as np
import pytest

from kondometry.config import KondometryConfig
from kondometry.nrg import FlowTables, NrgConfig


def random_psd(rng: np.random.Generator, n: int, jitter: float = 1e-6) -> np.ndarray:
    a = rng.normal(size=(n, n))
    return a.T @ a + jitter * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def settings():
    """Fresh defaults, independent of any project config in the working directory."""
    return KondometryConfig()


@pytest.fixture
def small_nrg():
    # reduced kept-state count; shell spectra stay cheap to diagonalize
    return NrgConfig(discretization=3.0, kept_states=150, chain_length=12)


def flow_tables(coupling, temperatures, impurity_entropy, correlator, exchange=1.0):
    """Hand-made flow tables with a zero reference entropy."""
    temperatures = np.asarray(temperatures, dtype=float)
    return FlowTables(
        coupling=coupling,
        exchange=exchange,
        field=0.0,
        shells=np.arange(len(temperatures)),
        temperatures=temperatures,
        entropy=np.asarray(impurity_entropy, dtype=float),
        free_entropy=np.zeros(len(temperatures)),
        correlator=np.asarray(correlator, dtype=float),
    )
