"""
Local operators of one Wilson site and the initial (shell 0) cluster.

A site has the basis (empty, up, down, double) with |double> = c+_up c+_dn |empty>. States
of a grown chain are written |r; s> = (c+_new)^s |r>, so operators of the newest site act
without sign while operators of older sites pick up the parity (-1)^n_s of the new site.
"""
import functools
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from kondometry.models.narrow_band import (
    build_hamiltonian,
    spin_correlator_operator,
    total_sz_operator,
)

__all__ = [
    "CHANNELS",
    "SITE_CHARGE",
    "SITE_PARITY",
    "SITE_SZ2",
    "SPINS",
    "InitialShell",
    "initial_shell",
    "site_annihilator",
]

CHANNELS = ("L", "R")
SPINS = (1, -1)

# charge relative to half filling and twice the spin projection of each site state
SITE_CHARGE = np.array([-1, 0, 0, 1])
SITE_SZ2 = np.array([0, 1, -1, 0])
SITE_PARITY = np.array([1.0, -1.0, -1.0, 1.0])


@functools.lru_cache(maxsize=None)
def site_annihilator(spin: int) -> np.ndarray:
    c = np.zeros((4, 4))
    if spin == 1:
        c[0, 1] = 1.0
        c[2, 3] = 1.0
    else:
        c[0, 2] = 1.0
        c[1, 3] = -1.0
    c.setflags(write=False)
    return c


@dataclass(frozen=True, eq=False)
class InitialShell:
    hamiltonian: np.ndarray
    charge: np.ndarray
    sz2: np.ndarray
    correlator: np.ndarray
    # annihilators of the first orbital of each channel, keyed by (channel, spin)
    annihilators: Dict[Tuple[str, int], np.ndarray]


def initial_shell(coupling: float, exchange: float, field: float, impurities: bool = True):
    """
    Shell 0 in physical units: both impurities (if any) plus the first orbital of each
    channel, ordered impurities x orbital-L x orbital-R with orbital R created last.
    """
    parity = np.diag(SITE_PARITY)
    eye4 = np.eye(4)

    if impurities:
        hamiltonian = build_hamiltonian(coupling, exchange, field).matrix
        correlator = spin_correlator_operator()
        sz2 = np.rint(2.0 * np.diag(total_sz_operator())).astype(int)
        head = np.eye(4)
    else:
        site_sz = np.diag(0.5 * SITE_SZ2)
        hamiltonian = field * (np.kron(site_sz, eye4) + np.kron(eye4, site_sz))
        correlator = np.zeros((16, 16))
        sz2 = (SITE_SZ2[:, None] + SITE_SZ2[None, :]).ravel()
        head = np.eye(1)

    charge = np.kron(
        np.ones(head.shape[0], dtype=int), (SITE_CHARGE[:, None] + SITE_CHARGE[None, :]).ravel()
    )

    annihilators = {}
    for spin in SPINS:
        c = site_annihilator(spin)
        annihilators["L", spin] = np.kron(head, np.kron(c, parity))
        annihilators["R", spin] = np.kron(head, np.kron(eye4, c))

    return InitialShell(
        hamiltonian=np.asarray(hamiltonian, dtype=float),
        charge=charge,
        sz2=sz2,
        correlator=np.asarray(correlator, dtype=float),
        annihilators=annihilators,
    )
