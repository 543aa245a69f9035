"""
Iterative diagonalization of the two-channel Wilson chain.

Shell 0 holds both impurities and the first orbital of each channel. Every later shell adds
one orbital to channel L, truncates, then adds one orbital to channel R and truncates again.
States are grouped in blocks labelled by (Q, 2 S_z); no matrix element between different
blocks is ever built.
"""
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.linalg

from kondometry.exceptions import InvalidInputError, ResourceError
from kondometry.logging import get_logger
from kondometry.nrg.chain import NrgConfig, wilson_chain
from kondometry.nrg.operators import (
    CHANNELS,
    SITE_CHARGE,
    SITE_PARITY,
    SITE_SZ2,
    SPINS,
    InitialShell,
    initial_shell,
    site_annihilator,
)

__all__ = ["Label", "ShellRecord", "reference_run", "run"]

logger = get_logger(__name__)

Label = Tuple[int, int]
Blocks = Dict[Label, np.ndarray]

DEGENERACY_TOL = 1e-10

_BYTES_PER_MIB = 1 << 20


@dataclass(frozen=True, eq=False)
class ShellRecord:
    index: int
    temperature: float
    scale: float
    # every eigenvalue of the shell, rescaled by 1/scale with the ground state at 0
    energies: Blocks
    kept: Dict[Label, int]
    # <i| S_L.S_R |i> for every eigenstate, and the kept x kept matrix per block
    correlator_diagonal: Blocks
    correlator: Blocks

    @property
    def labels(self) -> Tuple[Label, ...]:
        return tuple(sorted(self.energies))

    @property
    def kept_count(self) -> int:
        return sum(self.kept.values())

    def spectrum(self) -> np.ndarray:
        return np.concatenate([self.energies[label] for label in self.labels])

    def diagonal(self) -> np.ndarray:
        return np.concatenate([self.correlator_diagonal[label] for label in self.labels])


@dataclass
class _Basis:
    energies: Blocks
    # annihilator of the newest orbital of each channel, keyed by (channel, spin) and
    # then by source block; each matrix maps the source block to its (Q-1, S-spin) block
    annihilators: Dict[Tuple[str, int], Blocks]
    correlator: Blocks


class _Component(NamedTuple):
    label: Label
    state: int
    offset: int
    size: int


class _Eigen(NamedTuple):
    energies: np.ndarray
    vectors: np.ndarray


def _lowered(label: Label, spin: int) -> Label:
    return label[0] - 1, label[1] - spin


def _raised(label: Label, spin: int) -> Label:
    return label[0] + 1, label[1] + spin


def _diagonalize(
    blocks: Blocks, config: NrgConfig, shell: int, executor: ThreadPoolExecutor
) -> Dict[Label, _Eigen]:
    labels = sorted(blocks)
    budget = config.memory_budget * _BYTES_PER_MIB

    for label in labels:
        dim = blocks[label].shape[0]
        if 8 * dim * dim > budget:
            raise ResourceError(
                f"block {label} of dimension {dim} exceeds the memory budget of "
                f"{config.memory_budget} MiB",
                shell=shell,
            )

    # results are gathered in label order whatever order the workers finish in
    results = executor.map(scipy.linalg.eigh, [blocks[label] for label in labels])
    return {label: _Eigen(*result) for label, result in zip(labels, results)}


def _truncate(eigen: Dict[Label, _Eigen], kept_states: int) -> Dict[Label, int]:
    """Keep the lowest states, never splitting a degenerate multiplet."""
    labels = sorted(eigen)
    energies = np.concatenate([eigen[label].energies for label in labels])
    owners = np.concatenate(
        [np.full(len(eigen[label].energies), i) for i, label in enumerate(labels)]
    )

    order = np.lexsort((owners, energies))
    ordered = energies[order]

    k = min(kept_states, len(ordered))
    while k < len(ordered) and ordered[k] - ordered[k - 1] < DEGENERACY_TOL:
        k += 1

    counts = np.bincount(owners[order[:k]], minlength=len(labels))
    return {label: int(counts[i]) for i, label in enumerate(labels)}


def _shift(eigen: Dict[Label, _Eigen]) -> Dict[Label, _Eigen]:
    ground = min(float(e.energies[0]) for e in eigen.values() if len(e.energies))
    return {label: _Eigen(e.energies - ground, e.vectors) for label, e in eigen.items()}


def _record(
    index: int,
    config: NrgConfig,
    eigen: Dict[Label, _Eigen],
    kept: Dict[Label, int],
    correlator_full: Blocks,
) -> ShellRecord:
    return ShellRecord(
        index=index,
        temperature=config.temperature(index),
        scale=config.scale(index),
        energies={label: e.energies for label, e in eigen.items()},
        kept=dict(kept),
        correlator_diagonal={label: np.diag(m).copy() for label, m in correlator_full.items()},
        correlator={
            label: m[: kept[label], : kept[label]].copy() for label, m in correlator_full.items()
        },
    )


def _next_basis(
    eigen: Dict[Label, _Eigen],
    kept: Dict[Label, int],
    correlator_full: Blocks,
    annihilators: Dict[Tuple[str, int], Blocks],
) -> _Basis:
    return _Basis(
        energies={label: e.energies[: kept[label]] for label, e in eigen.items() if kept[label]},
        annihilators={
            key: {label: m for label, m in blocks.items() if m.size}
            for key, blocks in annihilators.items()
        },
        correlator={
            label: m[: kept[label], : kept[label]]
            for label, m in correlator_full.items()
            if kept[label]
        },
    )


def _initial(
    init: InitialShell, config: NrgConfig, executor: ThreadPoolExecutor
) -> Tuple[_Basis, ShellRecord]:
    labels = sorted(set(zip(init.charge.tolist(), init.sz2.tolist())))
    groups = {
        label: np.flatnonzero((init.charge == label[0]) & (init.sz2 == label[1]))
        for label in labels
    }

    scale = config.scale(0)
    blocks = {label: init.hamiltonian[np.ix_(idx, idx)] / scale for label, idx in groups.items()}
    eigen = _shift(_diagonalize(blocks, config, 0, executor))
    kept = _truncate(eigen, config.kept_states)

    correlator_full = {
        label: eigen[label].vectors.T @ init.correlator[np.ix_(idx, idx)] @ eigen[label].vectors
        for label, idx in groups.items()
    }

    annihilators: Dict[Tuple[str, int], Blocks] = {}
    for (channel, spin), matrix in init.annihilators.items():
        transformed = {}
        for source, idx in groups.items():
            target = _lowered(source, spin)
            if target not in groups or not kept[source] or not kept[target]:
                continue
            v_source = eigen[source].vectors[:, : kept[source]]
            v_target = eigen[target].vectors[:, : kept[target]]
            transformed[source] = v_target.T @ matrix[np.ix_(groups[target], idx)] @ v_source
        annihilators[channel, spin] = transformed

    record = _record(0, config, eigen, kept, correlator_full)
    return _next_basis(eigen, kept, correlator_full, annihilators), record


def _layout(energies: Blocks) -> Dict[Label, List[_Component]]:
    layout: Dict[Label, List[_Component]] = {}
    for state in range(4):
        for old in sorted(energies):
            size = len(energies[old])
            new = (old[0] + int(SITE_CHARGE[state]), old[1] + int(SITE_SZ2[state]))
            components = layout.setdefault(new, [])
            offset = components[-1].offset + components[-1].size if components else 0
            components.append(_Component(old, state, offset, size))
    return layout


def _span(component: _Component) -> slice:
    return slice(component.offset, component.offset + component.size)


def _dimension(components: Sequence[_Component]) -> int:
    return components[-1].offset + components[-1].size


def _block_hamiltonian(
    components: Sequence[_Component],
    basis: _Basis,
    channel: str,
    hopping: float,
    field: float,
    rescale: float,
) -> np.ndarray:
    dim = _dimension(components)
    h = np.zeros((dim, dim))
    index = {(c.label, c.state): c for c in components}

    for c in components:
        span = _span(c)
        h[span, span] = np.diag(
            rescale * basis.energies[c.label] + field * 0.5 * SITE_SZ2[c.state]
        )

    # hopping f+_old c_new between the previous and the new orbital of the channel
    for c in components:
        for spin in SPINS:
            local = site_annihilator(spin)
            for lowered in np.flatnonzero(local[:, c.state]):
                r = index.get((_raised(c.label, spin), int(lowered)))
                if r is None:
                    continue
                f = basis.annihilators[channel, spin].get(r.label)
                if f is None:
                    continue
                value = hopping * SITE_PARITY[lowered] * local[lowered, c.state] * f.T
                h[_span(r), _span(c)] += value
                h[_span(c), _span(r)] += value.T

    return h


def _site_operator(
    source: Sequence[_Component], target: Sequence[_Component], spin: int
) -> np.ndarray:
    """Annihilator of the newly added orbital between two blocks, in the product basis."""
    matrix = np.zeros((_dimension(target), _dimension(source)))
    index = {(c.label, c.state): c for c in target}
    local = site_annihilator(spin)

    for c in source:
        for lowered in np.flatnonzero(local[:, c.state]):
            r = index.get((c.label, int(lowered)))
            if r is not None:
                matrix[_span(r), _span(c)] = local[lowered, c.state] * np.eye(c.size)
    return matrix


def _carried_operator(
    source: Sequence[_Component], target: Sequence[_Component], old: Blocks, spin: int
) -> np.ndarray:
    """Annihilator of an older orbital, which anticommutes past the new one."""
    matrix = np.zeros((_dimension(target), _dimension(source)))
    index = {(c.label, c.state): c for c in target}

    for c in source:
        r = index.get((_lowered(c.label, spin), c.state))
        f = old.get(c.label)
        if r is not None and f is not None:
            matrix[_span(r), _span(c)] = SITE_PARITY[c.state] * f
    return matrix


def _add_site(
    basis: _Basis,
    channel: str,
    hopping: float,
    field: float,
    rescale: float,
    shell: int,
    config: NrgConfig,
    executor: ThreadPoolExecutor,
    operators: bool = True,
) -> Tuple[_Basis, Dict[Label, _Eigen], Dict[Label, int], Blocks]:
    layout = _layout(basis.energies)
    blocks = {
        label: _block_hamiltonian(components, basis, channel, hopping, field, rescale)
        for label, components in layout.items()
    }

    eigen = _shift(_diagonalize(blocks, config, shell, executor))
    kept = _truncate(eigen, config.kept_states)

    correlator_full = {}
    for label, components in layout.items():
        extended = scipy.linalg.block_diag(*(basis.correlator[c.label] for c in components))
        vectors = eigen[label].vectors
        correlator_full[label] = vectors.T @ extended @ vectors

    annihilators: Dict[Tuple[str, int], Blocks] = {}
    if operators:
        for other in CHANNELS:
            for spin in SPINS:
                transformed = {}
                for source, components in layout.items():
                    target = _lowered(source, spin)
                    if target not in layout or not kept[source] or not kept[target]:
                        continue
                    if other == channel:
                        matrix = _site_operator(components, layout[target], spin)
                    else:
                        matrix = _carried_operator(
                            components, layout[target], basis.annihilators[other, spin], spin
                        )
                    v_source = eigen[source].vectors[:, : kept[source]]
                    v_target = eigen[target].vectors[:, : kept[target]]
                    transformed[source] = v_target.T @ matrix @ v_source
                annihilators[other, spin] = transformed

    return _next_basis(eigen, kept, correlator_full, annihilators), eigen, kept, correlator_full


def run(
    config: NrgConfig,
    coupling: float,
    exchange: float,
    field: float = 0.0,
    impurities: bool = True,
    workers: int = 1,
) -> List[ShellRecord]:
    """
    Run the Wilson chain for the two-impurity Kondo model and return one record per shell.

    With ``impurities=False`` the bare two-channel chain is diagonalized instead; its
    entropy is subtracted to obtain impurity contributions.
    """
    values = (coupling, exchange, field)
    if not all(math.isfinite(v) for v in values):
        raise InvalidInputError(f"NRG model parameters must be finite, got {values}.")
    if impurities and not exchange > 0.0:
        raise InvalidInputError(f"The Kondo exchange must be positive, got {exchange}.")

    hoppings = wilson_chain(config)
    rescale = math.sqrt(config.discretization)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        init = initial_shell(coupling, exchange, field, impurities=impurities)
        basis, record = _initial(init, config, executor)
        records = [record]

        for n in range(1, config.chain_length):
            scale = config.scale(n)
            hop = hoppings[n - 1] / scale
            last = n == config.chain_length - 1

            basis, *_ = _add_site(
                basis, "L", hop, field / scale, rescale, n, config, executor
            )
            basis, eigen, kept, correlator_full = _add_site(
                basis, "R", hop, field / scale, 1.0, n, config, executor, operators=not last
            )
            record = _record(n, config, eigen, kept, correlator_full)
            records.append(record)

            logger.debug(
                f"shell {n}: T = {record.temperature:.4g}, kept {record.kept_count} of "
                f"{len(record.spectrum())} states in {len(record.labels)} blocks"
            )

    logger.info(
        f"NRG run finished: K = {coupling:g}, J = {exchange:g}, B = {field:g}, "
        f"{config.chain_length} shells"
    )
    return records


@functools.lru_cache(maxsize=16)
def _cached_reference(config: NrgConfig, field: float) -> Tuple[ShellRecord, ...]:
    return tuple(run(config, 0.0, 0.0, field, impurities=False))


def reference_run(config: NrgConfig, field: float = 0.0) -> List[ShellRecord]:
    """Impurity-free chain with identical discretization, cached per configuration."""
    return list(_cached_reference(config, float(field)))

