"""
On-disk layout of an NRG run:

    <rundir>/manifest.yaml     format, version, model parameters and NrgConfig
    <rundir>/flow.csv          per-shell T_n, S_total, S_free, S_imp and C
    <rundir>/shells/NNN.npz    block labels, kept counts and per-block arrays of one shell
"""
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from kondometry import __version__
from kondometry.exceptions import ArtifactNotFoundError, InvalidInputError
from kondometry.io.csv import CsvFileIO
from kondometry.logging import get_logger
from kondometry.models.critical import CriticalConstants
from kondometry.nrg.chain import NrgConfig
from kondometry.nrg.engine import ShellRecord
from kondometry.nrg.thermo import FlowTables

__all__ = ["ARTIFACT_FORMAT", "ARTIFACT_VERSION", "NrgRun", "load_run", "save_run"]

logger = get_logger(__name__)

ARTIFACT_FORMAT = "kondometry-nrg-run"
ARTIFACT_VERSION = 1

MANIFEST_NAME = "manifest.yaml"
FLOW_NAME = "flow.csv"
SHELL_DIR = "shells"
FLOW_COLUMNS = ("shell", "T", "S_total", "S_free", "S_imp", "C")


@dataclass(frozen=True, eq=False)
class NrgRun:
    config: NrgConfig
    tables: FlowTables
    shells: List[ShellRecord]
    constants: Optional[CriticalConstants] = None


def _shell_arrays(record: ShellRecord) -> Dict[str, np.ndarray]:
    labels = record.labels
    arrays = {
        "index": np.array(record.index),
        "temperature": np.array(record.temperature),
        "scale": np.array(record.scale),
        "labels": np.array(labels, dtype=np.int64).reshape(len(labels), 2),
        "kept": np.array([record.kept[label] for label in labels], dtype=np.int64),
    }
    for q, s in labels:
        arrays[f"energies_{q}_{s}"] = record.energies[q, s]
        arrays[f"diagonal_{q}_{s}"] = record.correlator_diagonal[q, s]
        arrays[f"correlator_{q}_{s}"] = record.correlator[q, s]
    return arrays


def _shell_record(arrays) -> ShellRecord:
    labels = [(int(q), int(s)) for q, s in arrays["labels"]]
    return ShellRecord(
        index=int(arrays["index"]),
        temperature=float(arrays["temperature"]),
        scale=float(arrays["scale"]),
        energies={(q, s): arrays[f"energies_{q}_{s}"] for q, s in labels},
        kept={label: int(n) for label, n in zip(labels, arrays["kept"])},
        correlator_diagonal={(q, s): arrays[f"diagonal_{q}_{s}"] for q, s in labels},
        correlator={(q, s): arrays[f"correlator_{q}_{s}"] for q, s in labels},
    )


def save_run(
    rundir: Union[str, Path],
    config: NrgConfig,
    tables: FlowTables,
    shells: List[ShellRecord],
    constants: Optional[CriticalConstants] = None,
    overwrite: bool = False,
) -> Path:
    rundir = Path(rundir)
    manifest_path = rundir / MANIFEST_NAME
    if manifest_path.exists() and not overwrite:
        raise InvalidInputError(f"NRG run directory {str(rundir)!r} already holds a run.")

    shell_dir = rundir / SHELL_DIR
    shell_dir.mkdir(parents=True, exist_ok=True)
    for record in shells:
        np.savez(shell_dir / f"{record.index:03d}.npz", **_shell_arrays(record))

    # 17 digits round-trip doubles exactly
    CsvFileIO(digits=17).write(
        rundir / FLOW_NAME,
        FLOW_COLUMNS,
        zip(
            tables.shells.tolist(),
            tables.temperatures,
            tables.entropy,
            tables.free_entropy,
            tables.impurity_entropy,
            tables.correlator,
        ),
        kind="flow",
    )

    manifest: Dict[str, Any] = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "kondometry": __version__,
        "coupling": float(tables.coupling),
        "exchange": float(tables.exchange),
        "field": float(tables.field),
        "shells": len(shells),
        "nrg": config.to_dict(),
    }
    if constants is not None:
        manifest["constants"] = asdict(constants)

    # the manifest goes last so that an interrupted save leaves no loadable run behind
    with open(manifest_path, "w") as manifest_file:
        yaml.dump(manifest, manifest_file)

    logger.info(f"Saved NRG run with {len(shells)} shells to {str(rundir)!r}.")
    return rundir


def load_run(rundir: Union[str, Path], shells: bool = True) -> NrgRun:
    rundir = Path(rundir)
    manifest_path = rundir / MANIFEST_NAME
    if not manifest_path.exists():
        raise ArtifactNotFoundError(f"No NRG run found in {str(rundir)!r}.")

    with open(manifest_path, "r") as manifest_file:
        manifest = yaml.load(manifest_file, Loader=yaml.FullLoader)

    if manifest.get("format") != ARTIFACT_FORMAT:
        raise InvalidInputError(f"{str(manifest_path)!r} does not describe a kondometry NRG run.")
    if manifest.get("version") != ARTIFACT_VERSION:
        raise InvalidInputError(
            f"NRG run version {manifest.get('version')!r} is not supported "
            f"(expected {ARTIFACT_VERSION})."
        )

    _, rows = CsvFileIO(digits=17).read(rundir / FLOW_NAME, kind="flow")
    tables = FlowTables(
        coupling=manifest["coupling"],
        exchange=manifest["exchange"],
        field=manifest["field"],
        shells=np.array([int(row["shell"]) for row in rows]),
        temperatures=np.array([row["T"] for row in rows]),
        entropy=np.array([row["S_total"] for row in rows]),
        free_entropy=np.array([row["S_free"] for row in rows]),
        correlator=np.array([row["C"] for row in rows]),
    )

    records = []
    if shells:
        for index in range(manifest["shells"]):
            path = rundir / SHELL_DIR / f"{index:03d}.npz"
            if not path.exists():
                raise ArtifactNotFoundError(f"Shell table {str(path)!r} is missing.")
            with np.load(path) as arrays:
                records.append(_shell_record(arrays))

    constants = manifest.get("constants")
    return NrgRun(
        config=NrgConfig(**manifest["nrg"]),
        tables=tables,
        shells=records,
        constants=CriticalConstants(**constants) if constants else None,
    )
