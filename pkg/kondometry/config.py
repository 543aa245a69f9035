import itertools
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, MutableMapping, Optional, Union

import yaml

from kondometry.exceptions import InvalidInputError
from kondometry.mixins.state import NestedStateMixin, coerce

__all__ = [
    "KondometryConfig",
    "config",
    "description_db",
    "LOCAL_CONFIG",
]

CONFIG_NAME = "config.yaml"
LOCAL_CONFIG = str(Path.cwd() / ".kondometry" / CONFIG_NAME)


@dataclass
class CoreGroup:
    logfile: str = ""
    logfmt: str = "%(levelname)-8s [%(filename)s:%(lineno)d] %(message)s"
    loglevel: int = logging.WARNING
    resultdir: str = "results"
    threads: int = 0


@dataclass
class SweepGroup:
    backend: str = "large-k"
    exchange: float = 1.0
    field: float = 0.0
    unknowns: str = "T,K"
    digits: int = 12


@dataclass
class CriticalGroup:
    k_c: float = 0.618
    t_k: float = 0.362
    c: float = 0.035
    c_star: float = -0.385


@dataclass
class NrgGroup:
    discretization: float = 3.0
    kept_states: int = 1500
    chain_length: int = 50
    band_halfwidth: float = 1.0
    temperature_prefactor: float = 0.5
    memory_budget: int = 2048


@dataclass
class KondometryConfig(NestedStateMixin):
    core: CoreGroup = field(default_factory=CoreGroup)
    sweep: SweepGroup = field(default_factory=SweepGroup)
    critical: CriticalGroup = field(default_factory=CriticalGroup)
    nrg: NrgGroup = field(default_factory=NrgGroup)

    def describe(self, attr: str):
        current = self.get_value(attr)
        group, name = attr.split(".")
        value_type = type(current).__name__

        print(f"Describing configuration option {attr!r}.")
        print(f"Value type: {value_type}")
        print(f"Current value: {current!r}")
        print(description_db[group][name])

    @classmethod
    def from_dict(cls, config_obj: Optional[Mapping[str, Any]] = None):
        config_obj = config_obj or {}
        unknown = set(config_obj) - {f.name for f in fields(cls)}
        if unknown:
            raise InvalidInputError(f"Unknown config section(s): {', '.join(sorted(unknown))}.")

        init_dict = {}
        for group_field in fields(cls):
            group = group_field.default_factory()  # type: ignore
            values = config_obj.get(group_field.name) or {}
            types = {f.name: f.type for f in fields(group)}

            for key, value in values.items():
                if key not in types:
                    raise InvalidInputError(
                        f"Unknown config option {group_field.name + '.' + key!r}."
                    )
                setattr(group, key, coerce(value, types[key]))

            init_dict[group_field.name] = group

        return cls(**init_dict)

    def overlay(self, config_obj: Optional[Mapping[str, Any]]) -> "KondometryConfig":
        """Return a copy with the given sections layered on top of this config."""
        merged = self.to_dict()
        for section, values in (config_obj or {}).items():
            merged.setdefault(section, {}).update(values or {})
        return self.from_dict(merged)

    def items(self):
        return zip(self.keys(), self.values())

    def keys(self):
        def prepend_key(key: str, values: Iterable[str]):
            return map(lambda value: key + "." + value, values)

        return itertools.chain(
            *(prepend_key(k, asdict(v).keys()) for k, v in self.__dict__.items())
        )

    @classmethod
    def load(cls, path: Union[str, Path] = LOCAL_CONFIG):
        path = Path(path)

        if not path.exists():
            raise InvalidInputError(f"Configuration file {str(path)!r} does not exist.")

        with open(path, "r") as config_file:
            config_obj = yaml.load(config_file, Loader=yaml.FullLoader)

        return cls.from_dict(config_obj)

    def save(self, path: Union[str, Path] = LOCAL_CONFIG):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as config_file:
            yaml.dump(self.to_dict(), config_file)

    def to_dict(self) -> MutableMapping[str, Any]:
        return {k: asdict(v) for k, v in self.__dict__.items()}

    def to_string(self):
        return yaml.dump(self.to_dict())

    def values(self):
        return itertools.chain(*(asdict(v).values() for v in self.__dict__.values()))


if Path(LOCAL_CONFIG).exists():
    config = KondometryConfig.load()
else:
    config = KondometryConfig()


description_db: Dict[str, Dict[str, str]] = {
    "core": {
        "logfile": "Name of the log file to write logs to. Leave empty to log to "
        "standard error.",
        "logfmt": "Formatter string used to format logs. For a comprehensive list of "
        "identifiers and options, check the Python standard library documentation on "
        "logging formatters: "
        "https://docs.python.org/3/library/logging.html#formatter-objects.",
        "loglevel": "Default level used for logging. Passing -v to any command lowers "
        "it to DEBUG.",
        "resultdir": "Directory under which NRG run artifacts are stored when no "
        "explicit output directory is given.",
        "threads": "Number of worker processes for sweeps. 0 uses all available cores. "
        "The KONDOMETRY_THREADS environment variable and the --threads flag take "
        "precedence, in that order.",
    },
    "sweep": {
        "backend": "Backend used for sweeps. Valid options are large-k, nbl, critical "
        "and nrg.",
        "exchange": "Kondo exchange coupling J. The narrow band backend uses J = 1 as "
        "its energy unit by default.",
        "field": "Control field B applied along z to the impurity spins (and to the "
        "bath spins in the narrow band and NRG backends).",
        "unknowns": "Comma-separated set of unknown parameters, a subset of T,K.",
        "digits": "Number of significant digits written to CSV files.",
    },
    "critical": {
        "k_c": "Critical inter-impurity coupling K_c.",
        "t_k": "Kondo temperature T_K, defined through S(T_K) = ln 2.",
        "c": "Dimensionless constant in T*/T_K = c (dK/T_K)^2.",
        "c_star": "Critical spin-spin correlator C*.",
    },
    "nrg": {
        "discretization": "Logarithmic discretization parameter Lambda, in (1, 10].",
        "kept_states": "Number of states kept after each diagonalization (at least 100).",
        "chain_length": "Number of Wilson shells (at least 10).",
        "band_halfwidth": "Conduction band half-width D used for the Wilson chain.",
        "temperature_prefactor": "Dimensionless w in T_n = w D Lambda^(-(n-1)/2).",
        "memory_budget": "Memory in MiB allowed for a single block eigensolve. Larger "
        "blocks abort the run with a resource error.",
    },
}
