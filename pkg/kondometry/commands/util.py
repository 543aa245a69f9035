import argparse
from typing import Any, Dict, Mapping, Optional

from kondometry.config import KondometryConfig, config
from kondometry.sweep import GridRange

# argparse destination -> dotted config key
OPTION_KEYS = {
    "backend": "sweep.backend",
    "exchange": "sweep.exchange",
    "field": "sweep.field",
    "unknowns": "sweep.unknowns",
    "digits": "sweep.digits",
    "k_c": "critical.k_c",
    "t_k": "critical.t_k",
    "c": "critical.c",
    "c_star": "critical.c_star",
    "discretization": "nrg.discretization",
    "kept_states": "nrg.kept_states",
    "chain_length": "nrg.chain_length",
    "band_halfwidth": "nrg.band_halfwidth",
    "temperature_prefactor": "nrg.temperature_prefactor",
    "memory_budget": "nrg.memory_budget",
}
CONFIG_SECTIONS = ("core", "sweep", "critical", "nrg")


def add_model_arguments(parser: argparse.ArgumentParser, field: bool = True):
    parser.add_argument(
        "-J",
        "--exchange",
        type=float,
        default=None,
        metavar="<J>",
        help="Kondo exchange J of each impurity with its lead. Defaults to sweep.exchange.",
    )
    if field:
        parser.add_argument(
            "-B",
            "--field",
            type=float,
            default=None,
            metavar="<B>",
            help="Control field B acting on impurity and conduction spins. Defaults to "
            "sweep.field.",
        )


def add_critical_arguments(parser: argparse.ArgumentParser):
    for flag, dest, name in (
        ("--k-c", "k_c", "critical coupling K_c"),
        ("--t-k", "t_k", "Kondo temperature T_K"),
        ("--crossover", "c", "crossover constant c in T* = c dK^2 / T_K"),
        ("--c-star", "c_star", "critical correlator C*"),
    ):
        parser.add_argument(
            flag,
            type=float,
            default=None,
            dest=dest,
            metavar="<value>",
            help=f"Override the {name} of the critical solution.",
        )


def add_nrg_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--lambda",
        type=float,
        default=None,
        dest="discretization",
        metavar="<L>",
        help="Logarithmic discretization parameter, in (1, 10].",
    )
    parser.add_argument(
        "--kept-states",
        type=int,
        default=None,
        metavar="<N>",
        help="Number of states kept after each truncation (at least 100).",
    )
    parser.add_argument(
        "--chain-length",
        type=int,
        default=None,
        metavar="<N>",
        help="Number of Wilson shells (at least 10).",
    )
    parser.add_argument(
        "-D",
        "--band-halfwidth",
        type=float,
        default=None,
        dest="band_halfwidth",
        metavar="<D>",
        help="Conduction band half-width D of the Wilson chain. Defaults to "
        "nrg.band_halfwidth.",
    )
    parser.add_argument(
        "--prefactor",
        type=float,
        default=None,
        dest="temperature_prefactor",
        metavar="<w>",
        help="Prefactor w of the shell temperatures T_n = w D Lambda^(-(n-1)/2).",
    )
    parser.add_argument(
        "--memory-budget",
        type=int,
        default=None,
        metavar="<MiB>",
        help="Memory in MiB allowed for a single block eigensolve.",
    )


def add_threads_argument(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        metavar="<N>",
        help="Number of workers. Falls back to KONDOMETRY_THREADS, then core.threads, then "
        "the number of available cores.",
    )


def parse_range(text: str) -> GridRange:
    return GridRange.parse(text)


def resolve_settings(
    options: argparse.Namespace, experiment: Optional[Mapping[str, Any]] = None
) -> KondometryConfig:
    """Flags override the experiment file, which overrides the project configuration."""
    sections: Dict[str, Any] = {
        name: section for name, section in (experiment or {}).items() if name in CONFIG_SECTIONS
    }
    settings = config.overlay(sections)

    for dest, key in OPTION_KEYS.items():
        value = getattr(options, dest, None)
        if value is not None:
            settings.set_value(key, value)

    return settings
