from pathlib import Path
from typing import Any, Dict, List

from kondometry.backends import backends
from kondometry.command import CLICommand
from kondometry.commands.util import (
    add_critical_arguments,
    add_model_arguments,
    add_nrg_arguments,
    add_threads_argument,
    parse_range,
    resolve_settings,
)
from kondometry.exceptions import InvalidInputError
from kondometry.reporters import report_sweep
from kondometry.statuscodes import ERROR, SUCCESS
from kondometry.sweep import GridRange, SweepConfig, load_experiment, run_sweep


class SweepCommand(CLICommand):
    """
    Evaluate probe observables, QFIM elements and QSNRs on a (T, K) grid and write them to a
    CSV file, one row per grid point in K-major order.
    """

    usage = "kondometry sweep [<options>]\n"

    def __init__(self):
        super(SweepCommand, self).__init__(name="sweep")

    def add_arguments(self):
        self.parser.add_argument(
            "-e",
            "--experiment",
            type=str,
            default=None,
            metavar="<file>",
            help="YAML experiment file with backend, grid, output and config sections. "
            "Command line flags take precedence over its values.",
        )
        self.parser.add_argument(
            "--backend",
            type=str,
            default=None,
            choices=list(backends),
            help="Physical model used to fill the grid. Defaults to sweep.backend.",
        )
        self.parser.add_argument(
            "-T",
            "--temperatures",
            type=parse_range,
            default=None,
            metavar="<min:max:count[:log]>",
            help="Temperature grid.",
        )
        self.parser.add_argument(
            "-K",
            "--couplings",
            type=parse_range,
            default=None,
            metavar="<min:max:count[:log]>",
            help="Inter-impurity coupling grid.",
        )
        add_model_arguments(self.parser)
        self.parser.add_argument(
            "-u",
            "--unknowns",
            type=str,
            default=None,
            metavar="<T,K>",
            help="Comma-separated parameters estimated simultaneously in the Q_MP columns.",
        )
        self.parser.add_argument(
            "-o",
            "--out",
            type=str,
            default=None,
            dest="output",
            metavar="<path>",
            help="Output CSV file. Defaults to <core.resultdir>/sweep-<backend>.csv.",
        )
        self.parser.add_argument(
            "--maxima",
            type=str,
            default=None,
            metavar="<path>",
            help="Also write the maximum over T of Q_SP(T) and Q_SP(K) for every K.",
        )
        self.parser.add_argument(
            "--digits",
            type=int,
            default=None,
            help="Significant digits of numbers in the CSV output.",
        )
        add_threads_argument(self.parser)
        add_critical_arguments(self.parser)
        add_nrg_arguments(self.parser)

    @staticmethod
    def _grid(options_value, experiment: Dict[str, Any], name: str) -> GridRange:
        if options_value is not None:
            return options_value
        grid = experiment.get("grid") or {}
        if name not in grid:
            raise InvalidInputError(
                f"No {name} grid given; pass it on the command line or in the experiment file."
            )
        return GridRange.from_dict(grid[name])

    def run(self, args: List[str]) -> int:
        if not args:
            self.parser.print_help()
            return ERROR

        self.add_arguments()
        options = self.parse(args)

        experiment = load_experiment(options.experiment) if options.experiment else {}
        if options.backend is None and "backend" in experiment:
            options.backend = experiment["backend"]

        settings = resolve_settings(options, experiment)
        backend: str = settings.get_value("sweep.backend")
        resultdir = Path(settings.get_value("core.resultdir"))

        output = options.output or experiment.get("output") or resultdir / f"sweep-{backend}.csv"
        maxima = options.maxima or experiment.get("maxima")
        threads = options.threads if options.threads is not None else experiment.get("threads")

        cfg = SweepConfig(
            backend=backend,
            temperatures=self._grid(options.temperatures, experiment, "T"),
            couplings=self._grid(options.couplings, experiment, "K"),
            output=Path(output),
            settings=settings,
            maxima=Path(maxima) if maxima else None,
            threads=threads,
        )

        result = run_sweep(cfg)

        print(f"Wrote {len(result.rows)} rows to {str(result.output)!r}.")
        if result.maxima is not None:
            print(f"Wrote per-coupling maxima to {str(result.maxima)!r}.")
        report_sweep(result.rows)

        return SUCCESS
