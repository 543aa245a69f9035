from pathlib import Path
from typing import List

from kondometry.command import CLICommand
from kondometry.commands.util import OPTION_KEYS, add_critical_arguments, resolve_settings
from kondometry.models.critical import CriticalConstants
from kondometry.statuscodes import ERROR, SUCCESS
from kondometry.sweep import compare_critical_vs_nrg


class CompareCommand(CLICommand):
    """
    Compare correlator derivatives from saved NRG runs at three or more couplings with the
    exact critical solution, writing both and their relative deviations to a CSV file.
    """

    usage = "kondometry compare <rundirs> [<options>]\n"

    def __init__(self):
        super(CompareCommand, self).__init__(name="compare")

    def add_arguments(self):
        # positionals
        self.parser.add_argument(
            "rundirs",
            nargs="+",
            metavar="<rundirs>",
            help="NRG run directories written by `kondometry nrg-run`, one per coupling.",
        )
        self.parser.add_argument(
            "-o",
            "--out",
            type=str,
            default=None,
            dest="output",
            metavar="<path>",
            help="Output CSV file. Defaults to <core.resultdir>/comparison.csv.",
        )
        self.parser.add_argument(
            "--T-min",
            type=float,
            default=None,
            dest="t_min",
            metavar="<T>",
            help="Lowest shell temperature to compare.",
        )
        self.parser.add_argument(
            "--T-max",
            type=float,
            default=None,
            dest="t_max",
            metavar="<T>",
            help="Highest shell temperature to compare.",
        )
        add_critical_arguments(self.parser)

    def run(self, args: List[str]) -> int:
        if not args:
            self.parser.print_help()
            return ERROR

        self.add_arguments()
        options = self.parse(args)
        settings = resolve_settings(options)

        # constants stored with the runs win unless overridden on the command line
        overridden = any(
            getattr(options, dest, None) is not None
            for dest, key in OPTION_KEYS.items()
            if key.startswith("critical.")
        )
        consts = CriticalConstants.from_config(settings) if overridden else None

        t_range = None
        if options.t_min is not None or options.t_max is not None:
            t_range = (
                options.t_min if options.t_min is not None else 0.0,
                options.t_max if options.t_max is not None else float("inf"),
            )

        output = options.output or Path(settings.get_value("core.resultdir")) / "comparison.csv"
        path = compare_critical_vs_nrg(
            options.rundirs,
            output,
            consts=consts,
            t_range=t_range,
            digits=settings.get_value("sweep.digits"),
        )
        print(f"Wrote the NRG / exact comparison to {str(path)!r}.")

        return SUCCESS
