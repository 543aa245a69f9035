from pathlib import Path
from typing import List

from kondometry.command import CLICommand
from kondometry.commands.util import add_critical_arguments, parse_range, resolve_settings
from kondometry.exceptions import InvalidInputError
from kondometry.io import CsvFileIO
from kondometry.models.critical import (
    CriticalConstants,
    fit_coupling_asymptote,
    fit_thermometry_asymptote,
)
from kondometry.statuscodes import ERROR, SUCCESS
from kondometry.sweep import CRITICAL_COLUMNS, GridRange, critical_rows, load_experiment


class CriticalCommand(CLICommand):
    """
    Evaluate the exact critical solution on a (T, dK) grid: entropy, correlator, its
    derivatives and the single-parameter QSNRs, with dK = K - K_c.
    """

    usage = "kondometry critical -T <range> --dK <range> [<options>]\n"

    def __init__(self):
        super(CriticalCommand, self).__init__(name="critical")

    def add_arguments(self):
        self.parser.add_argument(
            "-e",
            "--experiment",
            type=str,
            default=None,
            metavar="<file>",
            help="YAML experiment file; only its critical section and grid are used.",
        )
        self.parser.add_argument(
            "-T",
            "--temperatures",
            type=parse_range,
            default=None,
            metavar="<min:max:count[:log]>",
            help="Temperature grid, in band units.",
        )
        self.parser.add_argument(
            "--dK",
            type=parse_range,
            default=None,
            dest="detunings",
            metavar="<min:max:count[:log]>",
            help="Detuning grid dK = K - K_c, in band units.",
        )
        self.parser.add_argument(
            "-o",
            "--out",
            type=str,
            default=None,
            dest="output",
            metavar="<path>",
            help="Output CSV file. Defaults to <core.resultdir>/critical.csv.",
        )
        self.parser.add_argument(
            "--fit",
            action="store_true",
            default=False,
            help="Fit the low-temperature asymptotes of Q_SP(T) and Q_SP(K) on the grid and "
            "print their parameters.",
        )
        add_critical_arguments(self.parser)

    def run(self, args: List[str]) -> int:
        if not args:
            self.parser.print_help()
            return ERROR

        self.add_arguments()
        options = self.parse(args)

        experiment = load_experiment(options.experiment) if options.experiment else {}
        settings = resolve_settings(options, experiment)
        consts = CriticalConstants.from_config(settings)

        grid = experiment.get("grid") or {}
        if options.temperatures is None and "T" in grid:
            options.temperatures = GridRange.from_dict(grid["T"])
        if options.detunings is None and "dK" in grid:
            options.detunings = GridRange.from_dict(grid["dK"])
        if options.temperatures is None or options.detunings is None:
            raise InvalidInputError("Both a temperature grid and a detuning grid are required.")

        temperatures = options.temperatures.values()
        detunings = options.detunings.values()

        output = options.output or Path(settings.get_value("core.resultdir")) / "critical.csv"
        rows = critical_rows(consts, temperatures, detunings)
        path = CsvFileIO(digits=settings.get_value("sweep.digits")).write(
            output, CRITICAL_COLUMNS, rows, kind="critical"
        )
        print(f"Wrote {len(rows)} rows to {str(path)!r}.")

        if options.fit:
            nonzero = detunings[detunings != 0.0]
            thermometry = fit_thermometry_asymptote(consts, temperatures, nonzero)
            coupling = fit_coupling_asymptote(consts, temperatures, detunings)
            print(
                f"Q_SP(T) ~ A T^4 dK^2 / (a dK^8 + T^4): "
                f"A = {thermometry.amplitude:.4g}, a = {thermometry.scale:.4g}"
            )
            print(
                f"Q_SP(K) ~ A log^2(b T + dK^2):         "
                f"A = {coupling.amplitude:.4g}, b = {coupling.scale:.4g}"
            )

        return SUCCESS
