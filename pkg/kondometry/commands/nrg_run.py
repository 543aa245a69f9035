from pathlib import Path
from typing import List

from kondometry.command import CLICommand
from kondometry.commands.util import (
    add_model_arguments,
    add_nrg_arguments,
    add_threads_argument,
    resolve_settings,
)
from kondometry.io import save_run
from kondometry.nrg import NrgConfig, flows
from kondometry.reporters import report_flow
from kondometry.statuscodes import ERROR, SUCCESS
from kondometry.sweep import resolve_threads


class NrgRunCommand(CLICommand):
    """
    Run the Wilson chain for the two-impurity Kondo model at one coupling K and save the
    shell tables and thermodynamic flows as a run directory.
    """

    usage = "kondometry nrg-run -K <K> [<options>]\n"

    def __init__(self):
        super(NrgRunCommand, self).__init__(name="nrg-run")

    def add_arguments(self):
        self.parser.add_argument(
            "-K",
            "--coupling",
            type=float,
            required=True,
            metavar="<K>",
            help="Inter-impurity exchange coupling K.",
        )
        add_model_arguments(self.parser)
        add_nrg_arguments(self.parser)
        add_threads_argument(self.parser)
        self.parser.add_argument(
            "-o",
            "--out",
            type=str,
            default=None,
            dest="output",
            metavar="<dir>",
            help="Run directory. Defaults to <core.resultdir>/nrg-K<K>-J<J>.",
        )
        self.parser.add_argument(
            "--overwrite",
            action="store_true",
            default=False,
            help="Replace an existing run in the output directory.",
        )
        self.parser.add_argument(
            "--every",
            type=int,
            default=4,
            metavar="<n>",
            help="Print every n-th shell of the flow table.",
        )

    def run(self, args: List[str]) -> int:
        if not args:
            self.parser.print_help()
            return ERROR

        self.add_arguments()
        options = self.parse(args)

        settings = resolve_settings(options)
        nrg = NrgConfig.from_config(settings)
        exchange: float = settings.get_value("sweep.exchange")
        field: float = settings.get_value("sweep.field")
        threads = resolve_threads(options.threads, settings)

        tables, shells = flows(nrg, options.coupling, exchange, field, workers=threads)

        rundir = options.output or Path(settings.get_value("core.resultdir")) / (
            f"nrg-K{options.coupling:g}-J{exchange:g}"
        )
        save_run(rundir, nrg, tables, shells, overwrite=options.overwrite)

        report_flow(tables, every=max(1, options.every))
        print(f"Saved {len(shells)} shells to {str(rundir)!r}.")

        return SUCCESS
