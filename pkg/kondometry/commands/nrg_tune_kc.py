from pathlib import Path
from typing import List

from kondometry.command import CLICommand
from kondometry.commands.util import (
    add_model_arguments,
    add_nrg_arguments,
    add_threads_argument,
    resolve_settings,
)
from kondometry.config import LOCAL_CONFIG, KondometryConfig
from kondometry.io import save_run
from kondometry.nrg import NrgConfig, extract_critical_constants, flows, tune_kc
from kondometry.statuscodes import SUCCESS
from kondometry.sweep import resolve_threads


class NrgTuneKcCommand(CLICommand):
    """
    Locate the critical coupling K_c by bisection on the phase the NRG flow ends in. With
    --constants, also extract T_K, c and C* of the critical solution.
    """

    usage = "kondometry nrg-tune-kc [--bracket <lo> <hi>] [<options>]\n"

    def __init__(self):
        super(NrgTuneKcCommand, self).__init__(name="nrg-tune-kc")

    def add_arguments(self):
        add_model_arguments(self.parser, field=False)
        self.parser.add_argument(
            "--bracket",
            type=float,
            nargs=2,
            default=None,
            metavar=("<lo>", "<hi>"),
            help="Couplings flowing to the Kondo and the local-singlet phase. Defaults to "
            "[0, 2 J].",
        )
        self.parser.add_argument(
            "--constants",
            action="store_true",
            default=False,
            help="Extract the constants of the critical solution from the tuned flow.",
        )
        self.parser.add_argument(
            "--save-config",
            action="store_true",
            default=False,
            help="Write the extracted constants to the critical section of the project "
            "configuration. Implies --constants.",
        )
        self.parser.add_argument(
            "-o",
            "--out",
            type=str,
            default=None,
            dest="output",
            metavar="<dir>",
            help="Save the run at the tuned K_c, with any extracted constants, to this "
            "directory.",
        )
        add_nrg_arguments(self.parser)
        add_threads_argument(self.parser)

    def run(self, args: List[str]) -> int:
        self.add_arguments()
        options = self.parse(args)

        settings = resolve_settings(options)
        nrg = NrgConfig.from_config(settings)
        exchange: float = settings.get_value("sweep.exchange")
        workers = resolve_threads(options.threads, settings)

        bracket = tuple(options.bracket) if options.bracket else None
        result = tune_kc(exchange, nrg, bracket=bracket, workers=workers)
        print(
            f"K_c(J = {exchange:g}) = {result.k_c:.10g} "
            f"in [{result.lower:.10g}, {result.upper:.10g}]"
        )

        consts = None
        if options.constants or options.save_config:
            consts = extract_critical_constants(exchange, nrg, workers=workers, kc=result)
            print(
                f"T_K = {consts.t_k:.6g}, c = {consts.c:.4g}, C* = {consts.c_star:.4f}, "
                f"K_c / T_K = {consts.k_c / consts.t_k:.4g}"
            )

        if consts is not None and options.save_config:
            project = KondometryConfig.load() if Path(LOCAL_CONFIG).exists() else KondometryConfig()
            for name in ("k_c", "t_k", "c", "c_star"):
                project.set_value(f"critical.{name}", getattr(consts, name))
            project.save()
            print(f"Stored the critical constants in {LOCAL_CONFIG!r}.")

        if options.output:
            tables, shells = flows(nrg, result.k_c, exchange, workers=workers)
            save_run(options.output, nrg, tables, shells, constants=consts)
            print(f"Saved the K_c run to {options.output!r}.")

        return SUCCESS
