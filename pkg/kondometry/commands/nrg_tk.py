from typing import List

from kondometry.command import CLICommand
from kondometry.commands.util import (
    add_model_arguments,
    add_nrg_arguments,
    add_threads_argument,
    resolve_settings,
)
from kondometry.nrg import NrgConfig, estimate_tk
from kondometry.statuscodes import SUCCESS
from kondometry.sweep import resolve_threads


class NrgTkCommand(CLICommand):
    """
    Estimate the Kondo temperature T_K from the decoupled (K = 0) NRG flow.
    """

    usage = "kondometry nrg-tk [<options>]\n"

    def __init__(self):
        super(NrgTkCommand, self).__init__(name="nrg-tk")

    def add_arguments(self):
        add_model_arguments(self.parser, field=False)
        add_nrg_arguments(self.parser)
        add_threads_argument(self.parser)

    def run(self, args: List[str]) -> int:
        self.add_arguments()
        options = self.parse(args)

        settings = resolve_settings(options)
        exchange: float = settings.get_value("sweep.exchange")
        tk = estimate_tk(
            exchange,
            NrgConfig.from_config(settings),
            workers=resolve_threads(options.threads, settings),
        )
        print(f"T_K(J = {exchange:g}) = {tk:.6g}")

        return SUCCESS
