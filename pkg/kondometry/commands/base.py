from typing import List

from kondometry import __version__
from kondometry.command import CLICommand
from kondometry.statuscodes import ERROR, SUCCESS


class BaseCommand(CLICommand):
    """
    Commands:

    sweep       - Evaluate QFIM and QSNR columns on a (T, K) grid for one backend.
    critical    - Tabulate the exact critical solution on a (T, dK) grid.
    nrg-run     - Run the Wilson chain at one coupling and save the run.
    nrg-tk      - Estimate the Kondo temperature from the decoupled flow.
    nrg-tune-kc - Locate the critical coupling and extract critical constants.
    compare     - Compare saved NRG runs against the critical solution.
    config      - Display and change kondometry configuration values.
    """

    usage = "kondometry <command> [<options>]"

    def __init__(self):
        super(BaseCommand, self).__init__(name="")

    def add_arguments(self):
        # special version action and version kwarg
        self.parser.add_argument(
            "--version",
            action="version",
            help="Show kondometry version and exit.",
            version=f"%(prog)s version {__version__}",
        )

    def run(self, args: List[str]):
        self.add_arguments()

        if not args:
            self.parser.print_help()
            return ERROR

        options = self.parse(args)

        if options.verbose:
            print(vars(options))

        return SUCCESS
