from .base import BaseCommand
from .compare import CompareCommand
from .config import ConfigCommand
from .critical import CriticalCommand
from .nrg_run import NrgRunCommand
from .nrg_tk import NrgTkCommand
from .nrg_tune_kc import NrgTuneKcCommand
from .sweep import SweepCommand

command_db = {
    "": BaseCommand,
    "compare": CompareCommand,
    "config": ConfigCommand,
    "critical": CriticalCommand,
    "nrg-run": NrgRunCommand,
    "nrg-tk": NrgTkCommand,
    "nrg-tune-kc": NrgTuneKcCommand,
    "sweep": SweepCommand,
}
