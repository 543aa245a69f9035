import argparse
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Callable, List, Mapping, Tuple

import yaml

from kondometry.command import CLICommand
from kondometry.config import LOCAL_CONFIG, KondometryConfig
from kondometry.exceptions import InvalidInputError
from kondometry.statuscodes import ERROR, SUCCESS

ConfigSubcommand = Callable[[argparse.Namespace], int]


def _split_flags(args: List[str]) -> Tuple[List[str], List[str]]:
    flags: List[str] = []
    values: List[str] = []
    it = iter(args)
    for arg in it:
        if arg in ("-h", "--help", "-v"):
            flags.append(arg)
        elif arg == "--file":
            flags += [arg, next(it, "")]
        else:
            values.append(arg)
    return flags, values


def _load(path: str) -> KondometryConfig:
    # a missing project config means defaults
    return KondometryConfig.load(path) if Path(path).exists() else KondometryConfig()


class ConfigCommand(CLICommand):
    """Display and manipulate kondometry configuration values."""

    usage = (
        "kondometry config get <option>\n"
        "   or: kondometry config set <option> <value>\n"
        "   or: kondometry config list\n"
        "   or: kondometry config describe <option>\n"
    )

    def __init__(self):
        super().__init__(name="config")

    def add_arguments(self, subcommand: str = None):
        if subcommand != "list":
            self.parser.add_argument(
                "option",
                type=str,
                metavar="<option>",
                help=f"Config option to {subcommand}. For a comprehensive list of "
                f"options, run `kondometry config list`.",
            )

        if subcommand == "set":
            self.parser.add_argument(
                "value",
                metavar="<value>",
                help="New value to set for the chosen config option.",
            )

        self.parser.add_argument(
            "--file",
            type=str,
            default=LOCAL_CONFIG,
            dest="path",
            metavar="<path>",
            help="Configuration file to operate on instead of the project config.",
        )

    @staticmethod
    def get(options: argparse.Namespace) -> int:
        attr: str = options.option
        value = _load(options.path).get_value(attr)

        if is_dataclass(value):
            print(yaml.dump({attr: asdict(value)}))
        else:
            print(f"{attr} = {value}")

        return SUCCESS

    @staticmethod
    def set(options: argparse.Namespace) -> int:
        attr, value = str(options.option), str(options.value)

        cfg = _load(options.path)
        cfg.set_value(attr, value)
        cfg.save(options.path)

        return SUCCESS

    @staticmethod
    def list(options: argparse.Namespace) -> int:
        print(_load(options.path).to_string())

        return SUCCESS

    @staticmethod
    def describe(options: argparse.Namespace) -> int:
        attr: str = options.option

        if attr.startswith("_"):
            raise InvalidInputError(
                "Private attributes cannot be accessed via `kondometry config describe`."
            )

        _load(options.path).describe(attr)

        return SUCCESS

    def run(self, args: List[str]):
        subcommand_handlers: Mapping[str, ConfigSubcommand] = {
            "describe": self.describe,
            "get": self.get,
            "list": self.list,
            "set": self.set,
        }

        if not args or args[0] not in subcommand_handlers:
            self.parser.print_help()
            return ERROR

        subcommand, *args = args

        self.add_arguments(subcommand=subcommand)

        # double hyphen keeps negative values such as `config set critical.c_star -0.4`
        # from being read as flags
        if subcommand == "set":
            flags, values = _split_flags(args)
            options = self.parse(flags + ["--"] + values)
        else:
            options = self.parse(args)

        return subcommand_handlers[subcommand](options)
