import os
import sys
from typing import Dict, List, Optional, Type

from kondometry.command import CLICommand
from kondometry.commands import command_db
from kondometry.exceptions import CommandError
from kondometry.statuscodes import ERROR

error_origins: Dict[Type[Exception], str] = {
    CommandError: "kondometry",
}

# CLI flag prefix for kondometry
prefix = "-"


def main(args: Optional[List[str]] = None) -> int:
    # first element of sys.argv is absolute script path
    args = sys.argv[1:] if args is None else args

    if not args or args[0].startswith(prefix):
        command = ""
    else:
        command, *args = args

    try:
        if command not in command_db:
            raise CommandError(
                f"Unknown command {command!r}. Available commands are: "
                f"{', '.join(c for c in command_db if c)}."
            )

        cmd: CLICommand = command_db[command]()
        return cmd.run_wrapped(args)
    except Exception as e:
        origin = error_origins.get(type(e), "python")
        sys.stderr.write(f"{origin}: {e}")
        sys.stderr.write(os.linesep)
        return ERROR
