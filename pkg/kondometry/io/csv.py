import csv
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from kondometry import __version__
from kondometry.exceptions import ArtifactNotFoundError, InvalidInputError

__all__ = ["CSV_VERSION", "CsvFileIO", "format_value"]

CSV_VERSION = 1
# first line of every table: "# kondometry <kind> v<version> (<package version>)"
_HEADER_PREFIX = "# kondometry"


def format_value(value: Any, digits: int = 12) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return f"{value:.{digits}g}"
    return str(value)


def _parse_value(text: str) -> Union[bool, float, str]:
    if text in ("true", "false"):
        return text == "true"
    try:
        return float(text)
    except ValueError:
        return text


class CsvFileIO:
    """Versioned CSV tables with fixed formatting, so identical inputs give identical bytes."""

    def __init__(self, digits: int = 12):
        if not 1 <= digits <= 17:
            raise InvalidInputError(f"Significant digits must lie in [1, 17], got {digits}.")
        self.digits = digits

    def write(
        self,
        path: Union[str, Path],
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
        kind: str = "sweep",
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)

        with open(path, "w", newline="") as csvfile:
            csvfile.write(f"{_HEADER_PREFIX} {kind} v{CSV_VERSION} ({__version__})\n")
            writer = csv.writer(csvfile, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                if len(row) != len(columns):
                    raise InvalidInputError(
                        f"Row has {len(row)} values for {len(columns)} columns."
                    )
                writer.writerow([format_value(v, self.digits) for v in row])

        return path

    def read(
        self, path: Union[str, Path], kind: Optional[str] = None
    ) -> Tuple[List[str], List[Dict[str, Any]]]:
        path = Path(path)
        if not path.exists():
            raise ArtifactNotFoundError(f"Table {str(path)!r} does not exist.")

        with open(path, "r", newline="") as csvfile:
            version_line = csvfile.readline().strip()
            parts = version_line.split()
            if len(parts) < 4 or not version_line.startswith(_HEADER_PREFIX):
                raise InvalidInputError(f"{str(path)!r} is missing the kondometry table header.")

            file_kind, version = parts[2], parts[3]
            if version != f"v{CSV_VERSION}":
                raise InvalidInputError(
                    f"{str(path)!r} has table version {version}, expected v{CSV_VERSION}."
                )
            if kind is not None and file_kind != kind:
                raise InvalidInputError(f"{str(path)!r} holds a {file_kind!r} table, not {kind!r}.")

            reader = csv.reader(csvfile)
            columns = next(reader)
            rows = [dict(zip(columns, map(_parse_value, row))) for row in reader if row]

        return columns, rows
