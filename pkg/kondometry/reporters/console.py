from typing import Dict, Iterable, List, Sequence

from kondometry.models import SweepRow
from kondometry.nrg import FlowTables

# sweep columns summarized after every run
SUMMARY_COLUMNS = ("Q_SP_T", "Q_SP_K", "Q_MP_TT", "Q_MP_KK", "H_TT", "H_KK")


def format_floating(value: float, digits: int) -> str:
    # significant digits, not decimals: QSNRs span many decades
    return f"{value:.{digits}g}"


def _table_lines(header: Sequence[str], body: Sequence[Sequence[str]], padding: int) -> List[str]:
    widths = [max(len(cell) for cell in column) for column in zip(header, *body)]
    pad = " " * padding

    def line(cells: Iterable[str]) -> str:
        inner = f"{pad}|{pad}".join(f"{c:<{w}}" for c, w in zip(cells, widths))
        return f"|{pad}{inner}{pad}|"

    separator = "|" + "+".join("-" * (w + 2 * padding) for w in widths) + "|"
    return [line(header), separator] + [line(cells) for cells in body]


def log_to_console(results: List[Dict[str, str]], padding: int = 1):
    if not results:
        return

    header = list(results[0])
    for text in _table_lines(header, [list(r.values()) for r in results], padding):
        print(text)


def summarize_sweep(rows: Sequence[SweepRow], digits: int = 4) -> List[Dict[str, str]]:
    summary = []
    for column in SUMMARY_COLUMNS:
        best = max(rows, key=lambda r: getattr(r, column))
        summary.append(
            {
                "Column": column,
                "Maximum": format_floating(getattr(best, column), digits),
                "T": format_floating(best.T, digits),
                "K": format_floating(best.K, digits),
            }
        )
    return summary


def report_sweep(rows: Sequence[SweepRow], digits: int = 4, padding: int = 1):
    if not rows:
        print("Sweep produced no rows.")
        return

    singular = sum(1 for r in rows if r.singular_flag)
    print(f"{len(rows)} grid points, {singular} with a singular QFIM.")
    log_to_console(summarize_sweep(rows, digits), padding=padding)


def report_flow(tables: FlowTables, digits: int = 4, every: int = 1, padding: int = 1):
    """Per-shell temperature, impurity entropy and correlator of one NRG run."""
    s_imp = tables.impurity_entropy
    last = len(tables) - 1
    results = [
        {
            "Shell": str(int(tables.shells[i])),
            "T": format_floating(tables.temperatures[i], digits),
            "S_imp": format_floating(s_imp[i], digits),
            "C": format_floating(tables.correlator[i], digits),
        }
        for i in range(len(tables))
        if i % every == 0 or i == last
    ]
    log_to_console(results, padding=padding)
