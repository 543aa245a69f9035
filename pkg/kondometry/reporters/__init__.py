# flake8: noqa: F401
from .console import log_to_console, report_flow, report_sweep, summarize_sweep
