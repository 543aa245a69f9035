# flake8: noqa: F401
from .artifacts import NrgRun, load_run, save_run
from .csv import CsvFileIO, format_value
