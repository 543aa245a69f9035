# flake8: noqa: F401
from .base import BaseBackend, GridPoint, SweepRow, assemble_row, parse_unknowns
from .critical import CriticalBackend, CriticalConstants
from .large_k import LargeKBackend
from .narrow_band import NarrowBandBackend
