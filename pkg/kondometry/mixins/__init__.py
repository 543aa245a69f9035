# flake8: noqa: F401
from .state import NestedStateMixin
