# flake8: noqa: F401
from typing import Dict, Type

from kondometry.exceptions import InvalidInputError
from kondometry.models import BaseBackend, CriticalBackend, LargeKBackend, NarrowBandBackend
from kondometry.nrg import NrgBackend

backends: Dict[str, Type[BaseBackend]] = {
    "large-k": LargeKBackend,
    "nbl": NarrowBandBackend,
    "critical": CriticalBackend,
    "nrg": NrgBackend,
}


def get_backend_class(name: str) -> Type[BaseBackend]:
    if name not in backends:
        raise InvalidInputError(
            f"Unknown backend {name!r}. Available backends are: {', '.join(backends)}."
        )
    return backends[name]
