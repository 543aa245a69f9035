from dataclasses import fields, is_dataclass
from typing import Any

from kondometry.exceptions import InvalidInputError

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def coerce(value: Any, target: type) -> Any:
    """Convert a (possibly textual) config value to the annotated field type."""
    if isinstance(value, target) and not (target is int and isinstance(value, bool)):
        return value

    if target is bool:
        text = str(value).strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise InvalidInputError(f"Cannot interpret {value!r} as a boolean.")

    try:
        return target(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"Cannot interpret {value!r} as {target.__name__}.")


class NestedStateMixin:
    """Dotted-path access ("group.option") for nested dataclass state."""

    def _resolve(self, attr: str):
        group, _, name = attr.partition(".")
        if not name or "." in name:
            raise InvalidInputError(
                f"Config options are given as <group>.<option>, got {attr!r}."
            )

        obj = getattr(self, group, None)
        if obj is None or not is_dataclass(obj):
            raise InvalidInputError(f"Unknown config group {group!r}.")

        types = {f.name: f.type for f in fields(obj)}
        if name not in types:
            raise InvalidInputError(f"Unknown config option {attr!r}.")

        return obj, name, types[name]

    def get_value(self, attr: str) -> Any:
        if "." not in attr:
            group = getattr(self, attr, None)
            if group is None or not is_dataclass(group):
                raise InvalidInputError(f"Unknown config group {attr!r}.")
            return group

        obj, name, _ = self._resolve(attr)
        return getattr(obj, name)

    def set_value(self, attr: str, value: Any):
        obj, name, annotation = self._resolve(attr)
        # string annotations come from `from __future__ import annotations`
        target = {"int": int, "float": float, "bool": bool, "str": str}.get(
            annotation, annotation
        )
        setattr(obj, name, coerce(value, target))
        return self
