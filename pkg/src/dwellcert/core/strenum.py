"""This module defines StrEnum for making string enumerations.

NOTE: The enum.StrEnum could be used in place of StrEnum on Python 3.11
onwards, so consider removing this module when python 3.10 is no longer
supported."""

from __future__ import annotations

import typing
from enum import Enum, EnumMeta, auto

if typing.TYPE_CHECKING:
    from typing import Any, Callable, KeysView, ValuesView


class StrEnumMeta(EnumMeta):
    """Extends the Enum metaclass with a containment check on member
    *values*; ``"tanh" in Activation`` is True while ``"TANH" in Activation``
    is False. Used when validating string values read from config files."""

    def __contains__(cls, value: object) -> bool:
        return value in cls.values()

    @property
    def keys(cls) -> Callable[[], KeysView[str]]:
        return cls.__members__.keys

    @property
    def values(cls) -> Callable[[], ValuesView[str]]:
        return cls.__members__.values


class StrEnum(str, Enum, metaclass=StrEnumMeta):
    """A string constant / enumeration. For creating reusable, typed constants.

    All enumeration members are (subtype of) strings, so they can be written
    directly to config files, CSV headers and JSON reports. Members created
    with ``auto()`` get their own name as value:

    >>> from enum import auto
    >>>
    >>> class Status(StrEnum):
    ...     DONE = auto()

    >>> Status.DONE == "DONE"
    True
    """

    @staticmethod
    def _generate_next_value_(
        name: str, start: int, count: int, last_values: list[Any]
    ) -> str:
        return name

    def __str__(self) -> str:
        return str.__str__(self)

    def __hash__(self) -> int:
        return super().__hash__()

    def __eq__(self, other: object) -> bool:
        # Only here for mypy, which otherwise assumes SomeConst.FOO == "foo"
        # to always be False.
        return str(self) == other  # pragma: no cover

    @classmethod
    def parse(cls, value: object, field: str) -> Any:
        """Get the member with the given value. Raises ValueError naming the
        ``field`` and the allowed values if there is no such member."""
        if value not in cls:
            allowed = ", ".join(f'"{v}"' for v in cls.values())
            raise ValueError(f'Invalid value "{value}" for {field}. Allowed: {allowed}')
        return cls(value)


__all__ = [
    "StrEnum",
    "auto",
]
