"""This module contains the registry of builtin dynamics. All the subclasses
of dwellcert.core.dynamics.VectorField with a name are automatically added to
this registry, so that config files can refer to them by name.

Functions for getting dynamics
------------------------------
get_system
    Get a single VectorField class by name
list_systems
    Get the names of all registered VectorField classes
"""

from __future__ import annotations

import logging
import typing

from .errors import SystemRegistryError

if typing.TYPE_CHECKING:
    from typing import Dict, List, Type

    from .dynamics import VectorField

    SystemRegistry = Dict[str, Type[VectorField]]


_system_registry: SystemRegistry = dict()
"""A registry of VectorField classes, keyed by VectorField.name.

Updated automatically; when python loads a module with a subclass of
VectorField, the class is added to this registry.
"""

logger = logging.getLogger(__name__)


def register_system(system_class: Type[VectorField]) -> None:
    """Registers a subclass of VectorField to the registry"""

    if not system_class.name:
        # VectorFields without a name (base classes) will not be registered
        logger.debug(
            "Not registering VectorField %s as it does not have a name set.",
            system_class,
        )
        return

    logger.debug(
        "Registering VectorField %s (name: %s)", system_class, system_class.name
    )

    registered = _system_registry.get(system_class.name)
    if registered is not None:
        if registered is not system_class:
            raise SystemRegistryError(
                f'Duplicate system name "{system_class.name}": '
                f"{system_class.__qualname__} "
                f"(already registered to {registered.__qualname__})"
            )
        return

    _system_registry[system_class.name] = system_class


def get_system(name: str) -> Type[VectorField]:
    """Get a VectorField class based on its name.

    Raises
    ------
    ValueError
        Raised if no system with the name is registered.
    """
    try:
        return _system_registry[name]
    except KeyError:
        raise ValueError(
            f'No system with name "{name}" found! Registered systems: '
            f"{', '.join(sorted(_system_registry)) or '(none)'}"
        ) from None


def list_systems() -> List[str]:
    return sorted(_system_registry)
