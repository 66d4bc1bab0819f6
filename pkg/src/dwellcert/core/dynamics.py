"""This module defines the VectorField class which is meant to be subclassed.

VectorField
* The right hand side f_p(x, u) of each mode of a switched system.
* Subclasses with a ``name`` are registered automatically and can then be
  referred to by name in config files (``[system] dynamics = "<name>"``).
* The certification and training code never calls a VectorField directly;
  it goes through flow maps (dwellcert.core.flowmap), so that builtin and
  external dynamics are interchangeable.
"""

from __future__ import annotations

import typing
from abc import ABC, abstractmethod

import numpy as np

from .errors import ValidationError
from .registry import register_system

if typing.TYPE_CHECKING:
    from typing import Dict, Optional, Tuple

    from .constants import FloatArray


class VectorField(ABC):
    """Switched vector field x' = f_p(x, u).

    Subclasses set ``n``, ``m`` and ``modes`` in ``__init__`` (after
    validating their parameters) and implement :meth:`evaluate`.
    """

    name: str = ""
    """Name used in config files. Left empty for classes that should not be
    registered (e.g. base classes meant to be subclassed)."""

    n: int
    """State dimension"""

    m: int
    """Input dimension"""

    modes: Tuple[int, ...]
    """Mode identifiers, in order. Usually (1, ..., l)."""

    params: Dict[str, object]
    """The keyword parameters the instance was created with. Used for
    re-creating the same field in another process."""

    def __init_subclass__(cls, **kwargs: object) -> None:
        register_system(cls)
        return super().__init_subclass__(**kwargs)

    @abstractmethod
    def evaluate(self, mode: int, x: FloatArray, u: FloatArray) -> FloatArray:
        """Evaluate f_mode(x, u) on (B, n) states and (B, m) inputs. Returns
        (B, n)."""

    def __call__(self, mode: int, x: FloatArray, u: FloatArray) -> FloatArray:
        """Evaluate f_mode(x, u) for a single state or a batch."""
        self.check_mode(mode)
        xa = np.asarray(x, dtype=float)
        ua = np.asarray(u, dtype=float)
        if xa.ndim == 1:
            return self.evaluate(mode, xa[None, :], ua.reshape(1, -1))[0]
        return self.evaluate(mode, xa, ua)

    def equilibrium(self) -> Optional[FloatArray]:
        """The default reference point x* of the system, if it has one."""
        return None

    def check_mode(self, mode: int) -> None:
        if mode not in self.modes:
            raise ValidationError(
                f"Unknown mode {mode} for system '{self.name}' (modes: {self.modes})"
            )


def positive_parameter(name: str, value: object) -> float:
    """Validate a positive real parameter of a builtin system."""
    try:
        number = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number (got {value!r})") from None
    if not (np.isfinite(number) and number > 0):
        raise ValidationError(f"{name} must be positive (got {value!r})")
    return number
