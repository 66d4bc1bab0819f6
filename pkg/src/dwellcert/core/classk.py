"""Class-K-infinity functions of the form k * s**gamma."""

from __future__ import annotations

import typing
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError

if typing.TYPE_CHECKING:
    from typing import Dict, Union

    from .constants import FloatArray

    Magnitude = Union[float, FloatArray]


def class_k_eval(k: float, gamma: float, s: Magnitude) -> Magnitude:
    """k * s**gamma for s >= 0. Works elementwise on arrays."""
    if np.any(np.asarray(s) < 0):
        raise ValidationError("class-K functions are defined for s >= 0 only")
    return k * np.power(s, gamma)


def class_k_lipschitz(k: float, gamma: float, radius: float) -> float:
    """Lipschitz constant of s -> k * s**gamma on [0, radius], which is the
    largest derivative k * gamma * radius**(gamma - 1)."""
    return float(k * gamma * radius ** (gamma - 1.0))


@dataclass(frozen=True)
class ClassKInftyParams:
    """alpha_1(s) = k1 s^gamma1, alpha_2(s) = k2 s^gamma2 and
    sigma(s) = kw s^gammaw for one mode."""

    k1: float
    k2: float
    kw: float
    gamma1: float = 2.0
    gamma2: float = 2.0
    gammaw: float = 2.0

    def __post_init__(self) -> None:
        for name in ("k1", "k2", "kw"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive (got {value})")
        for name in ("gamma1", "gamma2", "gammaw"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 1):
                # Below 1, k s^gamma is not Lipschitz at s = 0.
                raise ValidationError(f"{name} must be >= 1 (got {value})")
        if not self.k1 < self.k2:
            raise ValidationError(
                f"k1 < k2 required, otherwise the lower and upper bounds on V are "
                f"jointly infeasible (got k1={self.k1}, k2={self.k2})"
            )

    def alpha1(self, s: Magnitude) -> Magnitude:
        return class_k_eval(self.k1, self.gamma1, s)

    def alpha2(self, s: Magnitude) -> Magnitude:
        return class_k_eval(self.k2, self.gamma2, s)

    def sigma(self, s: Magnitude) -> Magnitude:
        return class_k_eval(self.kw, self.gammaw, s)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)
