"""Switched stable linear systems x' = -a_p x + b_p u with x, u in R^dim.

These have known quadratic (and common) Lyapunov functions, so they are used
as feasible instances for certification and for the shared-V mode.
"""

from __future__ import annotations

import typing

import numpy as np

from dwellcert.core.dynamics import VectorField, positive_parameter
from dwellcert.core.errors import ValidationError

if typing.TYPE_CHECKING:
    from typing import List, Sequence, Union

    from dwellcert.core.constants import FloatArray

    PerMode = Union[float, Sequence[float]]


class Linear(VectorField):
    name = "linear"

    def __init__(
        self, dim: int = 1, decay: PerMode = 1.0, gain: PerMode = 1.0
    ) -> None:
        if int(dim) != dim or dim < 1:
            raise ValidationError(f"dim must be a positive integer (got {dim!r})")
        decays = _as_list(decay)
        gains = _as_list(gain)
        if not decays:
            raise ValidationError("decay must have at least one entry (one per mode)")
        if len(gains) == 1:
            gains = gains * len(decays)
        if len(gains) != len(decays):
            raise ValidationError(
                f"gain must have one entry per mode ({len(decays)}), got {len(gains)}"
            )
        self.decay = np.array(
            [positive_parameter(f"decay[{i}]", a) for i, a in enumerate(decays)]
        )
        self.gain = np.array(
            [positive_parameter(f"gain[{i}]", b) for i, b in enumerate(gains)]
        )
        self.params = dict(
            dim=int(dim), decay=self.decay.tolist(), gain=self.gain.tolist()
        )
        self.n = int(dim)
        self.m = int(dim)
        self.modes = tuple(range(1, len(decays) + 1))

    def evaluate(self, mode: int, x: FloatArray, u: FloatArray) -> FloatArray:
        i = mode - 1
        return -self.decay[i] * x + self.gain[i] * u

    def equilibrium(self) -> FloatArray:
        return np.zeros(self.n)


def _as_list(value: PerMode) -> List[float]:
    if isinstance(value, (int, float)):
        return [float(value)]
    return list(value)
