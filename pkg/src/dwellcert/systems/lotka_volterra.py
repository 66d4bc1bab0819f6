"""Switched Lotka-Volterra predator-prey model.

    x1' = a x1 - b x1 x2 + g_p u
    x2' = -c x2 + d x1 x2 + h_p u

with (g_1, h_1) = (1, 0) and (g_2, h_2) = (0, 1): mode 1 acts on the prey,
mode 2 on the predator. The interior equilibrium (c/d, a/b) is the default
reference point.
"""

from __future__ import annotations

import typing

import numpy as np

from dwellcert.core.dynamics import VectorField, positive_parameter
from dwellcert.core.flowmap import VectorFieldFlowMap

if typing.TYPE_CHECKING:
    from typing import List

    from dwellcert.core.constants import FloatArray
    from dwellcert.core.flowmap import FlowMapHandle


class LotkaVolterra(VectorField):
    name = "lotka_volterra"

    def __init__(
        self, a: float = 1.0, b: float = 1.0, c: float = 1.0, d: float = 1.0
    ) -> None:
        self.a = positive_parameter("a", a)
        self.b = positive_parameter("b", b)
        self.c = positive_parameter("c", c)
        self.d = positive_parameter("d", d)
        self.params = dict(a=self.a, b=self.b, c=self.c, d=self.d)
        self.n = 2
        self.m = 1
        self.modes = (1, 2)

    def evaluate(self, mode: int, x: FloatArray, u: FloatArray) -> FloatArray:
        x1 = x[:, 0]
        x2 = x[:, 1]
        f1 = self.a * x1 - self.b * x1 * x2
        f2 = -self.c * x2 + self.d * x1 * x2
        if mode == 1:
            f1 = f1 + u[:, 0]
        else:
            f2 = f2 + u[:, 0]
        return np.stack([f1, f2], axis=-1)

    def equilibrium(self) -> FloatArray:
        return np.array([self.c / self.d, self.a / self.b])

    def first_integral(self, x: FloatArray) -> FloatArray:
        """d x1 - c ln x1 + b x2 - a ln x2, which is constant along
        uncontrolled trajectories in the positive quadrant."""
        x = np.asarray(x, dtype=float)
        x1 = x[..., 0]
        x2 = x[..., 1]
        return self.d * x1 - self.c * np.log(x1) + self.b * x2 - self.a * np.log(x2)


def builtin_lotka_volterra(
    a: float = 1.0, b: float = 1.0, c: float = 1.0, d: float = 1.0
) -> List[FlowMapHandle]:
    """Flow map handles of both modes of LotkaVolterra(a, b, c, d)."""
    field = LotkaVolterra(a=a, b=b, c=c, d=d)
    return [VectorFieldFlowMap(field, mode) for mode in field.modes]
