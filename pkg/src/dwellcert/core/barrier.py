"""The product barrier function of the state box.

    h(x) = (1/scale) * prod_i (x_i - lo_i) (hi_i - x_i)
    scale = prod_i ((hi_i - lo_i) / 2)^2

h is 1 at the box center, 0 on the boundary, positive inside, and smooth.
"""

from __future__ import annotations

import typing
from dataclasses import dataclass, field

import numpy as np

if typing.TYPE_CHECKING:
    from .box import CompactBox
    from .constants import FloatArray


@dataclass(frozen=True, eq=False)
class BarrierSpec:
    box: CompactBox

    scale: float = field(init=False)

    gradient_bound: float = field(init=False)
    """M_h >= sup |grad h| over the box."""

    lipschitz: float = field(init=False)
    """L_h, Lipschitz constant of h over the (convex) box. Equal to M_h."""

    smoothness: float = field(init=False)
    """L_dh >= Lipschitz constant of grad h over the box."""

    def __post_init__(self) -> None:
        r = self.box.half_widths
        object.__setattr__(self, "scale", float(np.prod(r**2)))

        # Each factor q_i = (x_i - lo_i)(hi_i - x_i) lies in [0, r_i^2] with
        # |q_i'| <= 2 r_i and q_i'' = -2. Dividing by the scale gives
        # |dh/dx_i| <= 2/r_i, |d2h/dx_i^2| <= 2/r_i^2 and
        # |d2h/dx_i dx_j| <= 4/(r_i r_j). Frobenius norms bound the spectral
        # norms.
        grad = 2.0 / r
        hess = 4.0 / np.outer(r, r)
        np.fill_diagonal(hess, 2.0 / r**2)
        m_h = float(np.linalg.norm(grad))
        object.__setattr__(self, "gradient_bound", m_h)
        object.__setattr__(self, "lipschitz", m_h)
        object.__setattr__(self, "smoothness", float(np.linalg.norm(hess)))

    def _factors(self, x: FloatArray) -> FloatArray:
        return (x - self.box.lo) * (self.box.hi - x)

    def value(self, x: FloatArray) -> FloatArray:
        """h(x) for a (B, n) batch; returns shape (B,). Also accepts a single
        point and returns a 0-d array."""
        return np.prod(self._factors(np.asarray(x, dtype=float)), axis=-1) / self.scale

    def gradient(self, x: FloatArray) -> FloatArray:
        """grad h(x), same shape as x."""
        x = np.asarray(x, dtype=float)
        q = self._factors(x)
        dq = self.box.hi + self.box.lo - 2.0 * x
        n = x.shape[-1]
        grad = np.empty_like(x)
        for i in range(n):
            others = np.delete(q, i, axis=-1)
            grad[..., i] = dq[..., i] * np.prod(others, axis=-1)
        return grad / self.scale
