"""Fixed-step Runge-Kutta integration."""

from __future__ import annotations

import math
import typing

if typing.TYPE_CHECKING:
    from typing import Callable

    from .constants import FloatArray

    Field = Callable[[float, FloatArray], FloatArray]


def rk4_step(f: Field, t: float, x: FloatArray, dt: float) -> FloatArray:
    """One classical RK4 step of x' = f(t, x). Works on single states and
    on (B, n) batches as long as ``f`` does."""
    k1 = f(t, x)
    k2 = f(t + dt / 2, x + dt / 2 * k1)
    k3 = f(t + dt / 2, x + dt / 2 * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def substep_count(dt: float, max_substep: float) -> int:
    """Number of equal substeps so that none is longer than max_substep."""
    # The small relative slack keeps dt = k * max_substep at k substeps.
    return max(1, math.ceil(dt / max_substep * (1 - 1e-12)))


def rk4_integrate(
    f: Field, t: float, x: FloatArray, dt: float, steps: int
) -> FloatArray:
    """Advance by ``dt`` using ``steps`` equal RK4 substeps."""
    h = dt / steps
    for i in range(steps):
        x = rk4_step(f, t + i * h, x, h)
    return x
