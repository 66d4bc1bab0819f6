"""Adam optimizer over a list of numpy parameter arrays."""

from __future__ import annotations

import typing

import numpy as np

if typing.TYPE_CHECKING:
    from typing import List, Optional, Sequence

    from .constants import FloatArray


class Adam:
    """Adaptive moment estimation.

    ``step`` returns new arrays and leaves its arguments untouched, so the
    caller still holds the previous parameters if the update turns out to be
    non-finite.
    """

    def __init__(
        self,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: List[FloatArray] = []
        """First moment estimates"""
        self.v: List[FloatArray] = []
        """Second moment estimates"""
        self.t = 0

    def step(
        self,
        params: Sequence[FloatArray],
        grads: Sequence[FloatArray],
        lr: Optional[float] = None,
    ) -> List[FloatArray]:
        """One update. ``lr`` overrides the base learning rate (used for
        schedules)."""
        if len(params) != len(grads):
            raise ValueError(
                f"got {len(grads)} gradients for {len(params)} parameter arrays"
            )
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        step_size = (self.lr if lr is None else lr) / bc1

        updated = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(self.v[i] / bc2) + self.epsilon
            updated.append(p - step_size * self.m[i] / denom)
        return updated
