"""Axis-aligned compact boxes. These house the state set X, the disturbance
set W and the optional input saturation set U."""

from __future__ import annotations

import typing
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

if typing.TYPE_CHECKING:
    from typing import Dict, List, Sequence, Union

    from .constants import FloatArray

    ArrayLike = Union[Sequence[float], FloatArray]


@dataclass(frozen=True, eq=False)
class CompactBox:
    """The box [lo_1, hi_1] x ... x [lo_d, hi_d] with lo_i < hi_i."""

    lo: FloatArray
    hi: FloatArray
    name: str = field(default="box", compare=False)
    """Used in error messages, for example "state_box"."""

    def __post_init__(self) -> None:
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValidationError(
                f"{self.name}: lo and hi must have equal length "
                f"(got {lo.size} and {hi.size})"
            )
        if lo.size == 0:
            raise ValidationError(
                f"{self.name}: the box must have at least one dimension"
            )
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError(f"{self.name}: bounds must be finite")
        bad = np.flatnonzero(~(lo < hi))
        if bad.size:
            i = int(bad[0])
            raise ValidationError(
                f"{self.name}: lo[{i}] < hi[{i}] required (got lo={lo[i]}, hi={hi[i]})"
            )
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return int(self.lo.size)

    @property
    def widths(self) -> FloatArray:
        return self.hi - self.lo

    @property
    def center(self) -> FloatArray:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_widths(self) -> FloatArray:
        return 0.5 * (self.hi - self.lo)

    def contains(self, x: ArrayLike) -> Union[bool, np.ndarray]:
        """lo[i] <= x[i] <= hi[i] for all i. Accepts a single point (returns
        bool) or a (B, d) batch (returns a boolean array)."""
        arr = np.asarray(x, dtype=float)
        inside = np.all((arr >= self.lo) & (arr <= self.hi), axis=-1)
        if arr.ndim == 1:
            return bool(inside)
        return inside

    def radius_from(self, point: ArrayLike) -> float:
        """The largest Euclidean distance from ``point`` to any point of the
        box; attained at a corner."""
        p = np.asarray(point, dtype=float)
        far = np.maximum(np.abs(self.lo - p), np.abs(self.hi - p))
        return float(np.linalg.norm(far))

    def norm_bound(self) -> float:
        """max |x| over the box (distance of the farthest corner from the
        origin)."""
        return self.radius_from(np.zeros(self.dim))

    def scaled(self, factor: float) -> CompactBox:
        """The box scaled about its center by ``factor``."""
        half = self.half_widths * factor
        return CompactBox(self.center - half, self.center + half, name=self.name)

    def inflated(self, margin: float) -> CompactBox:
        """The box grown by ``margin`` times its width on every side."""
        pad = self.widths * margin
        return CompactBox(self.lo - pad, self.hi + pad, name=self.name)

    def uniform(self, rng: np.random.Generator, count: int) -> FloatArray:
        """``count`` uniformly distributed points of the box, shape
        (count, d)."""
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))

    def to_dict(self) -> Dict[str, List[float]]:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, List[float]], name: str = "box") -> CompactBox:
        return cls(np.asarray(data["lo"], float), np.asarray(data["hi"], float), name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CompactBox):
            return NotImplemented
        return bool(
            np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self) -> int:
        return hash((tuple(self.lo.tolist()), tuple(self.hi.tolist())))

    def __repr__(self) -> str:
        bounds = ", ".join(f"[{a:g}, {b:g}]" for a, b in zip(self.lo, self.hi))
        return f"CompactBox({bounds})"
