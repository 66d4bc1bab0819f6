"""Deterministic epsilon-covers of boxes.

The cover of a d-dimensional box with radius eps is the grid of cell centers
with per-dimension step at most 2 eps / sqrt(d). Every point of the box is
then within eps (Euclidean) of a sample, since half of a cell diagonal is at
most eps. Samples are ordered row-major with the lowest dimension varying
fastest.
"""

from __future__ import annotations

import logging
import math
import typing
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError, SampleCapError, ValidationError

if typing.TYPE_CHECKING:
    from typing import List, Tuple

    from .box import CompactBox
    from .config import SwitchedSystemSpec
    from .constants import FloatArray

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_CAP = 1_000_000

CACHE_FORMAT = 1
"""Version of the cover cache file layout."""


def cover_counts(box: CompactBox, eps: float) -> List[int]:
    """Number of grid cells per dimension for covering ``box`` with radius
    ``eps``."""
    if not (np.isfinite(eps) and eps > 0):
        raise ValidationError(f"cover radius must be positive (got {eps})")
    step = 2.0 * eps / math.sqrt(box.dim)
    return [max(1, math.ceil(float(width) / step)) for width in box.widths]


def cover_box(
    box: CompactBox, eps: float, cap: int = DEFAULT_SAMPLE_CAP, what: str = "box"
) -> FloatArray:
    """Cell centers of the eps-cover of ``box``, shape (N, d).

    Raises
    ------
    ValidationError
        If eps is not positive.
    SampleCapError
        If N would exceed ``cap``. Raised before allocating anything.
    """
    counts = cover_counts(box, eps)
    required = math.prod(counts)
    if required > cap:
        raise SampleCapError(required, cap, what)
    axes = [
        lo + (np.arange(k) + 0.5) * (hi - lo) / k
        for lo, hi, k in zip(box.lo, box.hi, counts)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    # Fortran order makes the first dimension vary fastest.
    samples = np.stack([g.ravel(order="F") for g in mesh], axis=-1)
    logger.debug("Covered %r with eps=%g: %s -> %d samples", box, eps, counts, required)
    return samples


@dataclass(frozen=True, eq=False)
class SampleSet:
    """eps-covers of the state box X and of the disturbance box W."""

    state_samples: FloatArray
    """(N, n)"""
    dist_samples: FloatArray
    """(M, r)"""
    eps_x: float
    eps_u: float

    @property
    def eps(self) -> float:
        return max(self.eps_x, self.eps_u)

    @property
    def N(self) -> int:
        return int(self.state_samples.shape[0])

    @property
    def M(self) -> int:
        return int(self.dist_samples.shape[0])

    @property
    def pair_count(self) -> int:
        return self.N * self.M

    def pair_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """State and disturbance indices of every (x, w) pair, in canonical
        order (disturbance index fastest)."""
        states = np.repeat(np.arange(self.N), self.M)
        dists = np.tile(np.arange(self.M), self.N)
        return states, dists

    def save(self, path: Path) -> None:
        """Write the sample set as a numpy .npz cache file."""
        path.parent.mkdir(parents=True, exist_ok=True)
        header = np.array(
            [
                CACHE_FORMAT,
                self.state_samples.shape[1],
                self.dist_samples.shape[1],
                self.N,
                self.M,
            ],
            dtype=np.int64,
        )
        with open(path, "wb") as f:
            np.savez(
                f,
                header=header,
                eps=np.array([self.eps_x, self.eps_u]),
                state_samples=self.state_samples,
                dist_samples=self.dist_samples,
            )
        logger.info("Wrote cover cache %s (N=%d, M=%d)", path, self.N, self.M)

    @classmethod
    def load(cls, path: Path) -> SampleSet:
        try:
            with np.load(path) as data:
                header = data["header"]
                eps = data["eps"]
                states = data["state_samples"]
                dists = data["dist_samples"]
        except (OSError, KeyError, ValueError) as exc:
            raise CheckpointError(f"Could not read cover cache {path}: {exc}") from None
        n, r = states.shape[1], dists.shape[1]
        expected = [CACHE_FORMAT, n, r, len(states), len(dists)]
        if header.tolist() != expected:
            raise CheckpointError(f"Cover cache {path} has an inconsistent header")
        return cls(states, dists, float(eps[0]), float(eps[1]))


def cover_product(
    spec: SwitchedSystemSpec,
    eps_x: float,
    eps_u: float,
    cap: int = DEFAULT_SAMPLE_CAP,
) -> SampleSet:
    """Covers of the state box with radius eps_x and of the disturbance box
    with radius eps_u. ``cap`` limits N and M separately."""
    states = cover_box(spec.state_box, eps_x, cap, what="state box")
    dists = cover_box(spec.dist_box, eps_u, cap, what="disturbance box")
    sample_set = SampleSet(states, dists, float(eps_x), float(eps_u))
    logger.info(
        "Sample set: N=%d, M=%d, eps=%g", sample_set.N, sample_set.M, sample_set.eps
    )
    return sample_set
