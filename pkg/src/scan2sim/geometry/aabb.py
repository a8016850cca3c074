from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MARGIN = 1e-3


@dataclass(frozen=True)
class Aabb:
    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.min)
        hi = tuple(float(v) for v in self.max)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("Aabb corners must be 3D")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"Aabb min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @classmethod
    def from_points(cls, points) -> "Aabb":
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(pts) == 0:
            raise ValueError("cannot bound an empty point set")
        return cls(pts.min(axis=0), pts.max(axis=0))

    @classmethod
    def from_center(cls, center, half_extent) -> "Aabb":
        c = np.asarray(center, dtype=np.float64)
        h = np.asarray(half_extent, dtype=np.float64)
        return cls(c - h, c + h)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.min) + np.array(self.max)) / 2.0

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.max) - np.array(self.min)

    def expanded(self, margin: float) -> "Aabb":
        return Aabb(np.array(self.min) - margin, np.array(self.max) + margin)

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= np.array(self.min) - tol) and np.all(p <= np.array(self.max) + tol))


def aabb_overlap(a: Aabb, b: Aabb, margin: float = 0.0) -> bool:
    """True iff ``a`` and ``b``, each grown by ``margin``, intersect (touching counts)."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    for axis in range(3):
        if a.min[axis] - margin > b.max[axis] + margin or b.min[axis] - margin > a.max[axis] + margin:
            return False
    return True
