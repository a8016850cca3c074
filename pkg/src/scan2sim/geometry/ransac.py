"""RANSAC plane detection with an orientation constraint."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..errors import DegenerateInput, NoPlaneFound

Constraint = Literal["horizontal", "vertical", "any"]
Orientation = Literal["horizontal", "vertical", "oblique"]

HORIZONTAL_MAX_TILT_DEG = 15.0
VERTICAL_MIN_TILT_DEG = 75.0

_CHUNK = 64


@dataclass(frozen=True)
class RansacParams:
    dist_thresh: float = 0.01
    iters: int = 1000
    seed: int = 0


@dataclass(frozen=True, eq=False)
class PlaneSurface:
    """Plane ``normal . x = offset`` with the points that support it."""

    normal: np.ndarray
    offset: float
    inlier_points: np.ndarray
    orientation: Orientation
    inlier_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def distance(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.normal - self.offset

    @property
    def mean(self) -> np.ndarray:
        return self.inlier_points.mean(axis=0)


def classify_normal(normal) -> Orientation:
    tilt = math.degrees(math.acos(min(1.0, abs(float(normal[2])))))
    if tilt <= HORIZONTAL_MAX_TILT_DEG:
        return "horizontal"
    if tilt >= VERTICAL_MIN_TILT_DEG:
        return "vertical"
    return "oblique"


def _satisfies(orientation: np.ndarray, constraint: Constraint) -> np.ndarray:
    """Vectorised constraint test on |n_z| values."""
    if constraint == "any":
        return np.ones_like(orientation, dtype=bool)
    if constraint == "horizontal":
        return orientation >= math.cos(math.radians(HORIZONTAL_MAX_TILT_DEG)) - 1e-12
    if constraint == "vertical":
        return orientation <= math.cos(math.radians(VERTICAL_MIN_TILT_DEG)) + 1e-12
    raise ValueError(f"unknown constraint {constraint!r}")


def canonical_normal(normal: np.ndarray) -> np.ndarray:
    """Unit normal with a fixed sign: +z hemisphere, else first nonzero component positive."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    if abs(n[2]) > 1e-12:
        return n if n[2] > 0 else -n
    for c in n:
        if abs(c) > 1e-12:
            return n if c > 0 else -n
    return n


def plane_basis(normal) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic in-plane axes ``(e1, e2)`` with ``e1 x e2 = normal``."""
    n = np.asarray(normal, dtype=np.float64)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    e1 = axis - (axis @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def min_inliers_for(n_points: int) -> int:
    # capped at the point count so tiny exact sets (a 4-point square) can pass
    return min(n_points, max(10, math.ceil(0.01 * n_points)))


def _fit_plane(points: np.ndarray) -> tuple[np.ndarray, float]:
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid, full_matrices=False)
    normal = canonical_normal(vt[-1])
    return normal, float(normal @ centroid)


def _settle(points: np.ndarray, mask: np.ndarray, thresh: float, normal: np.ndarray | None) -> tuple[np.ndarray, float, np.ndarray]:
    """Shrink the inlier set until the plane passes through its mean.

    With ``normal`` fixed only the offset is re-estimated; otherwise the plane
    is a least-squares fit. Terminates because the set only shrinks.
    """
    for _ in range(len(points) + 1):
        subset = points[mask]
        if normal is None:
            n, d = _fit_plane(subset)
        else:
            n, d = normal, float(normal @ subset.mean(axis=0))
        new_mask = mask & (np.abs(points @ n - d) <= thresh)
        if new_mask.sum() < 3 or np.array_equal(new_mask, mask):
            return n, d, mask
        mask = new_mask
    return n, d, mask


def ransac_plane(
    points,
    params: RansacParams | None = None,
    constraint: Constraint = "any",
) -> PlaneSurface:
    """Fit the plane with the largest consensus among hypotheses that meet ``constraint``.

    The winning hypothesis is refined by least squares on its inliers and the
    final plane always passes through the mean of its reported inliers.
    """
    params = params or RansacParams()
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n < 3:
        raise DegenerateInput(f"need at least 3 points, got {n}")
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    scale = max(float(sv[0]), 1e-300)
    if sv[1] <= 1e-9 * scale:
        raise DegenerateInput("points are collinear")
    min_inliers = min_inliers_for(n)

    rng = np.random.default_rng(params.seed)
    # sample all triples up front so the draw sequence depends only on the seed
    triples = np.stack([rng.choice(n, size=3, replace=False) for _ in range(params.iters)])
    best_count, best_normal, best_offset = -1, None, 0.0
    for start in range(0, params.iters, _CHUNK):
        tri = triples[start : start + _CHUNK]
        a, b, c = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
        normals = np.cross(b - a, c - a)
        norms = np.linalg.norm(normals, axis=1)
        ok = norms > 1e-12 * max(1.0, scale) ** 2
        normals[ok] /= norms[ok, None]
        ok &= _satisfies(np.abs(normals[:, 2]), constraint)
        if not ok.any():
            continue
        offsets = np.einsum("ij,ij->i", normals, a)
        dist = np.abs(pts @ normals.T - offsets)  # (n, chunk)
        counts = np.where(ok, (dist <= params.dist_thresh).sum(axis=0), -1)
        k = int(np.argmax(counts))  # first max keeps ties stable
        if counts[k] > best_count:
            best_count = int(counts[k])
            best_normal, best_offset = normals[k].copy(), float(offsets[k])

    if best_normal is None or best_count < min_inliers:
        raise NoPlaneFound(
            f"no {constraint} plane with >= {min_inliers} inliers "
            f"(best {max(best_count, 0)}) among {params.iters} hypotheses"
        )

    mask = np.abs(pts @ best_normal - best_offset) <= params.dist_thresh
    settled = None
    ls_normal, ls_offset = _fit_plane(pts[mask])
    grown = np.abs(pts @ ls_normal - ls_offset) <= params.dist_thresh
    if grown.sum() >= 3:
        cand = _settle(pts, grown, params.dist_thresh, None)
        if _satisfies(np.array([abs(cand[0][2])]), constraint)[0] and cand[2].sum() >= min_inliers:
            settled = cand
    if settled is None:
        settled = _settle(pts, mask, params.dist_thresh, canonical_normal(best_normal))
    normal, offset, mask = settled

    idx = np.flatnonzero(mask)
    return PlaneSurface(
        normal=normal,
        offset=offset,
        inlier_points=pts[idx],
        orientation=classify_normal(normal),
        inlier_indices=idx,
    )
