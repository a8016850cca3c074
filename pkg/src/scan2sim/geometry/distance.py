from __future__ import annotations

import numpy as np


def _closest_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Closest points for broadcastable point / triangle arrays (Ericson, RTCD 5.1.5)."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("...i,...i", ab, ap)
    d2 = np.einsum("...i,...i", ac, ap)
    bp = p - b
    d3 = np.einsum("...i,...i", ab, bp)
    d4 = np.einsum("...i,...i", ac, bp)
    cp = p - c
    d5 = np.einsum("...i,...i", ab, cp)
    d6 = np.einsum("...i,...i", ac, cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        out = a + ab * v[..., None] + ac * w[..., None]

        # edge BC
        t_bc = np.where((d4 - d3) + (d5 - d6) != 0, (d4 - d3) / ((d4 - d3) + (d5 - d6)), 0.0)
        m = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
        out = np.where(m[..., None], b + (c - b) * t_bc[..., None], out)
        # edge AC
        t_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        out = np.where(m[..., None], a + ac * t_ac[..., None], out)
        out = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, out)
        # edge AB
        t_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        out = np.where(m[..., None], a + ab * t_ab[..., None], out)
    # applied lowest priority first so the final where wins, as in the sequential tests
    out = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, out)
    out = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, out)
    return out


def points_to_triangles(points, vertices, faces, chunk: int = 200_000) -> np.ndarray:
    """Unsigned distance from each point to the nearest of the given triangles.

    Triangles are culled with their bounding spheres: a centroid lies on its
    triangle, so the nearest centroid bounds the answer from above, and only
    triangles whose sphere comes within that bound are tested exactly.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(f) == 0:
        raise ValueError("no triangles to measure against")
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    centers = (a + b + c) / 3.0
    radii = np.sqrt(np.max([((x - centers) ** 2).sum(axis=1) for x in (a, b, c)], axis=0))
    out = np.empty(len(pts))
    step = max(1, chunk // len(f))
    for s in range(0, len(pts), step):
        p = pts[s : s + step]
        to_center = np.sqrt(((p[:, None, :] - centers[None]) ** 2).sum(axis=-1))
        upper = to_center.min(axis=1)
        pi, fi = np.nonzero(to_center - radii[None] <= upper[:, None])
        q = _closest_on_triangles(p[pi], a[fi], b[fi], c[fi])
        d = np.sqrt(((q - p[pi]) ** 2).sum(axis=-1))
        best = upper.copy()
        np.minimum.at(best, pi, d)
        out[s : s + step] = best
    return out


def winding_numbers(points, vertices, faces, chunk: int = 200_000) -> np.ndarray:
    """Generalized winding number of each point w.r.t. a triangle soup.

    Sum of signed solid angles over 4 pi (Van Oosterom and Strackee). It is
    about 1 inside a closed, consistently oriented surface, 0 outside, and
    fractional near holes; the sign follows the face orientation.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    out = np.zeros(len(pts))
    if len(f) == 0:
        return out
    step = max(1, chunk // len(f))
    for s in range(0, len(pts), step):
        p = pts[s : s + step, None, :]
        a, b, c = v[f[:, 0]][None] - p, v[f[:, 1]][None] - p, v[f[:, 2]][None] - p
        la, lb, lc = (np.linalg.norm(x, axis=-1) for x in (a, b, c))
        num = np.einsum("...i,...i", a, np.cross(b, c))
        den = (
            la * lb * lc
            + np.einsum("...i,...i", a, b) * lc
            + np.einsum("...i,...i", a, c) * lb
            + np.einsum("...i,...i", b, c) * la
        )
        out[s : s + step] = (2.0 * np.arctan2(num, den)).sum(axis=1) / (4.0 * np.pi)
    return out
