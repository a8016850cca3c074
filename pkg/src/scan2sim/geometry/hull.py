"""3D quickhull and the convex piece type used for collision geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateInput


@dataclass(frozen=True, eq=False)
class ConvexPiece:
    hull_vertices: np.ndarray
    hull_faces: np.ndarray
    source_faces: tuple[int, ...] = ()
    depth_limited: bool = False
    concavity: float = 0.0
    # outward unit normals and offsets of hull_faces, derived
    normals: np.ndarray = field(init=False, repr=False)
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.hull_vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.hull_faces, dtype=np.int64).reshape(-1, 3)
        n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        object.__setattr__(self, "hull_vertices", v)
        object.__setattr__(self, "hull_faces", f)
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "offsets", np.einsum("ij,ij->i", n, v[f[:, 0]]))

    def signed_distance(self, points) -> np.ndarray:
        """Max over face planes of ``n . p - d``; <= 0 means inside."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return (p @ self.normals.T - self.offsets).max(axis=1)

    def contains(self, points, tol: float = 1e-6) -> np.ndarray:
        return self.signed_distance(points) <= tol

    def is_convex(self, tol: float = 1e-6) -> bool:
        return bool(np.all(self.signed_distance(self.hull_vertices) <= tol))


def _tolerance(points: np.ndarray) -> float:
    scale = float(np.abs(points).max()) if len(points) else 1.0
    return 1e-10 * max(1.0, scale)


def _initial_simplex(pts: np.ndarray, eps: float) -> list[int]:
    lo, hi = pts.argmin(axis=0), pts.argmax(axis=0)
    best, pair = -1.0, (0, 0)
    for a, b in zip(lo, hi):
        d = float(np.linalg.norm(pts[a] - pts[b]))
        if d > best:
            best, pair = d, (int(a), int(b))
    i0, i1 = pair
    if best <= eps:
        raise DegenerateInput("all points coincide")
    line = pts[i1] - pts[i0]
    line /= np.linalg.norm(line)
    rel = pts - pts[i0]
    off_line = np.linalg.norm(rel - np.outer(rel @ line, line), axis=1)
    i2 = int(np.argmax(off_line))
    if off_line[i2] <= eps:
        raise DegenerateInput("points are collinear")
    normal = np.cross(pts[i1] - pts[i0], pts[i2] - pts[i0])
    normal /= np.linalg.norm(normal)
    height = rel @ normal
    i3 = int(np.argmax(np.abs(height)))
    if abs(height[i3]) <= eps:
        raise DegenerateInput("points are coplanar")
    return [i0, i1, i2, i3]


class _Hull:
    def __init__(self, pts: np.ndarray, eps: float):
        self.pts = pts
        self.eps = eps
        self.faces: dict[int, tuple[int, int, int]] = {}
        self.normal: dict[int, np.ndarray] = {}
        self.offset: dict[int, float] = {}
        self.outside: dict[int, list[int]] = {}
        self.edge_face: dict[tuple[int, int], int] = {}
        self.next_id = 0

    def add_face(self, a: int, b: int, c: int) -> int:
        fid = self.next_id
        self.next_id += 1
        p = self.pts
        n = np.cross(p[b] - p[a], p[c] - p[a])
        n /= np.linalg.norm(n)
        self.faces[fid] = (a, b, c)
        self.normal[fid] = n
        self.offset[fid] = float(n @ p[a])
        self.outside[fid] = []
        for e in ((a, b), (b, c), (c, a)):
            self.edge_face[e] = fid
        return fid

    def remove_face(self, fid: int) -> None:
        a, b, c = self.faces.pop(fid)
        for e in ((a, b), (b, c), (c, a)):
            if self.edge_face.get(e) == fid:
                del self.edge_face[e]
        del self.normal[fid], self.offset[fid], self.outside[fid]

    def dist(self, fid: int, idx) -> np.ndarray:
        return self.pts[idx] @ self.normal[fid] - self.offset[fid]

    def assign(self, candidates: list[int], faces: list[int]) -> None:
        remaining = np.asarray(candidates, dtype=np.int64)
        for fid in faces:
            if len(remaining) == 0:
                break
            d = self.dist(fid, remaining)
            above = d > self.eps
            self.outside[fid].extend(remaining[above].tolist())
            remaining = remaining[~above]


def _extreme_vertices(piece: ConvexPiece) -> np.ndarray:
    """Mask of hull vertices whose incident facet normals span 3D.

    Vertices inside a flat facet (rank 1) or on a straight edge (rank 2) are
    boundary points, not corners.
    """
    incident: list[list[int]] = [[] for _ in range(len(piece.hull_vertices))]
    for fi, face in enumerate(piece.hull_faces):
        for v in face:
            incident[v].append(fi)
    keep = np.ones(len(incident), dtype=bool)
    for v, faces in enumerate(incident):
        sv = np.linalg.svd(piece.normals[faces], compute_uv=False)
        if len(sv) < 3 or sv[2] < 1e-8:
            keep[v] = False
    return keep


def quickhull(points) -> ConvexPiece:
    """Convex hull of a 3D point set as an outward-oriented triangle mesh.

    Only true corners are returned as hull vertices; points lying on a facet
    or an edge are dropped.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    piece = _quickhull(pts)
    keep = _extreme_vertices(piece)
    if keep.all() or keep.sum() < 4:
        return piece
    try:
        pruned = _quickhull(piece.hull_vertices[keep])
    except DegenerateInput:
        return piece
    if np.all(pruned.signed_distance(piece.hull_vertices) <= _tolerance(pts)):
        return pruned
    return piece


def _quickhull(pts: np.ndarray) -> ConvexPiece:
    if len(pts) < 4:
        raise DegenerateInput(f"need at least 4 points, got {len(pts)}")
    eps = _tolerance(pts)
    simplex = _initial_simplex(pts, eps)
    hull = _Hull(pts, eps)
    centroid = pts[simplex].mean(axis=0)
    i0, i1, i2, i3 = simplex
    for a, b, c in ((i0, i1, i2), (i0, i3, i1), (i1, i3, i2), (i2, i3, i0)):
        n = np.cross(pts[b] - pts[a], pts[c] - pts[a])
        if n @ (pts[a] - centroid) < 0:
            b, c = c, b
        hull.add_face(a, b, c)
    rest = [i for i in range(len(pts)) if i not in set(simplex)]
    hull.assign(rest, list(hull.faces))

    while True:
        fid = next((f for f in sorted(hull.faces) if hull.outside[f]), None)
        if fid is None:
            break
        cand = np.asarray(hull.outside[fid])
        apex = int(cand[np.argmax(hull.dist(fid, cand))])

        # faces visible from the apex, grown across shared edges
        visible = {fid}
        stack = [fid]
        while stack:
            f = stack.pop()
            a, b, c = hull.faces[f]
            for u, v in ((a, b), (b, c), (c, a)):
                g = hull.edge_face.get((v, u))
                if g is not None and g not in visible and hull.dist(g, [apex])[0] > eps:
                    visible.add(g)
                    stack.append(g)

        horizon = []
        for f in visible:
            a, b, c = hull.faces[f]
            for u, v in ((a, b), (b, c), (c, a)):
                if hull.edge_face.get((v, u)) not in visible:
                    horizon.append((u, v))
        orphans = sorted({p for f in visible for p in hull.outside[f]} - {apex})
        for f in sorted(visible):
            hull.remove_face(f)
        new_faces = [hull.add_face(u, v, apex) for u, v in sorted(horizon)]
        hull.assign(orphans, new_faces)

    used = sorted({i for face in hull.faces.values() for i in face})
    remap = {old: new for new, old in enumerate(used)}
    faces = [tuple(remap[i] for i in hull.faces[f]) for f in sorted(hull.faces)]
    return ConvexPiece(pts[used], np.array(faces, dtype=np.int64))
