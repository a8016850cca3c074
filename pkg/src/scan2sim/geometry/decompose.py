"""Approximate convex decomposition by recursive axis-aligned splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInput
from ..scene.mesh import TriMesh
from .distance import points_to_triangles, winding_numbers
from .hull import ConvexPiece, quickhull

# thickness given to flat or linear pieces so they still bound a volume
FLAT_THICKNESS = 1e-3
# winding number above which a point counts as inside the mesh's material
MATERIAL_WINDING = 0.9

# barycentric sample pattern used to probe hull facets
_FACET_SAMPLES = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [2 / 3, 1 / 6, 1 / 6],
        [1 / 6, 2 / 3, 1 / 6],
        [1 / 6, 1 / 6, 2 / 3],
    ]
)


@dataclass(frozen=True)
class DecompositionParams:
    concavity_thresh: float = 0.02
    max_pieces: int = 64
    max_depth: int = 8
    # cut positions tried per axis in addition to the centroid plane
    split_candidates: int = 8


def robust_hull(points: np.ndarray) -> ConvexPiece:
    """Quickhull, with flat or linear point sets thickened into a thin slab."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    try:
        return quickhull(pts)
    except DegenerateInput:
        pass
    center = pts.mean(axis=0)
    _, sv, vt = np.linalg.svd(pts - center, full_matrices=True)
    sv = np.concatenate([sv, np.zeros(3 - len(sv))])
    half = FLAT_THICKNESS / 2
    offsets = [np.zeros(3)]
    for k in range(3):
        if sv[k] <= 1e-9 * max(sv[0], 1e-12):
            offsets = [o + s * half * vt[k] for o in offsets for s in (-1.0, 1.0)]
    thick = np.concatenate([pts + o for o in offsets])
    return quickhull(thick)


def _concavity(hull: ConvexPiece, mesh: TriMesh, face_ids: np.ndarray, extra: np.ndarray) -> float:
    """Two-sided gap between a piece's surface and its hull.

    Inward: source points buried below the hull surface. Outward: samples on
    hull facets that sit in empty space (an open cavity, a notch), measured
    to the whole mesh surface. Samples inside the mesh's material, judged by
    the winding number, are not gaps; they are where cuts through a solid
    leave the hull open.
    """
    faces = mesh.faces[face_ids]
    tris = mesh.vertices[faces]
    src = np.concatenate([mesh.vertices[np.unique(faces)], tris.mean(axis=1), mesh.vertices[extra]])
    inward = float(np.max(-hull.signed_distance(src))) if len(src) else 0.0
    facet = hull.hull_vertices[hull.hull_faces]  # (F, 3, 3)
    probes = np.einsum("sk,fkd->fsd", _FACET_SAMPLES, facet).reshape(-1, 3)
    empty = np.abs(winding_numbers(probes, mesh.vertices, mesh.faces)) < MATERIAL_WINDING
    outward = float(points_to_triangles(probes[empty], mesh.vertices, mesh.faces).max()) if empty.any() else 0.0
    return max(inward, outward)


@dataclass
class _Cell:
    faces: np.ndarray
    extra: np.ndarray
    depth: int
    hull: ConvexPiece
    concavity: float
    stuck: bool = False


def _make_cell(mesh: TriMesh, faces: np.ndarray, extra: np.ndarray, depth: int) -> _Cell:
    pts = np.concatenate([mesh.vertices[np.unique(mesh.faces[faces])], mesh.vertices[extra]])
    hull = robust_hull(pts)
    return _Cell(faces, extra, depth, hull, _concavity(hull, mesh, faces, extra))


def _candidate_cuts(values: np.ndarray, center: float, limit: int) -> list[float]:
    """Cut positions along one axis: the vertex-centroid plane first, then
    midpoints between distinct face-centroid coordinates, thinned to ``limit``."""
    distinct = np.unique(np.round(values, 9))
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    if len(mids) > limit:
        mids = mids[np.linspace(0, len(mids) - 1, limit).round().astype(int)]
    return [center] + [float(m) for m in mids if m != center]


def _split(mesh: TriMesh, cell: _Cell, params: "DecompositionParams") -> tuple[_Cell, _Cell] | None:
    """Best axis-aligned cut of the cell's faces.

    Every candidate plane is scored by the worse of the two child
    concavities, then by their sum; the first best candidate wins, which
    keeps the choice deterministic.
    """
    tris = mesh.vertices[mesh.faces[cell.faces]]
    centroids = tris.mean(axis=1)
    pts = np.concatenate([tris.reshape(-1, 3), mesh.vertices[cell.extra]])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = mesh.vertices[np.unique(mesh.faces[cell.faces])].mean(axis=0)
    best, best_score = None, None
    for axis in np.argsort(-(hi - lo), kind="stable"):
        for cut in _candidate_cuts(centroids[:, axis], float(center[axis]), params.split_candidates):
            side = centroids[:, axis] < cut
            if side.all() or not side.any():
                continue
            extra_side = mesh.vertices[cell.extra, axis] < cut if len(cell.extra) else np.zeros(0, dtype=bool)
            left = _make_cell(mesh, cell.faces[side], cell.extra[extra_side], cell.depth + 1)
            right = _make_cell(mesh, cell.faces[~side], cell.extra[~extra_side], cell.depth + 1)
            score = (max(left.concavity, right.concavity), left.concavity + right.concavity)
            if best_score is None or score < best_score:
                best, best_score = (left, right), score
    return best


def convex_decompose(mesh: TriMesh, params: DecompositionParams | None = None) -> list[ConvexPiece]:
    """Split ``mesh`` into convex pieces whose concavity is under the threshold.

    The worst cell is split first so the piece budget goes where the shape is
    least convex. Pieces that hit ``max_depth``, the piece budget, or cannot be
    split further carry ``depth_limited=True`` if still over the threshold.
    """
    params = params or DecompositionParams()
    if mesh.n_faces == 0:
        raise ValueError("cannot decompose an empty mesh")
    referenced = np.zeros(mesh.n_vertices, dtype=bool)
    referenced[mesh.faces.ravel()] = True
    cells = [_make_cell(mesh, np.arange(mesh.n_faces), np.flatnonzero(~referenced), 0)]

    while len(cells) < params.max_pieces:
        open_cells = [
            i for i, c in enumerate(cells)
            if c.concavity > params.concavity_thresh and c.depth < params.max_depth and not c.stuck
        ]
        if not open_cells:
            break
        worst = max(open_cells, key=lambda i: (cells[i].concavity, -i))
        halves = _split(mesh, cells[worst], params)
        if halves is None:
            cells[worst].stuck = True
            continue
        cells[worst : worst + 1] = list(halves)

    return [
        ConvexPiece(
            c.hull.hull_vertices,
            c.hull.hull_faces,
            source_faces=tuple(int(f) for f in c.faces),
            depth_limited=c.concavity > params.concavity_thresh,
            concavity=c.concavity,
        )
        for c in cells
    ]
