from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..scene.mesh import TriMesh

_NEIGHBOR_CELLS = list(itertools.product((-1, 0, 1), repeat=3))


@dataclass(frozen=True)
class WeldResult:
    mesh: TriMesh
    dropped_faces: int
    merged_vertices: int


def merge_weld(meshes: Sequence[TriMesh], weld_eps: float) -> WeldResult:
    """Concatenate meshes and weld vertices closer than ``weld_eps``.

    Uses a uniform grid of cell size ``weld_eps``; each vertex snaps to the
    first-seen representative within reach, so output is order-deterministic.
    Faces that collapse to a repeated index are dropped and counted.
    """
    if weld_eps < 0:
        raise ValueError("weld_eps must be non-negative")
    verts = [m.vertices for m in meshes]
    faces, owners = [], []
    offset = 0
    for m in meshes:
        faces.append(m.faces + offset)
        offset += m.n_vertices
        owners.extend(m.face_owner if m.face_owner is not None else [None] * m.n_faces)
    all_v = np.concatenate(verts) if verts else np.zeros((0, 3))
    all_f = np.concatenate(faces) if faces else np.zeros((0, 3), dtype=np.int64)

    remap = np.empty(len(all_v), dtype=np.int64)
    reps: list[int] = []
    if weld_eps == 0:
        exact: dict[tuple[float, float, float], int] = {}
        for i, p in enumerate(map(tuple, all_v.tolist())):
            if p not in exact:
                exact[p] = len(reps)
                reps.append(i)
            remap[i] = exact[p]
    else:
        grid: dict[tuple[int, int, int], list[int]] = {}
        eps2 = weld_eps * weld_eps
        # cells at least eps wide keep the 27-cell search exact; the floor keeps indices finite
        scale = float(np.abs(all_v).max()) if len(all_v) else 1.0
        cell_size = max(weld_eps, scale * 2.0**-40, 1e-300)
        for i, p in enumerate(all_v.tolist()):
            cell = tuple(math.floor(c / cell_size) for c in p)
            hit = -1
            for d in _NEIGHBOR_CELLS:
                for r in grid.get((cell[0] + d[0], cell[1] + d[1], cell[2] + d[2]), ()):
                    q = all_v[reps[r]]
                    if (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2 <= eps2 and (hit < 0 or r < hit):
                        hit = r
            if hit < 0:
                hit = len(reps)
                reps.append(i)
                grid.setdefault(cell, []).append(hit)
            remap[i] = hit

    new_f = remap[all_f] if len(all_f) else all_f
    keep = (new_f[:, 0] != new_f[:, 1]) & (new_f[:, 1] != new_f[:, 2]) & (new_f[:, 0] != new_f[:, 2])
    owner = tuple(o for o, k in zip(owners, keep) if k)
    has_owner = any(m.face_owner is not None for m in meshes)
    mesh = TriMesh(all_v[reps] if reps else np.zeros((0, 3)), new_f[keep], owner if has_owner else None)
    return WeldResult(mesh, int((~keep).sum()), len(all_v) - len(reps))
