"""Quadric error metric simplification by edge collapse (Garland & Heckbert)."""

from __future__ import annotations

import heapq
import math
import warnings

import numpy as np

from ..scene.mesh import TriMesh

BOUNDARY_WEIGHT = 1000.0
SINGULAR_DET = 1e-12
MIN_FACES = 4
TOO_SMALL_FACES = 8
# a collapse may not rotate any surviving face normal by more than ~78 degrees
_FLIP_COS = 0.2


class TooSmallWarning(UserWarning):
    """Mesh below the minimum size for decimation; returned unchanged."""


def target_face_count(n_faces: int, keep_ratio: float) -> int:
    return max(MIN_FACES, math.ceil(keep_ratio * n_faces - 1e-9))


def _plane_quadrics(v: np.ndarray, f: np.ndarray) -> np.ndarray:
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    norm = np.linalg.norm(n, axis=1)
    ok = norm > 0
    n[ok] /= norm[ok, None]
    n[~ok] = 0.0
    p = np.concatenate([n, -np.einsum("ij,ij->i", n, v[f[:, 0]])[:, None]], axis=1)
    return np.einsum("fi,fj->fij", p, p)


class _Collapser:
    def __init__(self, mesh: TriMesh):
        self.v = mesh.vertices.copy()
        self.f = mesh.faces.copy()
        nv, nf = len(self.v), len(self.f)
        self.face_alive = np.ones(nf, dtype=bool)
        self.vert_alive = np.zeros(nv, dtype=bool)
        self.vert_alive[np.unique(self.f)] = True
        self.vfaces: list[set[int]] = [set() for _ in range(nv)]
        for fi, face in enumerate(self.f.tolist()):
            for x in face:
                self.vfaces[x].add(fi)
        self.version = np.zeros(nv, dtype=np.int64)
        self.n_faces = nf

        self.q = np.zeros((nv, 4, 4))
        kf = _plane_quadrics(self.v, self.f)
        for k in range(3):
            np.add.at(self.q, self.f[:, k], kf)

        edge_faces: dict[tuple[int, int], list[int]] = {}
        for fi, (a, b, c) in enumerate(self.f.tolist()):
            for x, y in ((a, b), (b, c), (c, a)):
                edge_faces.setdefault((min(x, y), max(x, y)), []).append(fi)
        self.edges = sorted(edge_faces)
        for (a, b), fl in edge_faces.items():
            if len(fl) != 1:
                continue
            # constraint plane through the border edge, perpendicular to its face
            fa, fb, fc = self.f[fl[0]]
            fn = np.cross(self.v[fb] - self.v[fa], self.v[fc] - self.v[fa])
            m = np.cross(self.v[b] - self.v[a], fn)
            norm = np.linalg.norm(m)
            if norm == 0:
                continue
            m /= norm
            p = np.append(m, -m @ self.v[a])
            k = BOUNDARY_WEIGHT * np.outer(p, p)
            self.q[a] += k
            self.q[b] += k

    def neighbors(self, x: int) -> set[int]:
        out = set()
        for fi in self.vfaces[x]:
            out.update(self.f[fi].tolist())
        out.discard(x)
        return out

    def cost(self, a: int, b: int) -> tuple[float, np.ndarray]:
        q = self.q[a] + self.q[b]
        A = q[:3, :3]
        if abs(np.linalg.det(A)) < SINGULAR_DET:
            x = (self.v[a] + self.v[b]) / 2.0
        else:
            x = np.linalg.solve(A, -q[:3, 3])
        h = np.append(x, 1.0)
        return max(float(h @ q @ h), 0.0), x

    def push(self, heap: list, a: int, b: int) -> None:
        if a > b:
            a, b = b, a
        c, _ = self.cost(a, b)
        heapq.heappush(heap, (c, a, b, int(self.version[a]), int(self.version[b])))

    def can_collapse(self, a: int, b: int, x: np.ndarray, check_flips: bool) -> bool:
        shared = self.vfaces[a] & self.vfaces[b]
        if not shared:
            return False
        # link condition: keeps the surface manifold around the collapsed edge
        if len(self.neighbors(a) & self.neighbors(b)) != len(shared):
            return False
        survivors = 0
        for fi in (self.vfaces[a] | self.vfaces[b]) - shared:
            survivors += 1
            face = self.f[fi]
            old = self.v[face]
            new = old.copy()
            new[(face == a) | (face == b)] = x
            n_new = np.cross(new[1] - new[0], new[2] - new[0])
            len_new = np.linalg.norm(n_new)
            if len_new <= 1e-14:
                return False
            if check_flips:
                n_old = np.cross(old[1] - old[0], old[2] - old[0])
                len_old = np.linalg.norm(n_old)
                if len_old > 0 and (n_old @ n_new) / (len_old * len_new) < _FLIP_COS:
                    return False
        return survivors > 0 or self.n_faces - len(shared) >= MIN_FACES

    def collapse(self, a: int, b: int, x: np.ndarray) -> None:
        shared = self.vfaces[a] & self.vfaces[b]
        for fi in shared:
            self.face_alive[fi] = False
            for y in self.f[fi].tolist():
                self.vfaces[y].discard(fi)
        self.n_faces -= len(shared)
        for fi in self.vfaces[b]:
            self.f[fi][self.f[fi] == b] = a
            self.vfaces[a].add(fi)
        self.vfaces[b] = set()
        self.vert_alive[b] = False
        self.v[a] = x
        self.q[a] += self.q[b]
        self.version[a] += 1
        self.version[b] += 1

    def run(self, target: int, check_flips: bool) -> None:
        heap: list = []
        for a, b in self.edges:
            if self.vert_alive[a] and self.vert_alive[b] and self.vfaces[a] & self.vfaces[b]:
                self.push(heap, a, b)
        while heap and self.n_faces > target:
            c, a, b, va, vb = heapq.heappop(heap)
            if not (self.vert_alive[a] and self.vert_alive[b]):
                continue
            if self.version[a] != va or self.version[b] != vb:
                continue
            _, x = self.cost(a, b)
            if not self.can_collapse(a, b, x, check_flips):
                continue
            self.collapse(a, b, x)
            for w in sorted(self.neighbors(a)):
                self.push(heap, a, w)
        self.edges = sorted(
            {
                (min(x, y), max(x, y))
                for fi in np.flatnonzero(self.face_alive)
                for x, y in ((self.f[fi][0], self.f[fi][1]), (self.f[fi][1], self.f[fi][2]), (self.f[fi][2], self.f[fi][0]))
            }
        )

    def result(self, owner: tuple | None) -> TriMesh:
        alive_faces = np.flatnonzero(self.face_alive)
        faces = self.f[alive_faces]
        used = np.unique(faces)
        remap = np.full(len(self.v), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        new_owner = tuple(owner[i] for i in alive_faces) if owner is not None else None
        return TriMesh(self.v[used], remap[faces], new_owner)


def decimate_quadric(mesh: TriMesh, keep_ratio: float) -> TriMesh:
    """Reduce ``mesh`` to at most ``max(4, ceil(keep_ratio * faces))`` faces.

    ``keep_ratio == 1`` returns the input unchanged. Meshes with fewer than 8
    faces are also returned unchanged, with a :class:`TooSmallWarning`.
    """
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError(f"keep_ratio must be in (0, 1], got {keep_ratio}")
    if keep_ratio == 1.0:
        return mesh
    if mesh.n_faces < TOO_SMALL_FACES:
        warnings.warn(
            f"mesh has {mesh.n_faces} faces (< {TOO_SMALL_FACES}); not decimated", TooSmallWarning, stacklevel=2
        )
        return mesh
    target = target_face_count(mesh.n_faces, keep_ratio)
    if mesh.n_faces <= target:
        return mesh
    col = _Collapser(mesh)
    col.run(target, check_flips=True)
    if col.n_faces > target:
        # fold-over protection can stall on awkward topology; finish without it
        col.run(target, check_flips=False)
    return col.result(mesh.face_owner)
