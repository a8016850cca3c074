"""Parametric meshes used by fixtures and tests."""

from __future__ import annotations

import math

import numpy as np

from ..scene.mesh import TriMesh

# (axis, sign) for each box side, in a fixed order
BOX_SIDES = {
    "-x": (0, -1), "+x": (0, 1),
    "-y": (1, -1), "+y": (1, 1),
    "-z": (2, -1), "+z": (2, 1),
}


def grid_quad(origin, u, v, nu: int = 1, nv: int = 1) -> TriMesh:
    """Planar patch ``origin + s*u + t*v`` with ``nu x nv`` cells, normal along ``u x v``."""
    origin, u, v = (np.asarray(x, dtype=np.float64) for x in (origin, u, v))
    s = np.linspace(0.0, 1.0, nu + 1)
    t = np.linspace(0.0, 1.0, nv + 1)
    verts = np.array([origin + a * u + b * v for b in t for a in s])
    faces = []
    for j in range(nv):
        for i in range(nu):
            p00 = j * (nu + 1) + i
            p10, p01, p11 = p00 + 1, p00 + nu + 1, p00 + nu + 2
            faces += [(p00, p10, p11), (p00, p11, p01)]
    return TriMesh(verts, np.array(faces))


def concat(meshes) -> TriMesh:
    verts, faces, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + off)
        off += m.n_vertices
    return TriMesh(np.concatenate(verts), np.concatenate(faces))


def box(lo, hi, sides=tuple(BOX_SIDES), n: int | tuple[int, int, int] = 1) -> TriMesh:
    """Axis-aligned box built from outward-facing grid patches.

    ``sides`` picks which of ``-x +x -y +y -z +z`` to include (open boxes);
    ``n`` is the number of cells along each axis. Edge vertices are duplicated
    between sides; weld if a closed manifold is needed.
    """
    lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    counts = (n, n, n) if isinstance(n, int) else tuple(n)
    size = hi - lo
    patches = []
    for side in sides:
        axis, sign = BOX_SIDES[side]
        a, b = [k for k in range(3) if k != axis]
        origin = lo.copy()
        if sign > 0:
            origin[axis] = hi[axis]
        u = np.zeros(3)
        v = np.zeros(3)
        u[a], v[b] = size[a], size[b]
        nu, nv = counts[a], counts[b]
        # orient so u x v points outward
        if np.cross(u, v)[axis] * sign < 0:
            u, v, nu, nv = v, u, nv, nu
        patches.append(grid_quad(origin, u, v, nu, nv))
    return concat(patches)


def closed_box(lo, hi) -> TriMesh:
    """12-triangle box with 8 shared corners."""
    lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    corners = np.array([[hi[0] if i & 1 else lo[0], hi[1] if i & 2 else lo[1], hi[2] if i & 4 else lo[2]] for i in range(8)])
    faces = [
        (0, 2, 3), (0, 3, 1),  # -z
        (4, 5, 7), (4, 7, 6),  # +z
        (0, 1, 5), (0, 5, 4),  # -y
        (2, 6, 7), (2, 7, 3),  # +y
        (0, 4, 6), (0, 6, 2),  # -x
        (1, 3, 7), (1, 7, 5),  # +x
    ]
    return TriMesh(corners, np.array(faces))


def uv_sphere(radius: float = 1.0, n_lon: int = 50, n_lat: int = 51, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Closed UV sphere with ``2 * n_lon * (n_lat - 1)`` faces."""
    c = np.asarray(center, dtype=np.float64)
    verts = [c + (0.0, 0.0, radius)]
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        for j in range(n_lon):
            phi = 2 * math.pi * j / n_lon
            verts.append(c + radius * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]))
    verts.append(c + (0.0, 0.0, -radius))
    south = len(verts) - 1
    faces = []
    ring = lambda i, j: 1 + (i - 1) * n_lon + (j % n_lon)  # noqa: E731
    for j in range(n_lon):
        faces.append((0, ring(1, j), ring(1, j + 1)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c_, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces += [(a, c_, d), (a, d, b)]
    for j in range(n_lon):
        faces.append((south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)))
    return TriMesh(np.array(verts), np.array(faces))


def l_prism(size: float = 1.0, notch: float = 0.5, height: float = 0.5) -> TriMesh:
    """Closed extruded L shape: a ``size`` square with one ``notch`` corner removed."""
    s, k = size, notch
    outline = [(0, 0), (s, 0), (s, s - k), (s - k, s - k), (s - k, s), (0, s)]
    n = len(outline)
    verts = [(x, y, 0.0) for x, y in outline] + [(x, y, height) for x, y in outline]
    faces = []
    # bottom and top: fan from vertex 0 is valid for this L (vertex 0 sees all others)
    for i in range(1, n - 1):
        faces.append((0, i + 1, i))
        faces.append((n, n + i, n + i + 1))
    for i in range(n):
        j = (i + 1) % n
        faces += [(i, j, n + j), (i, n + j, n + i)]
    return TriMesh(np.array(verts, dtype=np.float64), np.array(faces))
