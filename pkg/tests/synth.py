"""Synthetic data with known ground truth, shared by the geometry and acceptance tests."""

from __future__ import annotations

import numpy as np

from scan2sim.geometry.ransac import plane_basis

# (normal, offset, constraint) for the three plane orientations exercised
PLANE_CASES = {
    "horizontal": ((0.0, 0.0, 1.0), 0.8, "horizontal"),
    "vertical": ((0.6, 0.8, 0.0), 1.5, "vertical"),
    "oblique": (tuple(np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)), 0.4, "any"),
}


def noisy_plane(normal, offset, seed: int, n: int = 1000, sigma: float = 0.002, outlier_frac: float = 0.1, half: float = 1.0):
    """``n`` points on ``normal . x = offset`` with Gaussian noise plus uniform outliers.

    Inliers cover a ``2 half`` square around the plane point nearest the origin;
    outliers fill the surrounding cube.
    """
    rng = np.random.default_rng(seed)
    normal = np.asarray(normal, dtype=np.float64)
    normal = normal / np.linalg.norm(normal)
    e1, e2 = plane_basis(normal)
    center = normal * offset
    st = rng.uniform(-half, half, size=(n, 2))
    pts = center + st[:, :1] * e1 + st[:, 1:] * e2 + rng.normal(0.0, sigma, size=(n, 1)) * normal
    outliers = center + rng.uniform(-half, half, size=(int(round(outlier_frac * n)), 3))
    return np.concatenate([pts, outliers])


def plane_errors(plane, normal, offset) -> tuple[float, float]:
    """Angle in degrees and offset error of a fitted plane, sign-aligned with the truth."""
    normal = np.asarray(normal, dtype=np.float64)
    normal = normal / np.linalg.norm(normal)
    sign = 1.0 if float(plane.normal @ normal) >= 0 else -1.0
    cos = min(1.0, abs(float(plane.normal @ normal)))
    return float(np.degrees(np.arccos(cos))), abs(sign * plane.offset - offset)


def sample_surface(mesh, n: int, seed: int = 0) -> np.ndarray:
    """Area-weighted uniform samples on a triangle mesh."""
    rng = np.random.default_rng(seed)
    v, f = mesh.vertices, mesh.faces
    area = 0.5 * np.linalg.norm(np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)
    pick = rng.choice(len(f), size=n, p=area / area.sum())
    r1, r2 = rng.random(n), rng.random(n)
    s = np.sqrt(r1)
    w = np.stack([1 - s, s * (1 - r2), s * r2], axis=1)
    return np.einsum("nk,nkd->nd", w, v[f[pick]])


def sampled_hausdorff(a, b, n: int = 20000, seed: int = 0) -> float:
    """Symmetric Hausdorff distance: surface samples of each mesh to the other's triangles."""
    from scan2sim.geometry import points_to_triangles

    pa = np.concatenate([sample_surface(a, n, seed), a.vertices])
    pb = np.concatenate([sample_surface(b, n, seed + 1), b.vertices])
    d_ab = points_to_triangles(pa, b.vertices, b.faces).max()
    d_ba = points_to_triangles(pb, a.vertices, a.faces).max()
    return float(max(d_ab, d_ba))


# -- random USDA documents -----------------------------------------------------

_SCALAR_TYPES = ("bool", "int", "float", "double", "string", "token")
_TUPLE_TYPES = {"double2": 2, "float3": 3, "double3": 3}
_ARRAY_TYPES = ("int[]", "token[]", "float3[]", "point3f[]")
_NAME_HEAD = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_"
_NAME_TAIL = _NAME_HEAD + "0123456789"
_TEXT = _NAME_TAIL + " .,:;/\\\"'\t\n{}()[]@#-+=é中"


def _real(rng) -> float:
    kind = rng.randrange(6)
    if kind == 0:
        return float(rng.randint(-5, 5))
    if kind == 1:
        return rng.uniform(-1.0, 1.0) * 10.0 ** rng.randint(-300, 300)
    if kind == 2:
        return rng.choice([0.1, -0.0, 1e-320, 5e-324, 1.7976931348623157e308])
    return rng.uniform(-100.0, 100.0)


def _random_text(rng, max_len: int = 12) -> str:
    return "".join(rng.choice(_TEXT) for _ in range(rng.randrange(max_len + 1)))


def _random_name(rng) -> str:
    return rng.choice(_NAME_HEAD) + "".join(rng.choice(_NAME_TAIL) for _ in range(rng.randrange(7)))


def _random_value(rng, type_name: str):
    if rng.random() < 0.1:
        return None
    if type_name == "bool":
        return rng.random() < 0.5
    if type_name == "int":
        return rng.randint(-(2**40), 2**40)
    if type_name in ("float", "double"):
        return _real(rng)
    if type_name in ("string", "token"):
        return _random_text(rng)
    if type_name in _TUPLE_TYPES:
        return tuple(_real(rng) for _ in range(_TUPLE_TYPES[type_name]))
    if type_name == "matrix4d":
        return tuple(tuple(_real(rng) for _ in range(4)) for _ in range(4))
    if type_name == "int[]":
        return [rng.randint(-1000, 1000) for _ in range(rng.randrange(7))]
    if type_name == "token[]":
        return [_random_text(rng) for _ in range(rng.randrange(5))]
    return [tuple(_real(rng) for _ in range(3)) for _ in range(rng.randrange(5))]


def _random_prim(rng, depth: int, name: str):
    from scan2sim.usd import Prim, TypedValue

    prim = Prim(
        name=name,
        type_name=rng.choice(["", "Xform", "Mesh", "Scope", "PhysicsFixedJoint"]),
        specifier=rng.choice(["def", "def", "over"]),
        references=rng.choice([None, "objects/thing.obj", "a-b_c.usda"]),
    )
    types = _SCALAR_TYPES + tuple(_TUPLE_TYPES) + _ARRAY_TYPES + ("matrix4d",)
    names = {_random_name(rng) for _ in range(rng.randrange(5))}
    for attr in sorted(names):
        if rng.random() < 0.3:
            attr = f"ns:{attr}"
        if rng.random() < 0.2:
            prim.relationships[attr] = rng.choice([None, "/" + "/".join(_random_name(rng) for _ in range(rng.randint(1, 3)))])
        else:
            type_name = rng.choice(types)
            prim.attributes[attr] = TypedValue(type_name, _random_value(rng, type_name), rng.random() < 0.3)
    if depth > 0:
        for child in sorted({_random_name(rng) for _ in range(rng.randrange(4))}):
            prim.add_child(_random_prim(rng, depth - 1, child))
    return prim


def random_document(rng):
    """A random document over the supported subset; ``rng`` is a ``random.Random``."""
    from scan2sim.usd import UsdDocument

    doc = UsdDocument()
    for name in sorted({_random_name(rng) for _ in range(rng.randrange(5))}):
        doc.root.add_child(_random_prim(rng, 2, name))
    if doc.root.children and rng.random() < 0.5:
        doc.layer_metadata["defaultPrim"] = doc.root.children[0].name
    return doc


# -- brute-force oracles -------------------------------------------------------

COLLISION_MARGIN = 1e-3


def colliding_nodes(scene, target_id: str, position, scale: float, extent) -> list[str]:
    """Node boxes straight from vertex coordinates, per-axis interval test."""
    half = scale * np.asarray(extent) / 2.0
    lo = np.asarray(position) - half - COLLISION_MARGIN
    hi = np.asarray(position) + half + COLLISION_MARGIN
    hits = []
    for node in scene.nodes:
        if node.id == target_id or node.parent == target_id or not node.faces:
            continue
        pts = scene.mesh.vertices[scene.mesh.faces[sorted(node.faces)].ravel()]
        nlo, nhi = pts.min(axis=0) - COLLISION_MARGIN, pts.max(axis=0) + COLLISION_MARGIN
        if np.all(lo <= nhi) and np.all(nlo <= hi):
            hits.append(node.id)
    return hits


def brute_force_region_mean(scene, part_id: str) -> np.ndarray:
    """Mean of the distinct vertices touched by the part's graspable faces, summed in Python."""
    seen: set[int] = set()
    for f in scene.node(part_id).region("graspable"):
        seen.update(int(i) for i in scene.mesh.faces[f])
    coords = [scene.mesh.vertices[i] for i in sorted(seen)]
    return np.array([sum(c[k] for c in coords) / len(coords) for k in range(3)])
