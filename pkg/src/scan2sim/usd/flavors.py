"""Descriptive and geometry-focused USD documents built from an annotated scene."""

from __future__ import annotations

import enum
import math
import re

import numpy as np

from ..errors import PrimExists, SchemaError
from ..scene.mesh import TriMesh
from ..scene.model import REGION_KINDS, AnnotatedScene, ArticulationSpec, InstanceNode, make_scene, node_aabb
from .usda import NAME_RE, Prim, UsdDocument

JOINTS_SCOPE = "joints"
JOINT_TYPES = {"prismatic": "PhysicsPrismaticJoint", "revolute": "PhysicsRevoluteJoint"}
MESH_ATTRS = ("points", "faceVertexIndices", "faceVertexCounts")


class FlavorKind(enum.Enum):
    DESCRIPTIVE = "descriptive"
    GEOMETRY_FOCUSED = "geometry_focused"


def prim_name(node_id: str) -> str:
    """Map an instance id onto a legal prim name."""
    name = re.sub(r"[^A-Za-z0-9_]", "_", node_id)
    if not name or name[0].isdigit():
        name = "_" + name
    return name


def _name_map(scene: AnnotatedScene) -> dict[str, str]:
    names: dict[str, str] = {}
    taken: dict[str, str] = {}
    for node in scene.nodes:
        name = prim_name(node.id)
        if name in taken:
            raise SchemaError(f"ids {taken[name]!r} and {node.id!r} map to the same prim name {name!r}")
        taken[name] = node.id
        names[node.id] = name
    return names


def joint_limits(art: ArticulationSpec) -> tuple[float, float]:
    """Limits in simulator units: meters for prismatic, degrees for revolute."""
    lo, hi = art.range
    if art.joint_type == "revolute":
        return math.degrees(lo), math.degrees(hi)
    return lo, hi


def mesh_prim(name: str, mesh: TriMesh, type_name: str = "Mesh") -> Prim:
    prim = Prim(name=name, type_name=type_name)
    prim.set("points", "point3f[]", mesh.vertices.tolist())
    prim.set("faceVertexIndices", "int[]", mesh.faces.ravel().tolist())
    prim.set("faceVertexCounts", "int[]", [3] * mesh.n_faces)
    return prim


def mesh_from_prim(prim: Prim) -> TriMesh:
    counts = prim.get("faceVertexCounts", ())
    if any(c != 3 for c in counts):
        raise SchemaError(f"mesh prim {prim.name!r} has non-triangular faces")
    points = np.array(prim.get("points", ()), dtype=np.float64).reshape(-1, 3)
    faces = np.array(prim.get("faceVertexIndices", ()), dtype=np.int64).reshape(-1, 3)
    return TriMesh(points, faces)


def joint_prim(name: str, art: ArticulationSpec, body0: str | None, body1: str) -> Prim:
    prim = Prim(name=name, type_name=JOINT_TYPES[art.joint_type])
    prim.relationships["physics:body0"] = body0
    prim.relationships["physics:body1"] = body1
    lo, hi = joint_limits(art)
    prim.set("physics:lowerLimit", "float", lo)
    prim.set("physics:upperLimit", "float", hi)
    prim.set("physics:localPos0", "float3", art.pivot)
    prim.set("physics:localPos1", "float3", art.pivot)
    prim.set("articulation:axis", "double3", art.axis)
    prim.set("articulation:pivot", "double3", art.pivot)
    prim.set("articulation:jointType", "token", art.joint_type)
    return prim


def _articulation_attrs(prim: Prim, art: ArticulationSpec) -> None:
    prim.set("joint_type", "token", art.joint_type)
    prim.set("axis", "double3", art.axis)
    prim.set("pivot", "double3", art.pivot)
    prim.set("range", "double2", art.range)


def build_descriptive(scene: AnnotatedScene) -> UsdDocument:
    """Labels, boxes, hierarchy and articulation only; never any mesh arrays."""
    names = _name_map(scene)
    doc = UsdDocument()
    prims: dict[str, Prim] = {}
    for node in scene.nodes:
        prim = Prim(name=names[node.id], type_name="Xform")
        prim.set("label", "string", node.label)
        prim.set("instance_kind", "token", node.kind)
        if node.id != names[node.id]:
            prim.set("instance_id", "string", node.id)
        faces = scene.subtree_faces(node.id)
        if faces:
            lo, hi = node_aabb(scene, node.id, include_parts=True)
            prim.set("bbox_min", "double3", lo.tolist())
            prim.set("bbox_max", "double3", hi.tolist())
        art = scene.articulation_for(node.id)
        if art is not None:
            _articulation_attrs(prim, art)
        prims[node.id] = prim
    for node in scene.nodes:
        parent = doc.root if node.parent is None else prims[node.parent]
        parent.add_child(prims[node.id])
    return doc


def build_geometry_focused(scene: AnnotatedScene, root_prim: str | None = None) -> UsdDocument:
    """Flat layout: every node is a sibling body; hierarchy lives only in joints.

    With ``root_prim`` the bodies and the joint scope are placed under a single
    Xform of that name, which also becomes the layer's ``defaultPrim``.
    """
    names = _name_map(scene)
    doc = UsdDocument()
    base = doc.root
    prefix = ""
    if root_prim is not None:
        if not NAME_RE.match(root_prim):
            raise ValueError(f"invalid root prim name {root_prim!r}")
        base = doc.root.add_child(Prim(name=root_prim, type_name="Xform"))
        doc.layer_metadata["defaultPrim"] = root_prim
        prefix = f"/{root_prim}"
    if JOINTS_SCOPE in names.values() and scene.articulations:
        raise SchemaError(f"node name {JOINTS_SCOPE!r} collides with the joint scope")

    for node in scene.nodes:
        face_ids = sorted(node.faces)
        if face_ids:
            sub, _ = scene.mesh.submesh(face_ids)
            prim = mesh_prim(names[node.id], sub)
            local = {f: i for i, f in enumerate(face_ids)}
            for kind in REGION_KINDS:
                region = node.region(kind)
                if region:
                    prim.set(f"region:{kind}", "int[]", sorted(local[f] for f in region))
        else:
            prim = Prim(name=names[node.id], type_name="Xform")
        prim.set("label", "string", node.label)
        prim.set("instance_kind", "token", node.kind)
        if node.id != names[node.id]:
            prim.set("instance_id", "string", node.id)
        base.add_child(prim)

    if scene.articulations:
        scope = base.add_child(Prim(name=JOINTS_SCOPE, type_name="Scope"))
        for art in scene.articulations:
            part = scene.node(art.part_id)
            joint_name = f"{names[part.id]}_joint"
            if scope.child(joint_name) is not None:
                raise PrimExists(f"joint name collision: {joint_name}")
            body0 = f"{prefix}/{names[part.parent]}" if part.parent is not None else None
            scope.add_child(joint_prim(joint_name, art, body0, f"{prefix}/{names[part.id]}"))
    return doc


def build_flavor(scene: AnnotatedScene, kind: FlavorKind | str) -> UsdDocument:
    kind = FlavorKind(kind)
    if kind is FlavorKind.DESCRIPTIVE:
        return build_descriptive(scene)
    return build_geometry_focused(scene)


def scene_from_geometry_usd(doc: UsdDocument) -> AnnotatedScene:
    """Rebuild an annotated scene from a geometry-focused document.

    Face ids are renumbered in prim order; joints restore part parents and
    articulations.
    """
    base = doc.root
    if doc.default_prim is not None and len(doc.root.children) == 1:
        base = doc.root.children[0]
    prefix = "" if base is doc.root else f"/{base.name}"
    vertices: list[np.ndarray] = []
    faces: list[np.ndarray] = []
    by_path: dict[str, str] = {}
    pending: list[tuple[Prim, list[int]]] = []
    offset_v = offset_f = 0
    for prim in base.children:
        if prim.name == JOINTS_SCOPE and prim.type_name == "Scope":
            continue
        node_id = prim.get("instance_id", prim.name)
        by_path[f"{prefix}/{prim.name}"] = node_id
        face_ids: list[int] = []
        if prim.type_name == "Mesh":
            mesh = mesh_from_prim(prim)
            vertices.append(mesh.vertices)
            faces.append(mesh.faces + offset_v)
            face_ids = list(range(offset_f, offset_f + mesh.n_faces))
            offset_v += mesh.n_vertices
            offset_f += mesh.n_faces
        pending.append((prim, face_ids))

    parents: dict[str, str] = {}
    articulations = []
    scope = base.child(JOINTS_SCOPE)
    for joint in scope.children if scope is not None else []:
        jt = joint.get("articulation:jointType")
        if jt not in JOINT_TYPES:
            continue
        body1 = by_path.get(joint.relationships.get("physics:body1") or "")
        body0 = by_path.get(joint.relationships.get("physics:body0") or "")
        if body1 is None:
            raise SchemaError(f"joint {joint.name!r} has no valid body1")
        if body0 is not None:
            parents[body1] = body0
        lo, hi = joint.get("physics:lowerLimit"), joint.get("physics:upperLimit")
        if jt == "revolute":
            lo, hi = math.radians(lo), math.radians(hi)
        articulations.append(
            ArticulationSpec(body1, jt, tuple(joint.get("articulation:axis")), tuple(joint.get("articulation:pivot")), (lo, hi))
        )

    nodes = []
    for prim, face_ids in pending:
        node_id = prim.get("instance_id", prim.name)
        regions = {}
        for kind in REGION_KINDS:
            local = prim.get(f"region:{kind}")
            if local:
                regions[kind] = frozenset(face_ids[i] for i in local)
        nodes.append(
            InstanceNode(
                id=node_id,
                label=prim.get("label", node_id),
                kind=prim.get("instance_kind", "object"),
                parent=parents.get(node_id),
                faces=frozenset(face_ids),
                regions=regions,
            )
        )
    verts = np.concatenate(vertices) if vertices else np.zeros((0, 3))
    tris = np.concatenate(faces) if faces else np.zeros((0, 3), dtype=np.int64)
    return make_scene(TriMesh(verts, tris), nodes, articulations)
