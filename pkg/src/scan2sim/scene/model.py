"""Annotated scene types and the v1 annotation interchange format."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Literal

import numpy as np

from ..errors import DanglingReferenceError, EmptyNodeError, ParseError, SchemaError, UnknownIdError
from .mesh import TriMesh, read_mesh, write_mesh

SCHEMA_VERSION = "1"
REGION_KINDS = ("fixed", "movable", "graspable")
NodeKind = Literal["object", "part"]
JointType = Literal["revolute", "prismatic"]

_NODE_KEYS = {"id", "label", "kind", "parent", "faces", "regions"}
_ARTICULATION_KEYS = {"part_id", "joint_type", "axis", "pivot", "range"}


@dataclass(frozen=True)
class InstanceNode:
    id: str
    label: str
    kind: NodeKind
    parent: str | None = None
    faces: frozenset[int] = frozenset()
    regions: dict[str, frozenset[int]] = field(default_factory=dict)

    def region(self, kind: str) -> frozenset[int]:
        return self.regions.get(kind, frozenset())


@dataclass(frozen=True)
class ArticulationSpec:
    part_id: str
    joint_type: JointType
    axis: tuple[float, float, float]
    pivot: tuple[float, float, float]
    range: tuple[float, float]

    def __post_init__(self) -> None:
        if self.joint_type not in ("revolute", "prismatic"):
            raise SchemaError(f"unknown joint_type {self.joint_type!r}")
        if abs(math.sqrt(sum(c * c for c in self.axis)) - 1.0) > 1e-6:
            raise SchemaError(f"articulation axis of {self.part_id!r} is not unit length")
        if not self.range[0] <= self.range[1]:
            raise SchemaError(f"articulation range of {self.part_id!r} has lo > hi")


@dataclass(frozen=True, eq=False)
class AnnotatedScene:
    """Scene mesh plus instance segmentation, regions and articulations.

    Always z-up and in meters.
    """

    mesh: TriMesh
    nodes: tuple[InstanceNode, ...]
    articulations: tuple[ArticulationSpec, ...] = ()

    up_axis = "Z"
    unit = "meters"

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "articulations", tuple(self.articulations))
        _check_scene(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnnotatedScene):
            return NotImplemented
        return self.mesh == other.mesh and self.nodes == other.nodes and self.articulations == other.articulations

    __hash__ = None  # type: ignore[assignment]

    def node(self, node_id: str) -> InstanceNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownIdError(f"no node with id {node_id!r}")

    def children(self, node_id: str) -> list[InstanceNode]:
        return [n for n in self.nodes if n.parent == node_id]

    def articulation_for(self, part_id: str) -> ArticulationSpec | None:
        for art in self.articulations:
            if art.part_id == part_id:
                return art
        return None

    def subtree_faces(self, node_id: str) -> list[int]:
        """Faces of the node and all its descendants, sorted."""
        faces = set(self.node(node_id).faces)
        for child in self.children(node_id):
            faces.update(self.subtree_faces(child.id))
        return sorted(faces)

    def owned_faces(self) -> list[int]:
        return sorted(f for n in self.nodes for f in n.faces)


def _check_scene(scene: AnnotatedScene) -> None:
    n_faces = scene.mesh.n_faces
    by_id: dict[str, InstanceNode] = {}
    for node in scene.nodes:
        if node.id in by_id:
            raise SchemaError(f"duplicate node id {node.id!r}")
        if node.kind not in ("object", "part"):
            raise SchemaError(f"node {node.id!r} has unknown kind {node.kind!r}")
        by_id[node.id] = node
    owner: dict[int, str] = {}
    for node in scene.nodes:
        if node.parent is not None:
            if node.parent not in by_id:
                raise DanglingReferenceError(f"node {node.id!r} names missing parent {node.parent!r}")
            if node.kind == "object":
                raise SchemaError(f"object {node.id!r} must not have a parent")
            if by_id[node.parent].kind != "object":
                raise SchemaError(f"parent of part {node.id!r} must be an object")
        for f in node.faces:
            if not 0 <= f < n_faces:
                raise DanglingReferenceError(f"node {node.id!r} cites missing face {f}")
            if f in owner:
                raise SchemaError(f"face {f} is owned by both {owner[f]!r} and {node.id!r}")
            owner[f] = node.id
        for kind, region in node.regions.items():
            if kind not in REGION_KINDS:
                raise SchemaError(f"node {node.id!r} has unknown region kind {kind!r}")
            stray = set(region) - set(node.faces)
            if stray:
                raise DanglingReferenceError(
                    f"region {kind!r} of {node.id!r} cites faces outside the node: {sorted(stray)[:5]}"
                )
    seen_parts = set()
    for art in scene.articulations:
        if art.part_id not in by_id:
            raise DanglingReferenceError(f"articulation names missing part {art.part_id!r}")
        if by_id[art.part_id].kind != "part":
            raise SchemaError(f"articulation target {art.part_id!r} is not a part")
        if art.part_id in seen_parts:
            raise SchemaError(f"part {art.part_id!r} has more than one articulation")
        seen_parts.add(art.part_id)


# -- annotation JSON -----------------------------------------------------------


def _face_list(value: Any, where: str) -> frozenset[int]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise SchemaError(f"{where} must be a list of integers")
    return frozenset(value)


def _vec(value: Any, n: int, where: str) -> tuple[float, ...]:
    if (
        not isinstance(value, list)
        or len(value) != n
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise SchemaError(f"{where} must be a list of {n} numbers")
    if not all(math.isfinite(v) for v in value):
        raise SchemaError(f"{where} must be finite")
    return tuple(float(v) for v in value)


def annotations_from_dict(doc: Any) -> tuple[list[InstanceNode], list[ArticulationSpec]]:
    if not isinstance(doc, dict):
        raise SchemaError("annotation document must be a JSON object")
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported annotation schema version {doc.get('version')!r}")
    extra = set(doc) - {"version", "nodes", "articulations"}
    if extra:
        raise SchemaError(f"unknown top-level fields {sorted(extra)}")
    nodes = []
    for i, raw in enumerate(doc.get("nodes", [])):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where} must be an object")
        extra = set(raw) - _NODE_KEYS
        if extra:
            raise SchemaError(f"{where} has unknown fields {sorted(extra)}")
        for key in ("id", "label", "kind"):
            if not isinstance(raw.get(key), str) or not raw[key]:
                raise SchemaError(f"{where}.{key} must be a nonempty string")
        if raw["kind"] not in ("object", "part"):
            raise SchemaError(f"{where}.kind must be 'object' or 'part'")
        parent = raw.get("parent")
        if parent is not None and not isinstance(parent, str):
            raise SchemaError(f"{where}.parent must be a string or null")
        regions_raw = raw.get("regions", {})
        if not isinstance(regions_raw, dict):
            raise SchemaError(f"{where}.regions must be an object")
        regions = {}
        for kind, faces in regions_raw.items():
            if kind not in REGION_KINDS:
                raise SchemaError(f"{where}.regions has unknown kind {kind!r}")
            regions[kind] = _face_list(faces, f"{where}.regions.{kind}")
        nodes.append(
            InstanceNode(
                id=raw["id"],
                label=raw["label"],
                kind=raw["kind"],
                parent=parent,
                faces=_face_list(raw.get("faces", []), f"{where}.faces"),
                regions=regions,
            )
        )
    articulations = []
    for i, raw in enumerate(doc.get("articulations", [])):
        where = f"articulations[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where} must be an object")
        if set(raw) != _ARTICULATION_KEYS:
            raise SchemaError(f"{where} must have exactly the fields {sorted(_ARTICULATION_KEYS)}")
        if not isinstance(raw["part_id"], str):
            raise SchemaError(f"{where}.part_id must be a string")
        articulations.append(
            ArticulationSpec(
                part_id=raw["part_id"],
                joint_type=raw["joint_type"],
                axis=_vec(raw["axis"], 3, f"{where}.axis"),
                pivot=_vec(raw["pivot"], 3, f"{where}.pivot"),
                range=_vec(raw["range"], 2, f"{where}.range"),
            )
        )
    return nodes, articulations


def annotations_to_dict(scene: AnnotatedScene) -> dict:
    nodes = []
    for n in scene.nodes:
        nodes.append(
            {
                "id": n.id,
                "label": n.label,
                "kind": n.kind,
                "parent": n.parent,
                "faces": sorted(n.faces),
                "regions": {k: sorted(v) for k, v in sorted(n.regions.items())},
            }
        )
    arts = [
        {
            "part_id": a.part_id,
            "joint_type": a.joint_type,
            "axis": list(a.axis),
            "pivot": list(a.pivot),
            "range": list(a.range),
        }
        for a in scene.articulations
    ]
    return {"version": SCHEMA_VERSION, "nodes": nodes, "articulations": arts}


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def load_scene(mesh_path: str | os.PathLike, annotation_path: str | os.PathLike) -> AnnotatedScene:
    mesh = read_mesh(mesh_path)
    try:
        doc = json.loads(Path(annotation_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{annotation_path}: {exc}") from None
    nodes, articulations = annotations_from_dict(doc)
    owner: list[str | None] = [None] * mesh.n_faces
    for node in nodes:
        for f in node.faces:
            if 0 <= f < mesh.n_faces:
                owner[f] = node.id
    mesh = TriMesh(mesh.vertices, mesh.faces, tuple(owner))
    return AnnotatedScene(mesh, tuple(nodes), tuple(articulations))


def save_scene(scene: AnnotatedScene, mesh_path: str | os.PathLike, annotation_path: str | os.PathLike) -> None:
    write_mesh(scene.mesh, mesh_path)
    Path(annotation_path).write_text(canonical_json(annotations_to_dict(scene)), encoding="utf-8")


def make_scene(mesh: TriMesh, nodes: Iterable[InstanceNode], articulations: Iterable[ArticulationSpec] = ()) -> AnnotatedScene:
    """Build a scene and stamp face ownership onto the mesh."""
    nodes = tuple(nodes)
    owner: list[str | None] = [None] * mesh.n_faces
    for node in nodes:
        for f in node.faces:
            if 0 <= f < mesh.n_faces:
                owner[f] = node.id
    return AnnotatedScene(TriMesh(mesh.vertices, mesh.faces, tuple(owner)), nodes, tuple(articulations))


# -- queries -------------------------------------------------------------------


def face_vertex_ids(mesh: TriMesh, face_ids: Iterable[int]) -> np.ndarray:
    ids = np.fromiter(face_ids, dtype=np.int64)
    if len(ids) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.unique(mesh.faces[ids])


def node_aabb(scene: AnnotatedScene, node_id: str, *, include_parts: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Tight axis-aligned box over the vertices used by the node's faces."""
    node = scene.node(node_id)
    faces = scene.subtree_faces(node_id) if include_parts else sorted(node.faces)
    verts = face_vertex_ids(scene.mesh, faces)
    if len(verts) == 0:
        raise EmptyNodeError(f"node {node_id!r} owns no faces")
    pts = scene.mesh.vertices[verts]
    return pts.min(axis=0), pts.max(axis=0)
