"""Compile an annotated scene into a simulation-ready bundle.

Scanned meshes break simulators in four ways: they are non-convex, objects
with missing geometry tip over, dense meshes are slow, and objects float
where the scan missed the surface below them. The bundle addresses each:
convex collision pieces for moving bodies, a fixed joint anchoring the
target's object, per-class decimation with the static scene merged into
single meshes, and optional snapping onto the supporting plane.
"""

from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import NoArticulation, NoGraspRegion, PrimExists, UnknownPath
from .geometry.decimate import TooSmallWarning, decimate_quadric, target_face_count
from .geometry.decompose import DecompositionParams, convex_decompose
from .geometry.hull import ConvexPiece
from .geometry.ransac import RansacParams, ransac_plane
from .geometry.weld import merge_weld
from .scene.mesh import TriMesh
from .scene.model import REGION_KINDS, AnnotatedScene, ArticulationSpec, InstanceNode, canonical_json, face_vertex_ids, node_aabb
from .usd.flavors import JOINTS_SCOPE, joint_prim, mesh_prim, prim_name
from .fileio import atomic_write_text
from .usd.usda import Prim, UsdDocument, emit_usda

STRUCTURAL_LABELS = frozenset({"wall", "floor", "ceiling", "door frame"})
ROBOT_STANDOFF = 0.55
ROBOT_REACH = 0.85
PRISMATIC_SUCCESS = 0.2
REVOLUTE_SUCCESS = 0.5
GRASP_SLACK = 0.05
SNAP_CLEARANCE = 1e-3
WELD_EPS = 1e-6
WORLD_PRIM = "world"
COLLIDERS_SCOPE = "colliders"

NodeClass = Literal["structural", "static_obj", "manipulated"]


@dataclass(frozen=True)
class DecimationPolicy:
    structural_ratio: float = 0.10
    static_ratio: float = 0.30
    # the manipulated object always stays at full resolution
    manipulated: bool = True

    def __post_init__(self) -> None:
        for r in (self.structural_ratio, self.static_ratio):
            if not 0.0 < r <= 1.0:
                raise ValueError(f"decimation ratio {r} outside (0, 1]")


@dataclass(frozen=True)
class SimTaskConfig:
    target_part_id: str
    grasp_point: tuple[float, float, float]
    articulation: ArticulationSpec
    robot_standoff: float = ROBOT_STANDOFF
    robot_reach: float = ROBOT_REACH
    success_threshold: float = PRISMATIC_SUCCESS

    def __post_init__(self) -> None:
        if not self.robot_standoff < self.robot_reach:
            raise ValueError("robot standoff must be less than its reach")

    def to_dict(self) -> dict:
        art = self.articulation
        return {
            "target_part_id": self.target_part_id,
            "grasp_point": list(self.grasp_point),
            "joint": {
                "type": art.joint_type,
                "axis": list(art.axis),
                "pivot": list(art.pivot),
                "range": list(art.range),
            },
            "robot_standoff": self.robot_standoff,
            "robot_reach": self.robot_reach,
            "success_threshold": self.success_threshold,
        }


@dataclass
class SimBundle:
    usd: UsdDocument
    collision_pieces: dict[str, list[ConvexPiece]]
    task: SimTaskConfig
    report: dict = field(default_factory=dict)


# -- individual fixes ----------------------------------------------------------


def compute_grasp_point(scene: AnnotatedScene, part_id: str) -> np.ndarray:
    """Mean of the distinct vertices of the part's graspable faces."""
    region = scene.node(part_id).region("graspable")
    if not region:
        raise NoGraspRegion(f"part {part_id!r} has no graspable region")
    verts = face_vertex_ids(scene.mesh, sorted(region))
    return scene.mesh.vertices[verts].mean(axis=0)


def classify_structural(
    node: InstanceNode,
    manipulated=frozenset(),
    structural_labels=STRUCTURAL_LABELS,
) -> NodeClass:
    if node.id in manipulated:
        return "manipulated"
    if node.label.strip().lower() in structural_labels:
        return "structural"
    return "static_obj"


def _joint_scope_path(prim_path: str) -> str:
    parent = prim_path.rsplit("/", 1)[0]
    return f"{parent}/{JOINTS_SCOPE}"


def fix_to_ground(doc: UsdDocument, prim_path: str) -> UsdDocument:
    """Anchor a body to the world with a fixed joint.

    The body stays dynamic (no kinematic flag), so articulated parts attached
    to it still move. Returns a new document; ``doc`` is never modified.
    """
    prim = doc.prim_at(prim_path)
    if prim.type_name != "Mesh" or "points" not in prim.attributes:
        raise UnknownPath(f"{prim_path!r} does not carry a mesh")
    out = copy.deepcopy(doc)
    scope_path = _joint_scope_path(prim_path)
    joint_name = f"{prim.name}_fixed"
    if out.has_prim(f"{scope_path}/{joint_name}"):
        raise PrimExists(f"joint {scope_path}/{joint_name} already exists")
    parent_path = prim_path.rsplit("/", 1)[0] or "/"
    parent = out.prim_at(parent_path)
    world_path = f"{parent_path.rstrip('/')}/{WORLD_PRIM}"
    if parent.child(WORLD_PRIM) is None:
        parent.add_child(Prim(name=WORLD_PRIM, type_name="Xform"))
    scope = parent.child(JOINTS_SCOPE)
    if scope is None:
        scope = parent.add_child(Prim(name=JOINTS_SCOPE, type_name="Scope"))
    joint = Prim(name=joint_name, type_name="PhysicsFixedJoint")
    joint.relationships["physics:body0"] = world_path
    joint.relationships["physics:body1"] = prim_path
    scope.add_child(joint)
    return out


def snap_to_surface(
    scene: AnnotatedScene,
    object_id: str,
    support_id: str,
    params: RansacParams | None = None,
    clearance: float = SNAP_CLEARANCE,
) -> np.ndarray:
    """Vertical translation that rests the object's box on the support's top plane.

    The plane comes from horizontal RANSAC on the support's vertices and is
    evaluated below the object's box center; ``clearance`` is kept between
    them. x and y are unchanged.
    """
    lo, hi = node_aabb(scene, object_id, include_parts=True)
    support = scene.node(support_id)
    pts = scene.mesh.vertices[face_vertex_ids(scene.mesh, support.faces)]
    plane = ransac_plane(pts, params or RansacParams(), "horizontal")
    cx, cy = (lo[:2] + hi[:2]) / 2.0
    n = plane.normal
    z_plane = (plane.offset - n[0] * cx - n[1] * cy) / n[2]
    return np.array([0.0, 0.0, z_plane + clearance - lo[2]])


# -- bundle --------------------------------------------------------------------


def _decimate(mesh: TriMesh, ratio: float) -> tuple[TriMesh, bool]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TooSmallWarning)
        out = decimate_quadric(mesh, ratio)
    return out, any(issubclass(w.category, TooSmallWarning) for w in caught)


def _subtree(scene: AnnotatedScene, node_id: str) -> list[str]:
    out = [node_id]
    for child in scene.children(node_id):
        out += _subtree(scene, child.id)
    return out


def _collider_prims(name: str, body_path: str, pieces: list[ConvexPiece]) -> Prim:
    group = Prim(name=name, type_name="Scope")
    for k, piece in enumerate(pieces):
        hull = TriMesh(piece.hull_vertices, piece.hull_faces)
        prim = mesh_prim(f"piece_{k}", hull)
        prim.relationships["physics:body"] = body_path
        prim.set("collision:concavity", "double", piece.concavity)
        prim.set("collision:depthLimited", "bool", piece.depth_limited)
        group.add_child(prim)
    return group


def build_sim_bundle(
    scene: AnnotatedScene,
    target_part_id: str,
    policy: DecimationPolicy | None = None,
    decomp_params: DecompositionParams | None = None,
    *,
    structural_labels=STRUCTURAL_LABELS,
    support_id: str | None = None,
    weld_eps: float = WELD_EPS,
    seed: int = 0,
) -> SimBundle:
    """Decimate and merge the static scene, keep the target articulated object
    at full resolution with convex colliders, anchor it, and emit a task config.

    With ``support_id`` the target object is also snapped onto that node's
    top plane through a translate on its bodies; ``seed`` drives that plane fit.
    """
    policy = policy or DecimationPolicy()
    decomp_params = decomp_params or DecompositionParams()
    part = scene.node(target_part_id)
    art = scene.articulation_for(target_part_id)
    if art is None:
        raise NoArticulation(f"{target_part_id!r} has no articulation")
    grasp = compute_grasp_point(scene, target_part_id)
    if part.parent is None:
        raise NoArticulation(f"{target_part_id!r} has no parent object to articulate against")
    object_id = part.parent
    manipulated = frozenset(_subtree(scene, object_id))

    report: dict = {"target_part_id": target_part_id, "target_object_id": object_id, "nodes": {}, "merged": {}, "fixes": []}
    groups: dict[str, list[tuple[str, TriMesh]]] = {"structural": [], "static_obj": []}
    dynamic: list[tuple[InstanceNode, TriMesh, list[int]]] = []
    for node in scene.nodes:
        cls = classify_structural(node, manipulated, structural_labels)
        entry = {"class": cls, "faces_before": len(node.faces)}
        report["nodes"][node.id] = entry
        if not node.faces:
            entry["faces_after"] = 0
            continue
        face_ids = sorted(node.faces)
        sub, _ = scene.mesh.submesh(face_ids)
        if cls == "manipulated":
            entry["faces_after"] = sub.n_faces
            dynamic.append((node, sub, face_ids))
            continue
        ratio = policy.structural_ratio if cls == "structural" else policy.static_ratio
        dec, too_small = _decimate(sub, ratio)
        entry.update(faces_after=dec.n_faces, keep_ratio=ratio, target_faces=target_face_count(sub.n_faces, ratio))
        if too_small:
            entry["note"] = "below the decimation minimum; kept unchanged"
        if dec.n_faces < sub.n_faces:
            report["fixes"].append({"fix": "decimate", "node": node.id, "faces": [sub.n_faces, dec.n_faces]})
        groups[cls].append((node.id, dec))

    doc = UsdDocument()
    root = doc.root
    for prim_label, cls, ratio in (("static_structural", "structural", policy.structural_ratio), ("static_objects", "static_obj", policy.static_ratio)):
        members = groups[cls]
        if not members:
            continue
        welded = merge_weld([m for _, m in members], weld_eps)
        prim = mesh_prim(prim_label, welded.mesh)
        prim.set("label", "string", prim_label)
        prim.set("sim:role", "token", "static")
        prim.set("sim:sourceIds", "token[]", [nid for nid, _ in members])
        root.add_child(prim)
        faces_in = sum(report["nodes"][nid]["faces_before"] for nid, _ in members)
        report["merged"][prim_label] = {
            "sources": [nid for nid, _ in members],
            "faces_in": faces_in,
            "faces_out": welded.mesh.n_faces,
            "face_budget": ratio * faces_in + len(members),
            "welded_vertices": welded.merged_vertices,
            "dropped_faces": welded.dropped_faces,
        }
        report["fixes"].append({"fix": "merge_static", "prim": f"/{prim_label}", "sources": len(members)})

    translation = np.zeros(3)
    if support_id is not None:
        translation = snap_to_surface(scene, object_id, support_id, RansacParams(seed=seed))
        grasp = grasp + translation
        report["fixes"].append({"fix": "snap_to_surface", "node": object_id, "support": support_id, "translation": translation.tolist()})

    names = {n.id: prim_name(n.id) for n in scene.nodes}
    pieces_by_path: dict[str, list[ConvexPiece]] = {}
    for node, sub, face_ids in dynamic:
        prim = mesh_prim(names[node.id], sub)
        local = {f: i for i, f in enumerate(face_ids)}
        for kind in REGION_KINDS:
            region = node.region(kind)
            if region:
                prim.set(f"region:{kind}", "int[]", sorted(local[f] for f in region))
        prim.set("label", "string", node.label)
        prim.set("instance_kind", "token", node.kind)
        if node.id != names[node.id]:
            prim.set("instance_id", "string", node.id)
        prim.set("physics:rigidBodyEnabled", "bool", True)
        prim.set("sim:role", "token", "dynamic")
        if support_id is not None:
            prim.set("xformOp:translate", "double3", translation.tolist())
            prim.set("xformOpOrder", "token[]", ["xformOp:translate"], uniform=True)
        root.add_child(prim)
        path = f"/{names[node.id]}"
        pieces = convex_decompose(sub, decomp_params)
        pieces_by_path[path] = pieces
        report["nodes"][node.id]["collision_pieces"] = len(pieces)
        report["nodes"][node.id]["depth_limited_pieces"] = sum(p.depth_limited for p in pieces)
        report["fixes"].append({"fix": "convex_decomposition", "prim": path, "pieces": len(pieces)})

    if pieces_by_path:
        colliders = root.add_child(Prim(name=COLLIDERS_SCOPE, type_name="Scope"))
        for path, pieces in pieces_by_path.items():
            colliders.add_child(_collider_prims(path[1:], path, pieces))

    joints = [a for a in scene.articulations if a.part_id in manipulated]
    if joints:
        scope = root.add_child(Prim(name=JOINTS_SCOPE, type_name="Scope"))
        for a in joints:
            p = scene.node(a.part_id)
            scope.add_child(joint_prim(f"{names[p.id]}_joint", a, f"/{names[p.parent]}", f"/{names[p.id]}"))

    doc = fix_to_ground(doc, f"/{names[object_id]}")
    report["fixes"].append({"fix": "fix_to_ground", "prim": f"/{names[object_id]}", "joint": f"/{JOINTS_SCOPE}/{names[object_id]}_fixed"})

    threshold = PRISMATIC_SUCCESS if art.joint_type == "prismatic" else REVOLUTE_SUCCESS
    report["success_threshold"] = {
        "value": threshold,
        "unit": "m" if art.joint_type == "prismatic" else "rad",
        "source": "task constant" if art.joint_type == "prismatic" else "package default",
    }
    task = SimTaskConfig(target_part_id, tuple(float(c) for c in grasp), art, success_threshold=threshold)
    lo, hi = node_aabb(scene, target_part_id)
    lo, hi = lo + translation - GRASP_SLACK, hi + translation + GRASP_SLACK
    if not (np.all(grasp >= lo) and np.all(grasp <= hi)):
        raise ValueError("grasp point falls outside the target part's inflated box")
    return SimBundle(doc, pieces_by_path, task, report)


def write_bundle(bundle: SimBundle, out_dir: str | Path) -> dict[str, Path]:
    """Write ``scene.usda``, ``task_config.json`` and ``report.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "scene.usda": emit_usda(bundle.usd),
        "task_config.json": canonical_json(bundle.task.to_dict()),
        "report.json": canonical_json(bundle.report),
    }
    paths = {}
    for name, text in files.items():
        atomic_write_text(out / name, text)
        paths[name] = out / name
    return paths
