from .mesh import TriMesh, read_mesh, read_obj, read_ply, write_mesh, write_obj, write_ply
from .model import (
    REGION_KINDS,
    AnnotatedScene,
    ArticulationSpec,
    InstanceNode,
    annotations_from_dict,
    annotations_to_dict,
    canonical_json,
    face_vertex_ids,
    load_scene,
    make_scene,
    node_aabb,
    save_scene,
)

__all__ = [
    "REGION_KINDS",
    "AnnotatedScene",
    "ArticulationSpec",
    "InstanceNode",
    "TriMesh",
    "annotations_from_dict",
    "annotations_to_dict",
    "canonical_json",
    "face_vertex_ids",
    "load_scene",
    "make_scene",
    "node_aabb",
    "read_mesh",
    "read_obj",
    "read_ply",
    "save_scene",
    "write_mesh",
    "write_obj",
    "write_ply",
]
