from .flavors import (
    FlavorKind,
    build_descriptive,
    build_flavor,
    build_geometry_focused,
    joint_prim,
    mesh_from_prim,
    mesh_prim,
    prim_name,
    scene_from_geometry_usd,
)
from .usda import Prim, TypedValue, UsdDocument, canonical_usda, emit_usda, parse_usda

__all__ = [
    "FlavorKind",
    "Prim",
    "TypedValue",
    "UsdDocument",
    "build_descriptive",
    "build_flavor",
    "build_geometry_focused",
    "canonical_usda",
    "emit_usda",
    "joint_prim",
    "mesh_from_prim",
    "mesh_prim",
    "parse_usda",
    "prim_name",
    "scene_from_geometry_usd",
]
