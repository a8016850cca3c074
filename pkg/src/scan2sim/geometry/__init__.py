from .aabb import DEFAULT_MARGIN, Aabb, aabb_overlap
from .decimate import TooSmallWarning, decimate_quadric, target_face_count
from .decompose import DecompositionParams, convex_decompose, robust_hull
from .distance import points_to_triangles
from .hull import ConvexPiece, quickhull
from .ransac import (
    PlaneSurface,
    RansacParams,
    canonical_normal,
    classify_normal,
    min_inliers_for,
    plane_basis,
    ransac_plane,
)
from .weld import WeldResult, merge_weld

__all__ = [
    "DEFAULT_MARGIN",
    "Aabb",
    "ConvexPiece",
    "DecompositionParams",
    "PlaneSurface",
    "RansacParams",
    "TooSmallWarning",
    "WeldResult",
    "aabb_overlap",
    "canonical_normal",
    "classify_normal",
    "convex_decompose",
    "decimate_quadric",
    "merge_weld",
    "min_inliers_for",
    "plane_basis",
    "points_to_triangles",
    "quickhull",
    "ransac_plane",
    "robust_hull",
    "target_face_count",
]
