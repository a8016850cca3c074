"""Language-model guided object insertion with geometric checks.

Stages: descriptive scene for the model, placement target query, plane
detection on the target, scale query, collision-checked placement with
random in-plane retries, and a guarded script that adds the object as a
referenced prim.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .errors import DegenerateSurface, PlacementExhausted, Scan2SimError, StageError, UnknownIdError
from .geometry.aabb import DEFAULT_MARGIN, Aabb, aabb_overlap
from .geometry.ransac import PlaneSurface, RansacParams, plane_basis, ransac_plane
from .llm.backend import Backend
from .llm.queries import PlacementAnswer, query_placement, query_scale, query_script
from .scene.mesh import TriMesh
from .scene.model import AnnotatedScene, face_vertex_ids, node_aabb
from .script_guard import DEFAULT_ALLOWLIST, SANCTIONED_MODULE, apply_script, parse_script, validate
from .usd.flavors import build_descriptive, prim_name
from .usd.usda import UsdDocument, emit_usda, parse_usda

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class InsertionJob:
    scene: AnnotatedScene
    scene_usd_path: str
    object_mesh: TriMesh
    object_label: str
    seed: int = 0
    # asset path written into the reference; defaults to "<label>.obj"
    object_path: str | None = None

    def __post_init__(self) -> None:
        if self.object_mesh.n_faces == 0:
            raise ValueError("object mesh is empty")
        if not self.object_label:
            raise ValueError("object label must be nonempty")

    @property
    def asset_path(self) -> str:
        return self.object_path if self.object_path else f"{prim_name(self.object_label)}.obj"


@dataclass(frozen=True)
class InsertionConfig:
    max_attempts: int = MAX_ATTEMPTS
    margin: float = DEFAULT_MARGIN
    ransac: RansacParams = RansacParams()
    allowlist: frozenset[str] = DEFAULT_ALLOWLIST
    sanctioned_module: str = SANCTIONED_MODULE


@dataclass(frozen=True)
class PlacementResult:
    position: tuple[float, float, float]
    scale: float
    target_id: str
    attempts: int
    attempt_trace: tuple[tuple[tuple[float, float, float], tuple[str, ...]], ...]
    surface_constraint: str = "horizontal"
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "position": list(self.position),
            "scale": self.scale,
            "target_id": self.target_id,
            "attempts": self.attempts,
            "surface_constraint": self.surface_constraint,
            "attempt_trace": [{"position": list(p), "collided": list(c)} for p, c in self.attempt_trace],
            "notes": list(self.notes),
        }


# -- placement geometry --------------------------------------------------------


def extent_along(extent, direction) -> float:
    """Width of an axis-aligned box measured along ``direction``."""
    return float(np.abs(np.asarray(direction, dtype=np.float64)) @ np.asarray(extent, dtype=np.float64))


def outward_sign(surface: PlaneSurface, toward) -> float:
    """+1 or -1 so that ``sign * normal`` points from the surface toward ``toward``."""
    if toward is None:
        return 1.0
    side = float(surface.normal @ (np.asarray(toward, dtype=np.float64) - surface.mean))
    return -1.0 if side < 0 else 1.0


def compute_initial_position(
    surface: PlaneSurface,
    object_aabb: Aabb,
    constraint: Literal["horizontal", "vertical"],
    toward=None,
) -> np.ndarray:
    """Mean of the surface points, lifted by half the object's size.

    Horizontal: half the object height along +z. Vertical: half its depth
    along the surface normal, on the side facing ``toward`` (the scene
    centroid, since scans are interiors).
    """
    if len(surface.inlier_points) < 3:
        raise DegenerateSurface(f"surface has {len(surface.inlier_points)} inliers, need at least 3")
    mean = surface.mean
    extent = object_aabb.extent
    if constraint == "horizontal":
        return mean + np.array([0.0, 0.0, extent[2] / 2.0])
    if constraint == "vertical":
        depth = extent_along(extent, surface.normal)
        return mean + outward_sign(surface, toward) * surface.normal * (depth / 2.0)
    raise ValueError(f"unknown constraint {constraint!r}")


def surface_bounds_2d(surface: PlaneSurface) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """In-plane axes and the inlier AABB in those axes, relative to the inlier mean."""
    e1, e2 = plane_basis(surface.normal)
    rel = surface.inlier_points - surface.mean
    uv = np.stack([rel @ e1, rel @ e2], axis=1)
    return e1, e2, uv.min(axis=0), uv.max(axis=0)


def retry_offset(surface: PlaneSurface, rng: np.random.Generator, footprint=(0.0, 0.0)) -> np.ndarray:
    """Random in-plane displacement from the inlier mean, as ``(u, v)`` along :func:`plane_basis`.

    The displaced point stays inside the 2D box of the projected inliers,
    shrunk by the object's half ``footprint`` where the box is wide enough.
    """
    _, _, lo, hi = surface_bounds_2d(surface)
    half = np.asarray(footprint, dtype=np.float64)
    lo_s, hi_s = lo + half, hi - half
    narrow = lo_s > hi_s
    lo_s[narrow] = hi_s[narrow] = ((lo + hi) / 2.0)[narrow]
    r = rng.random(2)
    return lo_s + r * (hi_s - lo_s)


def _collision_set(scene: AnnotatedScene, target_id: str) -> list[tuple[str, Aabb]]:
    excluded = {target_id} | {c.id for c in scene.children(target_id)}
    boxes = []
    for node in scene.nodes:
        if node.id in excluded or not node.faces:
            continue
        lo, hi = node_aabb(scene, node.id)
        boxes.append((node.id, Aabb(lo, hi)))
    return boxes


def scene_centroid(scene: AnnotatedScene) -> np.ndarray:
    used = face_vertex_ids(scene.mesh, range(scene.mesh.n_faces))
    return scene.mesh.vertices[used].mean(axis=0)


def place_with_retries(
    job: InsertionJob,
    target: PlacementAnswer,
    surface: PlaneSurface,
    scale: float,
    *,
    max_attempts: int = MAX_ATTEMPTS,
    margin: float = DEFAULT_MARGIN,
    toward=None,
) -> PlacementResult:
    """First try the surface mean; on collision move to random spots on the surface.

    A candidate is accepted when its scaled box overlaps no node other than
    the target and the target's parts.
    """
    target_id = target.target_id
    job.scene.node(target_id)
    lo, hi = job.object_mesh.bounds()
    half = scale * (hi - lo) / 2.0
    box = Aabb(-half, half)
    if toward is None and target.surface_constraint == "vertical":
        toward = scene_centroid(job.scene)

    e1, e2, ulo, uhi = surface_bounds_2d(surface)
    footprint = np.array([extent_along(half, e1), extent_along(half, e2)])
    if np.all(2 * footprint > uhi - ulo):
        raise PlacementExhausted(
            f"object footprint {2 * footprint} exceeds the surface bounds {uhi - ulo} on both axes", []
        )

    obstacles = _collision_set(job.scene, target_id)
    initial = compute_initial_position(surface, box, target.surface_constraint, toward)
    rng = np.random.default_rng(job.seed)
    trace: list[tuple[tuple[float, float, float], tuple[str, ...]]] = []
    notes = []
    if target.surface_constraint == "vertical":
        notes.append(f"vertical offset side {outward_sign(surface, toward):+.0f} along the surface normal, toward the scene centroid")
    for attempt in range(1, max_attempts + 1):
        if attempt == 1:
            pos = initial
        else:
            du, dv = retry_offset(surface, rng, footprint)
            pos = initial + du * e1 + dv * e2
        candidate = Aabb(pos - half, pos + half)
        hits = tuple(nid for nid, b in obstacles if aabb_overlap(candidate, b, margin))
        trace.append((tuple(float(c) for c in pos), hits))
        if not hits:
            return PlacementResult(
                tuple(float(c) for c in pos), float(scale), target_id, attempt, tuple(trace),
                target.surface_constraint, tuple(notes),
            )
    raise PlacementExhausted(f"no collision-free placement on {target_id!r} in {max_attempts} attempts", trace)


# -- pipeline ------------------------------------------------------------------


@dataclass
class InsertionRun:
    """Everything a run produced, for trace files."""

    document: UsdDocument | None = None
    placement: PlacementResult | None = None
    script: str | None = None
    stages: list[str] = field(default_factory=list)
    extras: dict[str, Any] = field(default_factory=dict)

    def to_dict(self, backend: Backend | None = None) -> dict:
        out = {
            "stages": self.stages,
            "placement": self.placement.to_dict() if self.placement else None,
            "script": self.script,
            **self.extras,
        }
        if backend is not None:
            out["llm_transcript"] = backend.transcript.entries
        return out


class _Stage:
    def __init__(self, run: InsertionRun, name: str):
        self.run = run
        self.name = name

    def __enter__(self):
        self.run.stages.append(self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, (Scan2SimError, ValueError, KeyError, OSError)):
            raise StageError(self.name, exc) from exc
        return False


def inserted_prim_path(doc: UsdDocument, label: str) -> str:
    name = f"{prim_name(label)}_new"
    return f"/{doc.default_prim}/{name}" if doc.default_prim else f"/{name}"


def run_insertion(
    job: InsertionJob,
    backend: Backend,
    config: InsertionConfig | None = None,
    run: InsertionRun | None = None,
) -> tuple[UsdDocument, PlacementResult]:
    """Insert ``job.object_mesh`` into the scene document at ``job.scene_usd_path``.

    Returns the edited document; nothing is written. Failures are raised as
    :class:`StageError` carrying the stage name.
    """
    config = config or InsertionConfig()
    run = run if run is not None else InsertionRun()
    scene = job.scene

    with _Stage(run, "load_scene_usd"):
        doc = parse_usda(Path(job.scene_usd_path).read_text(encoding="utf-8"))

    with _Stage(run, "descriptive"):
        descriptive = emit_usda(build_descriptive(scene))

    with _Stage(run, "placement_target"):
        answer = query_placement(backend, descriptive, job.object_label)
        by_name = {prim_name(n.id): n.id for n in scene.nodes}
        if answer.target_id not in by_name:
            raise UnknownIdError(f"prim {answer.target_id!r} does not correspond to a scene node")
        target = PlacementAnswer(by_name[answer.target_id], answer.surface_constraint)

    with _Stage(run, "surface"):
        points = scene.mesh.vertices[face_vertex_ids(scene.mesh, scene.node(target.target_id).faces)]
        params = RansacParams(config.ransac.dist_thresh, config.ransac.iters, job.seed)
        surface = ransac_plane(points, params, target.surface_constraint)
        run.extras["surface"] = {
            "normal": surface.normal.tolist(),
            "offset": surface.offset,
            "mean": surface.mean.tolist(),
            "inliers": int(len(surface.inlier_points)),
        }

    with _Stage(run, "scale"):
        lo, hi = job.object_mesh.bounds()
        scale_answer = query_scale(backend, job.object_label, (hi - lo).tolist())
        run.extras["scale_warnings"] = list(scale_answer.warnings)

    with _Stage(run, "placement"):
        placement = place_with_retries(
            job, target, surface, scale_answer.scale, max_attempts=config.max_attempts, margin=config.margin
        )
        run.placement = placement

    prim_path = inserted_prim_path(doc, job.object_label)
    with _Stage(run, "script"):
        center = (lo + hi) / 2.0
        translate = np.asarray(placement.position) - placement.scale * center
        script = query_script(
            backend,
            {
                "scene_usd_path": str(job.scene_usd_path),
                "object_label": job.object_label,
                "object_path": job.asset_path,
                "prim_path": prim_path,
                "position": translate.tolist(),
                "scale": placement.scale,
            },
        )
        run.script = script

    with _Stage(run, "script_guard"):
        report = validate(
            parse_script(script), config.allowlist, config.sanctioned_module, scope=prim_path, assets={job.asset_path}
        )
        run.extras["guard_report"] = report.to_dict()
        if not report.allowed:
            reasons = ", ".join(f"line {v.line}: {v.reason}" for v in report.violations)
            raise ValueError(f"generated script rejected ({reasons})")

    with _Stage(run, "apply_script"):
        out = apply_script(doc, report.program)
        run.document = out
    return out, placement
