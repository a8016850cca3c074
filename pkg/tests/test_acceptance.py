"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line and enforces its
runtime limit where one is set. The lines are collected again in pytest's
terminal summary so they survive output capture.
"""

from __future__ import annotations

import contextlib
import json
import random
import re
import time
from pathlib import Path

import numpy as np

from conftest import ACCEPTANCE_LINES, FIXTURES, USD_DIR, fixture_scene, insertion_job
from guard_cases import ASSET, ATTACKS, SANCTIONED_EFFECTS, SCOPE, fuzz
from synth import (
    PLANE_CASES,
    brute_force_region_mean,
    colliding_nodes,
    noisy_plane,
    plane_errors,
    random_document,
    sampled_hausdorff,
)
from scan2sim.fixtures import SCENES
from scan2sim.geometry import DecompositionParams, RansacParams, convex_decompose, decimate_quadric, ransac_plane
from scan2sim.geometry.primitives import box, closed_box, uv_sphere
from scan2sim.insertion import InsertionRun, run_insertion
from scan2sim.llm import MockBackend
from scan2sim.scene import face_vertex_ids
from scan2sim.script_guard import apply_script, check_script
from scan2sim.simprep import build_sim_bundle, write_bundle
from scan2sim.usd import build_descriptive, build_geometry_focused, canonical_usda, emit_usda, mesh_from_prim, parse_usda

MESH_POINT_TOKENS = re.compile(r"\b(points|point3f|point3f\[\]|faceVertexIndices|faceVertexCounts)\b")


@contextlib.contextmanager
def criterion(number: int, title: str, limit: float | None = None):
    """Print one PASS/FAIL line for the enclosed checks and enforce the runtime limit."""
    start = time.perf_counter()
    detail: dict = {}
    try:
        yield detail
        elapsed = time.perf_counter() - start
        if limit is not None:
            assert elapsed < limit, f"took {elapsed:.2f} s, limit {limit} s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        _report(number, "FAIL", title, elapsed, f"{type(exc).__name__}: {exc}".splitlines()[0])
        raise
    _report(number, "PASS", title, elapsed, ", ".join(f"{k}={v}" for k, v in detail.items()))


def _report(number: int, verdict: str, title: str, elapsed: float, info: str) -> None:
    line = f"ACCEPTANCE {number} {verdict}  {title}  ({elapsed:.2f} s)" + (f"  [{info}]" if info else "")
    print(line)
    ACCEPTANCE_LINES.append(line)


# -- 1 -------------------------------------------------------------------------


def test_criterion_1_usda_round_trip():
    inputs = sorted((FIXTURES / "usda" / "inputs").glob("*.usda"))
    with criterion(1, "USDA round trip", limit=5.0) as detail:
        rng = random.Random(2024)
        for k in range(100):
            doc = random_document(rng)
            text = emit_usda(doc)
            again = parse_usda(text)
            assert again == doc, f"random document {k}"
            assert emit_usda(again) == text, f"random document {k}"
        assert len(inputs) == 20
        for src in inputs:
            golden = (FIXTURES / "usda" / "golden" / src.name).read_text(encoding="utf-8")
            assert canonical_usda(src.read_text(encoding="utf-8")) == golden, src.name
            assert emit_usda(parse_usda(golden)) == golden, src.name
        detail.update(random=100, golden=len(inputs))


# -- 2 -------------------------------------------------------------------------


def test_criterion_2_flavor_contracts():
    scenes = {name: fixture_scene(name) for name in sorted(SCENES)}
    with criterion(2, "flavor contracts", limit=10.0) as detail:
        assert len(scenes) == 5
        for name, scene in scenes.items():
            text = emit_usda(build_descriptive(scene))
            assert MESH_POINT_TOKENS.search(text) is None, name

            doc = build_geometry_focused(scene)
            meshes = {path for path, prim in doc.walk() if prim.type_name == "Mesh"}
            for path in meshes:
                parts = path.split("/")
                assert not any("/".join(parts[:k]) in meshes for k in range(2, len(parts))), path
            faces = sum(mesh_from_prim(doc.prim_at(path)).n_faces for path in meshes)
            assert faces == len(scene.owned_faces()), name
            # and the emitted text parses back to the same bodies
            assert parse_usda(emit_usda(doc)) == doc
        detail.update(scenes=len(scenes))


# -- 3 -------------------------------------------------------------------------


def test_criterion_3_ransac_recovery():
    with criterion(3, "RANSAC plane recovery") as detail:
        good = 0
        for case, (normal, offset, constraint) in PLANE_CASES.items():
            for seed in range(10):
                pts = noisy_plane(normal, offset, seed=seed, sigma=0.002, outlier_frac=0.1)
                plane = ransac_plane(pts, RansacParams(seed=seed), constraint)
                deg, off = plane_errors(plane, normal, offset)
                good += deg <= 2.0 and off <= 0.01
        assert good >= 29, f"{good}/30 recovered"
        detail.update(recovered=f"{good}/30")


# -- 4 -------------------------------------------------------------------------


def test_criterion_4_decimation():
    sphere = uv_sphere()
    with criterion(4, "quadric decimation") as detail:
        assert sphere.n_faces == 5000
        out = decimate_quadric(sphere, 0.10)
        assert out.n_faces <= 500
        lo, hi = sphere.bounds()
        diag = float(np.linalg.norm(hi - lo))
        h = sampled_hausdorff(sphere, out, n=5000)
        assert h <= 0.02 * diag, f"Hausdorff {h:.4f} > {0.02 * diag:.4f}"
        assert decimate_quadric(sphere, 1.0) == sphere
        counts = [decimate_quadric(sphere, r).n_faces for r in (0.1, 0.3, 0.5, 1.0)]
        assert counts == sorted(counts), counts
        detail.update(faces=out.n_faces, hausdorff_over_diag=f"{h / diag:.4f}", counts=counts)


# -- 5 -------------------------------------------------------------------------


def _worst_gap(pieces, points) -> float:
    return float(np.min([p.signed_distance(points) for p in pieces], axis=0).max())


def test_criterion_5_convex_decomposition():
    with criterion(5, "convex decomposition") as detail:
        cube = closed_box((0, 0, 0), (1, 1, 1))
        assert len(convex_decompose(cube)) == 1

        drawer = box((0.0, 0.0, 0.0), (0.4, 0.5, 0.2), sides=("-x", "+x", "-y", "+y", "-z"), n=2)
        pieces = convex_decompose(drawer)
        probe = np.array([[0.2, 0.25, 0.1]])
        assert not any(p.contains(probe)[0] for p in pieces), "cavity probe inside a hull"
        assert _worst_gap(pieces, drawer.vertices) <= 1e-6

        checked = 0
        for name in sorted(SCENES):
            scene = fixture_scene(name)
            for node in scene.nodes:
                if not node.faces:
                    continue
                mesh, _ = scene.mesh.submesh(sorted(node.faces))
                parts = convex_decompose(mesh, DecompositionParams())
                assert _worst_gap(parts, mesh.vertices) <= 1e-6, f"{name}/{node.id}"
                checked += 1
        detail.update(drawer_pieces=len(pieces), fixture_nodes=checked)


# -- 6 -------------------------------------------------------------------------


def _check_placement(scene_name: str, label: str, seed: int = 0):
    job = insertion_job(scene_name, label, seed)
    run = InsertionRun()
    doc, placement = run_insertion(job, MockBackend(), run=run)
    lo, hi = job.object_mesh.bounds()
    extent = hi - lo
    assert colliding_nodes(job.scene, placement.target_id, placement.position, placement.scale, extent) == [], label
    surface = run.extras["surface"]
    half = placement.scale * extent[2] / 2.0
    foot = np.array(placement.position) - (0.0, 0.0, half)
    assert abs(foot @ np.array(surface["normal"]) - surface["offset"]) <= 1e-9, label
    top = job.scene.mesh.vertices[face_vertex_ids(job.scene.mesh, job.scene.node(placement.target_id).faces)][:, 2].max()
    assert abs(placement.position[2] - (top + half)) <= 1e-9, label
    again, _ = run_insertion(insertion_job(scene_name, label, seed), MockBackend())
    assert emit_usda(again) == emit_usda(doc), f"{label} rerun differs"
    return placement


def test_criterion_6_insertion():
    with criterion(6, "insertion with mock backend", limit=20.0) as detail:
        pillow = _check_placement("bedroom", "pillow")
        assert pillow.target_id == "bed_3"
        bottle = _check_placement("office", "bottle")
        assert bottle.target_id == "desk_1"
        mug = _check_placement("tabletop", "mug", seed=7)
        assert mug.attempts >= 2
        detail.update(pillow=pillow.attempts, bottle=bottle.attempts, obstacle_attempts=mug.attempts)


# -- 7 -------------------------------------------------------------------------


def test_criterion_7_script_guard():
    canonical = (FIXTURES / "scripts" / "canonical_insert.txt").read_text()
    golden = (FIXTURES / "scripts" / "canonical_insert_applied.usda").read_text()
    with criterion(7, "script guard") as detail:
        report = check_script(canonical, scope=SCOPE, assets={ASSET})
        assert report.allowed
        bedroom = parse_usda((USD_DIR / "bedroom_scene.usda").read_text())
        assert emit_usda(apply_script(bedroom, report.program)) == golden

        rejected = 0
        for name, category, script in ATTACKS:
            attack = check_script(script, scope=SCOPE, assets={ASSET})
            rejected += attack.verdict == "rejected" and category in {v.reason for v in attack.violations}
        assert len(ATTACKS) == 12 and rejected == 12, f"{rejected}/12 rejected"

        applied, effects = fuzz(10000, seed=0)
        assert effects <= SANCTIONED_EFFECTS, sorted(effects - SANCTIONED_EFFECTS)
        detail.update(attacks=f"{rejected}/12", fuzz_applied=applied, effects=len(effects))


# -- 8 -------------------------------------------------------------------------


def test_criterion_8_sim_bundle(tmp_path: Path):
    with criterion(8, "sim bundle", limit=30.0) as detail:
        office = fixture_scene("office")
        bundle = build_sim_bundle(office, "drawer_7")
        files = write_bundle(bundle, tmp_path / "a")
        task = json.loads(files["task_config.json"].read_text())
        assert task["robot_standoff"] == 0.55
        assert task["robot_reach"] == 0.85
        assert task["success_threshold"] == 0.2
        gap = float(np.abs(np.array(task["grasp_point"]) - brute_force_region_mean(office, "drawer_7")).max())
        assert gap <= 1e-6, gap

        merged = bundle.report["merged"]
        for prim, ratio in (("static_structural", 0.10), ("static_objects", 0.30)):
            entry = merged[prim]
            assert entry["faces_out"] <= ratio * entry["faces_in"] + len(entry["sources"]), prim

        rerun = write_bundle(build_sim_bundle(fixture_scene("office"), "drawer_7"), tmp_path / "b")
        for name in files:
            assert files[name].read_bytes() == rerun[name].read_bytes(), name
        structural = merged["static_structural"]
        detail.update(grasp_gap=f"{gap:.1e}", structural=f"{structural['faces_out']}/{structural['faces_in']}")
