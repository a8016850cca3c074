from __future__ import annotations

import math
import re

import numpy as np
import pytest

from scan2sim.errors import SchemaError
from scan2sim.fixtures import SCENES
from scan2sim.geometry.primitives import closed_box
from scan2sim.scene import ArticulationSpec, InstanceNode, TriMesh, make_scene, node_aabb
from scan2sim.usd import (
    FlavorKind,
    build_descriptive,
    build_flavor,
    build_geometry_focused,
    emit_usda,
    mesh_from_prim,
    parse_usda,
    scene_from_geometry_usd,
)

MESH_TOKENS = re.compile(r"point3f|points|faceVertexIndices|faceVertexCounts")


def _mesh_paths(doc):
    return [path for path, prim in doc.walk() if prim.type_name == "Mesh"]


@pytest.mark.parametrize("name", sorted(SCENES))
def test_descriptive_is_geometry_free(scenes, name):
    text = emit_usda(build_descriptive(scenes[name]))
    assert MESH_TOKENS.search(text) is None
    assert "point3f" not in text


def test_descriptive_cabinet(scenes):
    doc = build_descriptive(scenes["cabinet"])
    drawer = doc.prim_at("/cabinet_1/drawer_7")
    assert drawer.get("joint_type") == "prismatic"
    assert drawer.get("label") == "drawer"
    assert drawer.get("axis") == (0.0, -1.0, 0.0)
    assert drawer.get("range") == (0.0, 0.4)
    lo, hi = doc.prim_at("/cabinet_1").get("bbox_min"), doc.prim_at("/cabinet_1").get("bbox_max")
    # object boxes cover their parts: the drawer front sits 2 cm proud of the body
    assert lo == pytest.approx((0.0, -0.02, 0.0)) and hi == pytest.approx((0.6, 0.5, 0.8))


def test_descriptive_boxes_match_node_aabb(scenes):
    scene = scenes["office"]
    doc = build_descriptive(scene)
    for path, prim in doc.walk():
        node_id = prim.get("instance_id", prim.name)
        lo, hi = node_aabb(scene, node_id, include_parts=True)
        assert prim.get("bbox_min") == tuple(lo) and prim.get("bbox_max") == tuple(hi)


def test_descriptive_empty_scene():
    doc = build_descriptive(make_scene(TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int)), []))
    assert doc.root.children == []


@pytest.mark.parametrize("name", sorted(SCENES))
def test_geometry_focused_flat_bodies(scenes, name):
    doc = build_geometry_focused(scenes[name])
    meshes = _mesh_paths(doc)
    for path in meshes:
        ancestors = ["/".join(path.split("/")[:k]) for k in range(2, path.count("/") + 1)]
        assert not any(a in meshes for a in ancestors)
        assert path.count("/") == 1


@pytest.mark.parametrize("name", sorted(SCENES))
def test_geometry_focused_conserves_geometry(scenes, name):
    scene = scenes[name]
    doc = build_geometry_focused(scene)
    total = 0
    points = set()
    for path in _mesh_paths(doc):
        mesh = mesh_from_prim(doc.prim_at(path))
        total += mesh.n_faces
        points |= {tuple(v) for v in mesh.vertices.tolist()}
    owned = scene.owned_faces()
    assert total == len(owned)
    used = np.unique(scene.mesh.faces[owned])
    assert points == {tuple(v) for v in scene.mesh.vertices[used].tolist()}


def test_geometry_focused_cabinet(scenes):
    doc = build_geometry_focused(scenes["cabinet"])
    assert [c.name for c in doc.root.children] == ["cabinet_1", "drawer_7", "joints"]
    joint = doc.prim_at("/joints/drawer_7_joint")
    assert joint.type_name == "PhysicsPrismaticJoint"
    assert joint.relationships["physics:body0"] == "/cabinet_1"
    assert joint.relationships["physics:body1"] == "/drawer_7"
    assert joint.get("physics:upperLimit") == pytest.approx(0.4)


@pytest.mark.parametrize("name", sorted(SCENES))
def test_prim_count(scenes, name):
    scene = scenes[name]
    doc = build_geometry_focused(scene)
    scaffolding = 1 if scene.articulations else 0  # the joints scope
    assert sum(1 for _ in doc.walk()) == len(scene.nodes) + len(scene.articulations) + scaffolding


def test_single_object_has_no_joints(scenes):
    doc = build_geometry_focused(scenes["cube"])
    assert [c.name for c in doc.root.children] == ["box_1"]
    assert doc.root.children[0].type_name == "Mesh"


def test_revolute_limits_in_degrees():
    mesh = closed_box((0, 0, 0), (1, 1, 1))
    nodes = [
        InstanceNode("box_1", "cabinet", "object", faces=frozenset(range(6))),
        InstanceNode("door_2", "door", "part", parent="box_1", faces=frozenset(range(6, 12))),
    ]
    scene = make_scene(mesh, nodes, [ArticulationSpec("door_2", "revolute", (0, 0, 1), (0, 0, 0), (0.0, math.pi / 2))])
    joint = build_geometry_focused(scene).prim_at("/joints/door_2_joint")
    assert joint.type_name == "PhysicsRevoluteJoint"
    assert joint.get("physics:upperLimit") == pytest.approx(90.0)


def test_root_prim_nesting(scenes):
    doc = build_geometry_focused(scenes["cabinet"], "scene")
    assert doc.default_prim == "scene"
    assert doc.prim_at("/scene/joints/drawer_7_joint").relationships["physics:body0"] == "/scene/cabinet_1"
    with pytest.raises(ValueError):
        build_geometry_focused(scenes["cabinet"], "bad name")


def test_node_named_joints_collides():
    mesh = closed_box((0, 0, 0), (1, 1, 1))
    nodes = [
        InstanceNode("joints", "cabinet", "object", faces=frozenset(range(6))),
        InstanceNode("door_2", "door", "part", parent="joints", faces=frozenset(range(6, 12))),
    ]
    scene = make_scene(mesh, nodes, [ArticulationSpec("door_2", "revolute", (0, 0, 1), (0, 0, 0), (0.0, 1.0))])
    with pytest.raises(SchemaError):
        build_geometry_focused(scene)


@pytest.mark.parametrize("name", sorted(SCENES))
def test_geometry_usd_rebuilds_scene(scenes, name):
    scene = scenes[name]
    doc = parse_usda(emit_usda(build_geometry_focused(scene)))
    again = scene_from_geometry_usd(doc)
    assert [(n.id, n.label, n.kind, n.parent) for n in again.nodes] == [(n.id, n.label, n.kind, n.parent) for n in scene.nodes]
    assert again.articulations == scene.articulations
    for n, m in zip(scene.nodes, again.nodes):
        assert {k: len(v) for k, v in n.regions.items()} == {k: len(v) for k, v in m.regions.items()}


def test_build_flavor_dispatch(scenes):
    scene = scenes["cabinet"]
    assert build_flavor(scene, "descriptive") == build_descriptive(scene)
    assert build_flavor(scene, FlavorKind.GEOMETRY_FOCUSED) == build_geometry_focused(scene)
    with pytest.raises(ValueError):
        build_flavor(scene, "photoreal")


def test_flavors_are_deterministic(scenes):
    scene = scenes["office"]
    assert emit_usda(build_geometry_focused(scene)) == emit_usda(build_geometry_focused(scene))
    assert emit_usda(build_descriptive(scene)) == emit_usda(build_descriptive(scene))
