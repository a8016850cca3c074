"""Synthetic scan fixtures: five annotated scenes and a few insertable objects.

Scenes are assembled from parametric primitives. Supports (beds, desks,
tables) are open-bottom boxes because scanners never see an object's
underside. Running this module writes the corpus to a directory::

    python -m scan2sim.fixtures out_dir
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry.primitives import box, closed_box, concat, grid_quad
from .scene.mesh import TriMesh, write_obj
from .scene.model import AnnotatedScene, ArticulationSpec, InstanceNode, make_scene, save_scene

SCENE_NAMES = ("cube", "cabinet", "bedroom", "office", "tabletop")
OPEN_BOTTOM = ("-x", "+x", "-y", "+y", "+z")


@dataclass
class _Piece:
    id: str
    label: str
    mesh: TriMesh
    kind: str = "object"
    parent: str | None = None
    # region kind -> local face indices into ``mesh``
    regions: dict[str, list[int]] = field(default_factory=dict)


def _assemble(pieces: list[_Piece], articulations: list[ArticulationSpec] = ()) -> AnnotatedScene:
    nodes = []
    offset = 0
    for p in pieces:
        ids = range(offset, offset + p.mesh.n_faces)
        regions = {k: frozenset(offset + i for i in v) for k, v in p.regions.items()}
        nodes.append(InstanceNode(p.id, p.label, p.kind, p.parent, frozenset(ids), regions))
        offset += p.mesh.n_faces
    return make_scene(concat([p.mesh for p in pieces]), nodes, articulations)


def _room(width: float, depth: float, height: float, cells: float = 0.5) -> list[_Piece]:
    """Floor and four inward-facing walls of a ``width x depth x height`` room."""
    nx, ny, nz = (max(6, math.ceil(s / cells)) for s in (width, depth, height))
    w, d, h = width, depth, height
    return [
        _Piece("floor_1", "floor", grid_quad((0, 0, 0), (w, 0, 0), (0, d, 0), nx, ny)),
        _Piece("wall_1", "wall", grid_quad((0, 0, 0), (0, 0, h), (w, 0, 0), nz, nx)),
        _Piece("wall_2", "wall", grid_quad((0, d, 0), (w, 0, 0), (0, 0, h), nx, nz)),
        _Piece("wall_3", "wall", grid_quad((0, 0, 0), (0, d, 0), (0, 0, h), ny, nz)),
        _Piece("wall_4", "wall", grid_quad((w, 0, 0), (0, 0, h), (0, d, 0), nz, ny)),
    ]


def handle_strip(x0: float, x1: float, y: float, z: float, radius: float, n_len: int = 4, n_arc: int = 8) -> TriMesh:
    """Half-cylinder grip along x, bulging toward -y from the plane ``y``."""
    xs = np.linspace(x0, x1, n_len + 1)
    angles = np.linspace(0.0, math.pi, n_arc + 1)
    verts = np.array([(x, y - radius * math.sin(a), z + radius * math.cos(a)) for a in angles for x in xs])
    faces = []
    for j in range(n_arc):
        for i in range(n_len):
            p = j * (n_len + 1) + i
            q = p + n_len + 1
            faces += [(p, p + 1, q + 1), (p, q + 1, q)]
    return TriMesh(verts, np.array(faces))


def _cabinet_pieces(origin=(0.0, 0.0, 0.0)) -> tuple[list[_Piece], list[ArticulationSpec]]:
    """Cabinet body open at the front (-y) with one drawer and a graspable handle."""
    ox, oy, oz = origin
    body = box((ox, oy, oz), (ox + 0.6, oy + 0.5, oz + 0.8), sides=("-x", "+x", "+y", "-z", "+z"), n=2)
    tray = box((ox + 0.05, oy, oz + 0.45), (ox + 0.55, oy + 0.45, oz + 0.7), sides=("-x", "+x", "-y", "+y", "-z"), n=2)
    handle = handle_strip(ox + 0.22, ox + 0.38, oy, oz + 0.58, 0.02)
    drawer = concat([tray, handle])
    grasp = list(range(tray.n_faces, drawer.n_faces))
    pieces = [
        _Piece("cabinet_1", "cabinet", body, regions={"fixed": list(range(body.n_faces))}),
        _Piece(
            "drawer_7", "drawer", drawer, kind="part", parent="cabinet_1",
            regions={"movable": list(range(drawer.n_faces)), "graspable": grasp},
        ),
    ]
    art = ArticulationSpec(
        "drawer_7", "prismatic", (0.0, -1.0, 0.0), (ox + 0.3, oy + 0.225, oz + 0.575), (0.0, 0.4)
    )
    return pieces, [art]


def cube_scene() -> AnnotatedScene:
    return _assemble([_Piece("box_1", "box", closed_box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5)))])


def cabinet_scene() -> AnnotatedScene:
    pieces, arts = _cabinet_pieces()
    return _assemble(pieces, arts)


def bedroom_scene() -> AnnotatedScene:
    pieces = _room(4.0, 3.0, 2.5)
    pieces += [
        _Piece("bed_3", "bed", box((0.5, 0.5, 0.0), (2.5, 2.1, 0.5), sides=OPEN_BOTTOM, n=(8, 6, 2))),
        _Piece("nightstand_4", "nightstand", box((2.7, 2.4, 0.0), (3.2, 2.9, 0.5), sides=OPEN_BOTTOM, n=2)),
    ]
    return _assemble(pieces)


def office_scene() -> AnnotatedScene:
    pieces = _room(5.0, 4.0, 2.6)
    pieces.append(_Piece("desk_1", "desk", box((1.0, 2.8, 0.0), (2.6, 3.6, 0.75), sides=OPEN_BOTTOM, n=(8, 4, 3))))
    cab, arts = _cabinet_pieces(origin=(3.6, 0.6, 0.0))
    return _assemble(pieces + cab, arts)


def tabletop_scene() -> AnnotatedScene:
    """A table whose center is blocked by a book, so placement must retry."""
    pieces = [
        _Piece("floor_1", "floor", grid_quad((-1, -1, 0), (3.2, 0, 0), (0, 2.8, 0), 8, 7)),
        _Piece("table_1", "table", box((0.0, 0.0, 0.0), (1.2, 0.8, 0.75), sides=OPEN_BOTTOM, n=(6, 4, 3))),
        _Piece("book_1", "book", closed_box((0.45, 0.25, 0.75), (0.75, 0.55, 0.8))),
    ]
    return _assemble(pieces)


SCENES = {
    "cube": cube_scene,
    "cabinet": cabinet_scene,
    "bedroom": bedroom_scene,
    "office": office_scene,
    "tabletop": tabletop_scene,
}

# insertable objects, deliberately not centered on their local origin
OBJECTS = {
    "pillow": lambda: closed_box((0.0, 0.0, 0.0), (0.6, 0.4, 0.15)),
    "poster": lambda: closed_box((-0.3, 0.0, 0.0), (0.3, 0.02, 0.9)),
    "bottle": lambda: closed_box((-0.04, -0.04, 0.0), (0.04, 0.04, 0.25)),
    "mug": lambda: closed_box((0.0, 0.0, 0.0), (0.1, 0.08, 0.1)),
}


def write_corpus(out_dir: str | Path) -> list[Path]:
    """Write every scene (OBJ + annotation JSON) and object OBJ under ``out_dir``."""
    out = Path(out_dir)
    (out / "objects").mkdir(parents=True, exist_ok=True)
    written = []
    for name, build in SCENES.items():
        mesh_path, ann_path = out / f"{name}.obj", out / f"{name}.json"
        save_scene(build(), mesh_path, ann_path)
        written += [mesh_path, ann_path]
    for name, build in OBJECTS.items():
        path = out / "objects" / f"{name}.obj"
        write_obj(build(), path)
        written.append(path)
    return written


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir")
    args = parser.parse_args(argv)
    for path in write_corpus(args.out_dir):
        print(path)


if __name__ == "__main__":
    main()
