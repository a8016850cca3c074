"""Indexed triangle meshes and their OBJ / PLY readers and writers."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ParseError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangle mesh in meters, z-up.

    ``face_owner`` optionally tags every face with the id of the instance that
    owns it; ``None`` entries mark unowned faces.
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_owner: tuple[str | None, ...] | None = None

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(vertices)):
            raise ValueError("mesh coordinates must be finite")
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(vertices):
                raise ValueError("face index out of range")
            if np.any((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])):
                raise ValueError("degenerate face (repeated vertex index)")
        owner = self.face_owner
        if owner is not None:
            owner = tuple(owner)
            if len(owner) != len(faces):
                raise ValueError("face_owner length must match face count")
        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "faces", _frozen(faces))
        object.__setattr__(self, "face_owner", owner)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TriMesh):
            return NotImplemented
        return (
            self.vertices.shape == other.vertices.shape
            and self.faces.shape == other.faces.shape
            and bool(np.array_equal(self.vertices, other.vertices))
            and bool(np.array_equal(self.faces, other.faces))
            and self.face_owner == other.face_owner
        )

    __hash__ = None  # type: ignore[assignment]

    def submesh(self, face_ids: Sequence[int]) -> tuple["TriMesh", np.ndarray]:
        """Extract faces into a compact mesh.

        Returns the new mesh and the original index of each of its vertices.
        Local vertex order follows first use in ``face_ids`` order.
        """
        ids = np.asarray(face_ids, dtype=np.int64)
        picked = self.faces[ids] if len(ids) else np.zeros((0, 3), dtype=np.int64)
        flat = picked.ravel()
        # first-use order keeps extraction deterministic and stable
        _, first = np.unique(flat, return_index=True)
        used = flat[np.sort(first)]
        remap = np.full(len(self.vertices), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        owner = None
        if self.face_owner is not None:
            owner = tuple(self.face_owner[i] for i in ids)
        return TriMesh(self.vertices[used], remap[picked], owner), used

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        used = np.unique(self.faces)
        pts = self.vertices[used] if len(used) else self.vertices
        if len(pts) == 0:
            raise ValueError("empty mesh has no bounds")
        return pts.min(axis=0), pts.max(axis=0)


# -- OBJ -----------------------------------------------------------------------


def read_obj(path: str | os.PathLike) -> TriMesh:
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    raise ParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from None
            elif tag == "f":
                if len(tokens) != 4:
                    raise ParseError(
                        f"{path}:{lineno}: only triangular faces are supported, got {len(tokens) - 1} corners"
                    )
                face = []
                for corner in tokens[1:]:
                    try:
                        idx = int(corner.split("/")[0])
                    except ValueError:
                        raise ParseError(f"{path}:{lineno}: bad face index {corner!r}") from None
                    # OBJ is 1-based; negative indices count back from the latest vertex
                    idx = idx - 1 if idx > 0 else len(vertices) + idx
                    if not 0 <= idx < len(vertices):
                        raise ParseError(f"{path}:{lineno}: face index out of range")
                    face.append(idx)
                if len(set(face)) != 3:
                    raise ParseError(f"{path}:{lineno}: degenerate face")
                faces.append(face)
            # vt, vn, o, g, s, usemtl, mtllib carry no geometry we need
    try:
        return TriMesh(np.array(vertices, dtype=np.float64), np.array(faces, dtype=np.int64))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_obj(mesh: TriMesh, path: str | os.PathLike) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- PLY -----------------------------------------------------------------------

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass
class _PlyElement:
    name: str
    count: int
    # (name, dtype) for scalars, (name, count_dtype, item_dtype) for lists
    props: list[tuple]


def _ply_header(fh) -> tuple[str, list[_PlyElement]]:
    if fh.readline().strip() != b"ply":
        raise ParseError("missing 'ply' magic")
    fmt = None
    elements: list[_PlyElement] = []
    while True:
        raw = fh.readline()
        if not raw:
            raise ParseError("PLY header not terminated")
        tokens = raw.decode("ascii", "replace").split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "end_header":
            break
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            elements.append(_PlyElement(tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before element")
            try:
                if tokens[1] == "list":
                    elements[-1].props.append((tokens[4], _PLY_TYPES[tokens[2]], _PLY_TYPES[tokens[3]]))
                else:
                    elements[-1].props.append((tokens[2], _PLY_TYPES[tokens[1]]))
            except (KeyError, IndexError):
                raise ParseError(f"bad PLY property line: {raw!r}") from None
        else:
            raise ParseError(f"unknown PLY header keyword {tokens[0]!r}")
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise ParseError(f"unsupported PLY format {fmt!r}")
    return fmt, elements


def _read_binary_element(fh, element: _PlyElement, endian: str) -> list[dict]:
    if all(len(p) == 2 for p in element.props):
        dtype = np.dtype([(p[0], endian + p[1]) for p in element.props])
        buf = fh.read(dtype.itemsize * element.count)
        if len(buf) != dtype.itemsize * element.count:
            raise ParseError(f"truncated PLY element {element.name!r}")
        arr = np.frombuffer(buf, dtype=dtype)
        return [{name: arr[name] for name in dtype.names}]
    rows = []
    for _ in range(element.count):
        row = {}
        for prop in element.props:
            if len(prop) == 2:
                dt = np.dtype(endian + prop[1])
                buf = fh.read(dt.itemsize)
                if len(buf) != dt.itemsize:
                    raise ParseError(f"truncated PLY element {element.name!r}")
                row[prop[0]] = np.frombuffer(buf, dtype=dt)[0]
            else:
                cdt = np.dtype(endian + prop[1])
                idt = np.dtype(endian + prop[2])
                buf = fh.read(cdt.itemsize)
                if len(buf) != cdt.itemsize:
                    raise ParseError(f"truncated PLY element {element.name!r}")
                n = int(np.frombuffer(buf, dtype=cdt)[0])
                buf = fh.read(idt.itemsize * n)
                if len(buf) != idt.itemsize * n:
                    raise ParseError(f"truncated PLY element {element.name!r}")
                row[prop[0]] = np.frombuffer(buf, dtype=idt)
        rows.append(row)
    return rows


def read_ply(path: str | os.PathLike) -> TriMesh:
    with open(path, "rb") as fh:
        fmt, elements = _ply_header(fh)
        data: dict[str, object] = {}
        if fmt == "ascii":
            tokens = fh.read().decode("ascii", "replace").split()
            pos = 0
            for element in elements:
                rows = []
                for _ in range(element.count):
                    row = {}
                    for prop in element.props:
                        try:
                            if len(prop) == 2:
                                row[prop[0]] = float(tokens[pos])
                                pos += 1
                            else:
                                n = int(tokens[pos])
                                row[prop[0]] = [int(t) for t in tokens[pos + 1 : pos + 1 + n]]
                                if len(row[prop[0]]) != n:
                                    raise IndexError
                                pos += 1 + n
                        except (IndexError, ValueError):
                            raise ParseError(f"{path}: truncated or malformed ASCII PLY body") from None
                    rows.append(row)
                data[element.name] = rows
        else:
            endian = "<" if fmt == "binary_little_endian" else ">"
            for element in elements:
                data[element.name] = _read_binary_element(fh, element, endian)

    by_name = {e.name: e for e in elements}
    if "vertex" not in by_name:
        raise ParseError(f"{path}: PLY has no vertex element")
    vertex_rows = data["vertex"]
    if by_name["vertex"].count and isinstance(vertex_rows, list) and len(vertex_rows) == 1 and isinstance(
        vertex_rows[0].get("x"), np.ndarray
    ):
        columns = vertex_rows[0]
        vertices = np.stack([columns["x"], columns["y"], columns["z"]], axis=1).astype(np.float64)
    else:
        try:
            vertices = np.array([[r["x"], r["y"], r["z"]] for r in vertex_rows], dtype=np.float64).reshape(-1, 3)
        except KeyError:
            raise ParseError(f"{path}: vertex element lacks x/y/z") from None

    faces: list[list[int]] = []
    if "face" in by_name:
        key = None
        for prop in by_name["face"].props:
            if len(prop) == 3 and prop[0] in ("vertex_indices", "vertex_index"):
                key = prop[0]
        if key is None:
            raise ParseError(f"{path}: face element lacks vertex_indices")
        for i, row in enumerate(data["face"]):
            idx = [int(v) for v in row[key]]
            if len(idx) != 3:
                raise ParseError(f"{path}: face {i} is not a triangle")
            faces.append(idx)
    try:
        return TriMesh(vertices, np.array(faces, dtype=np.int64).reshape(-1, 3))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_ply(mesh: TriMesh, path: str | os.PathLike, binary: bool = True) -> None:
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(mesh.vertices.astype("<f8").tobytes())
            for a, b, c in mesh.faces.tolist():
                fh.write(struct.pack("<Biii", 3, a, b, c))
        else:
            body = [f"{x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
            body += [f"3 {a} {b} {c}" for a, b, c in mesh.faces.tolist()]
            fh.write(("\n".join(body) + "\n").encode("ascii"))


def read_mesh(path: str | os.PathLike) -> TriMesh:
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        return read_obj(path)
    if suffix == ".ply":
        return read_ply(path)
    raise ParseError(f"unsupported mesh format {suffix or '<none>'!r} (expected .obj or .ply)")


def write_mesh(mesh: TriMesh, path: str | os.PathLike) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        write_obj(mesh, path)
    elif suffix == ".ply":
        write_ply(mesh, path)
    else:
        raise ParseError(f"unsupported mesh format {suffix or '<none>'!r} (expected .obj or .ply)")
