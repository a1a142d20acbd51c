"""
Mesh file readers (OFF, OBJ, PLY) and writers (PLY, VTK legacy, OFF)
"""

import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import MeshError
from .mesh import TriMesh

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ("off", "obj", "ply")

PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def load_mesh(path: str, format: Optional[str] = None) -> TriMesh:
    """
    Load and validate a triangle mesh.

    Args:
        path: OFF, OBJ or PLY file
        format: explicit format; sniffed from extension and header when omitted

    Returns:
        TriMesh with connectivity built
    """
    if not os.path.isfile(path):
        raise MeshError(f"Mesh file not found: {path}")
    fmt = (format or sniff_format(path)).lower()
    readers = {"off": read_off, "obj": read_obj, "ply": read_ply}
    if fmt not in readers:
        raise MeshError(f"Unsupported mesh format '{fmt}' (expected one of {SUPPORTED_FORMATS})")

    try:
        vertices, triangles = readers[fmt](path)
    except MeshError:
        raise
    except (ValueError, IndexError, TypeError) as e:
        raise MeshError(f"Failed to parse {fmt.upper()} file {path}: {e}") from e

    mesh = TriMesh(vertices, triangles)
    logger.info("Loaded %s: %d vertices, %d triangles", path, mesh.n_vertices, mesh.n_triangles)
    return mesh


def sniff_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lower().lstrip(".")
    if ext in SUPPORTED_FORMATS:
        return ext
    with open(path, "rb") as f:
        head = f.read(64).lstrip()
    if head.startswith(b"ply"):
        return "ply"
    if head.upper().startswith(b"OFF") or head.upper().startswith(b"COFF"):
        return "off"
    if any(head.startswith(p) for p in (b"v ", b"#", b"o ", b"g ", b"mtllib")):
        return "obj"
    raise MeshError(f"Cannot determine mesh format of {path}")


def _fan(face: List[int]) -> List[List[int]]:
    if len(face) < 3:
        raise MeshError(f"Face with fewer than 3 vertices: {face}")
    return [[face[0], face[i], face[i + 1]] for i in range(1, len(face) - 1)]


def read_off(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Read an ASCII OFF file; polygons are fan-triangulated"""
    with open(path, "r") as f:
        tokens = []
        for line in f:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.append(line.split())

    if not tokens or not tokens[0][0].upper().endswith("OFF"):
        raise MeshError("Not a valid OFF header")
    header = tokens[0][1:]
    rows = tokens[1:]
    if not header:
        header, rows = rows[0], rows[1:]
    n_verts, n_faces = int(header[0]), int(header[1])
    if len(rows) < n_verts + n_faces:
        raise MeshError(f"OFF file truncated: expected {n_verts} vertices and {n_faces} faces")

    vertices = np.array([[float(x) for x in r[:3]] for r in rows[:n_verts]], dtype=np.float64)
    triangles = []
    for r in rows[n_verts:n_verts + n_faces]:
        k = int(r[0])
        triangles.extend(_fan([int(x) for x in r[1:1 + k]]))
    return vertices.reshape(-1, 3), np.array(triangles, dtype=np.int64).reshape(-1, 3)


def read_obj(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Read vertices and faces of a Wavefront OBJ file (1-based or negative indices)"""
    vertices = []
    triangles = []
    with open(path, "r") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                face = []
                for token in parts[1:]:
                    idx = int(token.split("/")[0])
                    face.append(idx - 1 if idx > 0 else len(vertices) + idx)
                triangles.extend(_fan(face))
    return (np.array(vertices, dtype=np.float64).reshape(-1, 3),
            np.array(triangles, dtype=np.int64).reshape(-1, 3))


def _ply_type(name: str) -> str:
    if name not in PLY_TYPES:
        raise MeshError(f"Unsupported PLY type: {name}")
    return PLY_TYPES[name]


def _read_ply_header(f) -> Tuple[str, List[dict]]:
    if f.readline().strip() != b"ply":
        raise MeshError("Not a valid PLY header")
    fmt = None
    elements = []
    while True:
        line = f.readline()
        if not line:
            raise MeshError("PLY header not terminated by end_header")
        parts = line.decode("ascii", errors="replace").split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "end_header":
            break
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append({"name": parts[1], "count": int(parts[2]), "props": []})
        elif parts[0] == "property":
            if not elements:
                raise MeshError("PLY property declared before any element")
            if parts[1] == "list":
                prop = {"name": parts[4], "list": True,
                        "count_type": _ply_type(parts[2]), "type": _ply_type(parts[3])}
            else:
                prop = {"name": parts[2], "list": False, "type": _ply_type(parts[1])}
            elements[-1]["props"].append(prop)
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshError(f"Unsupported PLY format: {fmt}")
    return fmt, elements


def _face_prop(element: dict) -> str:
    for prop in element["props"]:
        if prop["list"] and prop["name"] in ("vertex_indices", "vertex_index"):
            return prop["name"]
    raise MeshError("PLY face element has no vertex_indices list")


def _read_ply_binary_element(buf: memoryview, offset: int, element: dict):
    """Returns (records, new_offset); records is a dict of name -> array or list of arrays"""
    props = element["props"]
    count = element["count"]
    if not any(p["list"] for p in props):
        dtype = np.dtype([(p["name"], "<" + p["type"]) for p in props])
        data = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
        return {p["name"]: data[p["name"]] for p in props}, offset + dtype.itemsize * count

    # fast path: every list holds exactly three entries
    fields = []
    for p in props:
        if p["list"]:
            fields.append((p["name"] + "__n", "<" + p["count_type"]))
            fields.append((p["name"], "<" + p["type"], (3,)))
        else:
            fields.append((p["name"], "<" + p["type"]))
    dtype = np.dtype(fields)
    if offset + dtype.itemsize * count <= len(buf):
        data = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
        if all(np.all(data[p["name"] + "__n"] == 3) for p in props if p["list"]):
            return {p["name"]: data[p["name"]] for p in props}, offset + dtype.itemsize * count

    records: Dict[str, list] = {p["name"]: [] for p in props}
    for _ in range(count):
        for p in props:
            if p["list"]:
                ct = np.dtype("<" + p["count_type"])
                n = int(np.frombuffer(buf, dtype=ct, count=1, offset=offset)[0])
                offset += ct.itemsize
                it = np.dtype("<" + p["type"])
                records[p["name"]].append(np.frombuffer(buf, dtype=it, count=n, offset=offset))
                offset += it.itemsize * n
            else:
                it = np.dtype("<" + p["type"])
                records[p["name"]].append(np.frombuffer(buf, dtype=it, count=1, offset=offset)[0])
                offset += it.itemsize
    return records, offset


def read_ply(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Read an ASCII or binary little-endian PLY file"""
    with open(path, "rb") as f:
        fmt, elements = _read_ply_header(f)
        body = f.read()

    vertices = None
    triangles: List[List[int]] = []

    if fmt == "ascii":
        lines = iter(body.decode("ascii", errors="replace").splitlines())
        for element in elements:
            rows = []
            while len(rows) < element["count"]:
                line = next(lines, None)
                if line is None:
                    raise MeshError(f"PLY body truncated: {element['name']} element has "
                                    f"{len(rows)} of {element['count']} rows")
                line = line.split()
                if line:
                    rows.append(line)
            if element["name"] == "vertex":
                names = [p["name"] for p in element["props"]]
                cols = [names.index(c) for c in ("x", "y", "z")]
                vertices = np.array([[float(r[c]) for c in cols] for r in rows], dtype=np.float64)
            elif element["name"] == "face":
                key = _face_prop(element)
                for r in rows:
                    pos = 0
                    for p in element["props"]:
                        if p["list"]:
                            n = int(r[pos])
                            values = [int(x) for x in r[pos + 1:pos + 1 + n]]
                            pos += 1 + n
                            if p["name"] == key:
                                triangles.extend(_fan(values))
                        else:
                            pos += 1
    else:
        buf = memoryview(body)
        offset = 0
        for element in elements:
            records, offset = _read_ply_binary_element(buf, offset, element)
            if element["name"] == "vertex":
                vertices = np.column_stack([np.asarray(records[c], dtype=np.float64)
                                            for c in ("x", "y", "z")])
            elif element["name"] == "face":
                faces = records[_face_prop(element)]
                if isinstance(faces, np.ndarray):
                    triangles.extend(faces.astype(np.int64).tolist())
                else:
                    for face in faces:
                        triangles.extend(_fan([int(x) for x in face]))

    if vertices is None:
        raise MeshError("PLY file has no vertex element")
    return vertices.reshape(-1, 3), np.array(triangles, dtype=np.int64).reshape(-1, 3)


def _check_fields(mesh: TriMesh, vertex_scalars: Optional[Dict[str, np.ndarray]],
                  face_labels: Optional[np.ndarray]):
    for name, values in (vertex_scalars or {}).items():
        if np.asarray(values).shape != (mesh.n_vertices,):
            raise ValueError(f"Scalar field '{name}' must have {mesh.n_vertices} values")
        if not name.isidentifier():
            raise ValueError(f"Scalar field name '{name}' is not a valid property name")
    if face_labels is not None:
        labels = np.asarray(face_labels)
        if labels.shape != (mesh.n_triangles,):
            raise ValueError(f"Face labels must have {mesh.n_triangles} values")
        if np.any(labels < 0):
            raise ValueError("Face labels must be non-negative (partition has unassigned triangles)")


def write_ply(path: str, mesh: TriMesh, vertex_scalars: Optional[Dict[str, np.ndarray]] = None,
              face_labels: Optional[np.ndarray] = None):
    """
    Write a binary little-endian PLY: double coordinates, one float property
    per scalar field, and an optional uint face label.
    """
    _check_fields(mesh, vertex_scalars, face_labels)
    scalars = vertex_scalars or {}

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {mesh.n_vertices}",
              "property double x", "property double y", "property double z"]
    header += [f"property float {name}" for name in scalars]
    header += [f"element face {mesh.n_triangles}", "property list uchar int vertex_indices"]
    if face_labels is not None:
        header.append("property uint label")
    header.append("end_header")

    vdtype = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
                      + [(name, "<f4") for name in scalars])
    vdata = np.zeros(mesh.n_vertices, dtype=vdtype)
    for i, c in enumerate("xyz"):
        vdata[c] = mesh.vertices[:, i]
    for name, values in scalars.items():
        vdata[name] = np.asarray(values, dtype=np.float32)

    fields = [("n", "u1"), ("idx", "<i4", (3,))]
    if face_labels is not None:
        fields.append(("label", "<u4"))
    fdata = np.zeros(mesh.n_triangles, dtype=np.dtype(fields))
    fdata["n"] = 3
    fdata["idx"] = mesh.triangles
    if face_labels is not None:
        fdata["label"] = np.asarray(face_labels, dtype=np.uint32)

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(vdata.tobytes())
        f.write(fdata.tobytes())
    logger.debug("Wrote PLY %s (%d scalar fields)", path, len(scalars))


def write_vtk(path: str, mesh: TriMesh, vertex_scalars: Optional[Dict[str, np.ndarray]] = None,
              face_labels: Optional[np.ndarray] = None, title: str = "lpcm output"):
    """Write a legacy ASCII VTK polydata file with POINT_DATA scalars and CELL_DATA labels"""
    _check_fields(mesh, vertex_scalars, face_labels)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA",
             f"POINTS {mesh.n_vertices} double"]
    lines += [" ".join(repr(float(x)) for x in v) for v in mesh.vertices]
    lines.append(f"POLYGONS {mesh.n_triangles} {4 * mesh.n_triangles}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]

    if vertex_scalars:
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        for name, values in vertex_scalars.items():
            lines += [f"SCALARS {name} float 1", "LOOKUP_TABLE default"]
            lines += [repr(float(x)) for x in np.asarray(values, dtype=np.float32)]
    if face_labels is not None:
        lines += [f"CELL_DATA {mesh.n_triangles}", "SCALARS label int 1", "LOOKUP_TABLE default"]
        lines += [str(int(x)) for x in face_labels]

    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    logger.debug("Wrote VTK %s", path)


def write_off(path: str, mesh: TriMesh):
    """Write an ASCII OFF file"""
    with open(path, "w") as f:
        f.write("OFF\n")
        f.write(f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_edges}\n")
        for v in mesh.vertices:
            f.write(" ".join(repr(float(x)) for x in v) + "\n")
        for a, b, c in mesh.triangles.tolist():
            f.write(f"3 {a} {b} {c}\n")


def write_fields(path: str, mesh: TriMesh, fmt: str,
                 vertex_scalars: Optional[Dict[str, np.ndarray]] = None,
                 face_labels: Optional[np.ndarray] = None):
    """Dispatch to the PLY or VTK writer"""
    if fmt == "ply":
        write_ply(path, mesh, vertex_scalars, face_labels)
    elif fmt == "vtk":
        write_vtk(path, mesh, vertex_scalars, face_labels)
    else:
        raise ValueError(f"Unknown output format '{fmt}'")
