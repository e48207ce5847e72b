"""Triangle meshes with optional per-vertex color: load, validate, write, normals.

Supported formats: OBJ (ASCII, with the 6-number ``v x y z r g b`` color
extension) and PLY (ASCII and binary little-endian, uchar or float color
properties). Winding convention is counter-clockwise = outward.
"""

from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np

__all__ = [
    "TriMesh",
    "MeshError",
    "load_mesh",
    "write_mesh",
    "vertex_normals",
    "bbox_diagonal",
]


class MeshError(ValueError):
    """Raised on parse or validation failures in mesh I/O."""


class TriMesh:
    """Immutable triangle mesh.

    vertices : (n, 3) float64
    faces    : (m, 3) int64, indices into vertices, three distinct per face
    colors   : optional (n, 3) float64 RGB in [0, 1]
    normals  : optional (n, 3) float64 unit vectors (zero rows mark isolated
               vertices with no valid normal)
    """

    def __init__(self, vertices, faces, colors=None, normals=None):
        v = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        f = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if not np.isfinite(v).all():
            raise MeshError("vertex coordinates must be finite")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError(
                f"face index out of range: max {f.max() if f.size else 0} "
                f"over {len(v)} vertices"
            )
        if f.size:
            degen = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degen.any():
                raise MeshError(f"{int(degen.sum())} degenerate faces (repeated indices)")
        if colors is not None:
            colors = np.ascontiguousarray(colors, dtype=np.float64).reshape(-1, 3)
            if len(colors) != len(v):
                raise MeshError("color count does not match vertex count")
            if colors.size and (colors.min() < -1e-9 or colors.max() > 1 + 1e-9):
                raise MeshError("colors must lie in [0, 1]")
            colors = np.clip(colors, 0.0, 1.0)
            colors.setflags(write=False)
        if normals is not None:
            normals = np.ascontiguousarray(normals, dtype=np.float64).reshape(-1, 3)
            if len(normals) != len(v):
                raise MeshError("normal count does not match vertex count")
            lens = np.linalg.norm(normals, axis=1)
            bad = np.abs(lens - 1.0) > 1e-6
            if (bad & (lens > 0)).any():
                raise MeshError("stored normals must have unit length within 1e-6")
            normals.setflags(write=False)
        v.setflags(write=False)
        f.setflags(write=False)
        self.vertices = v
        self.faces = f
        self.colors = colors
        self.normals = normals

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def with_vertices(self, vertices):
        """Copy of the mesh with replaced vertex positions (normals dropped)."""
        return TriMesh(vertices, self.faces, colors=self.colors)

    def __repr__(self):
        return f"TriMesh({self.n_vertices} vertices, {self.n_faces} faces)"


def _drop_degenerate(faces, n_vertices, path):
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= n_vertices):
        bad = int(faces.max())
        raise MeshError(f"{path}: face index {bad} out of range for {n_vertices} vertices")
    if not faces.size:
        return faces
    degen = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    if degen.any():
        warnings.warn(f"{path}: dropped {int(degen.sum())} degenerate faces")
        faces = faces[~degen]
    return faces


def _load_obj(path):
    vertices = []
    colors = []
    faces = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    if len(parts) not in (4, 7):
                        raise ValueError("expected 3 or 6 numbers after 'v'")
                    vals = [float(x) for x in parts[1:]]
                    vertices.append(vals[:3])
                    if len(vals) == 6:
                        colors.append(vals[3:])
                elif tag == "f":
                    idx = []
                    for tok in parts[1:]:
                        i = int(tok.split("/")[0])
                        # OBJ is 1-based; negatives count from the end
                        idx.append(i - 1 if i > 0 else len(vertices) + i)
                    if len(idx) < 3:
                        raise ValueError("face needs at least 3 indices")
                    for k in range(1, len(idx) - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
            except ValueError as exc:
                raise MeshError(f"{path}:{lineno}: {exc}") from exc
    if colors and len(colors) != len(vertices):
        raise MeshError(f"{path}: only some vertices carry colors")
    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    face_arr = _drop_degenerate(np.asarray(faces, dtype=np.int64).reshape(-1, 3), len(verts), path)
    return TriMesh(verts, face_arr, colors=np.asarray(colors) if colors else None)


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


def _load_ply(path):
    with open(path, "rb") as fh:
        data = fh.read()
    header_end = data.find(b"end_header")
    if not data.startswith(b"ply") or header_end < 0:
        raise MeshError(f"{path}: not a PLY file")
    header_end = data.index(b"\n", header_end) + 1
    header = data[:header_end].decode("ascii", errors="replace")
    body = data[header_end:]

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype, is_list, count_dtype)])
    for lineno, line in enumerate(header.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshError(f"{path}:{lineno}: property before element")
            if parts[1] == "list":
                elements[-1][2].append((parts[4], _PLY_TYPES[parts[3]], True, _PLY_TYPES[parts[2]]))
            else:
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]], False, None))
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshError(f"{path}: unsupported PLY format {fmt!r}")

    verts = None
    colors = None
    faces = []
    if fmt == "ascii":
        tokens = body.decode("ascii", errors="replace").split()
        pos = 0
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                row = {}
                for pname, dt, is_list, _cdt in props:
                    if is_list:
                        try:
                            n = int(tokens[pos]); pos += 1
                            row[pname] = [float(tokens[pos + k]) for k in range(n)]
                            pos += n
                        except (IndexError, ValueError) as exc:
                            raise MeshError(f"{path}: truncated element {name!r} at token {pos}") from exc
                    else:
                        try:
                            row[pname] = float(tokens[pos]); pos += 1
                        except (IndexError, ValueError) as exc:
                            raise MeshError(f"{path}: truncated element {name!r} at token {pos}") from exc
                rows.append(row)
            verts, colors, faces = _collect_ply_element(name, rows, props, verts, colors, faces)
    else:
        offset = 0
        for name, count, props in elements:
            if name == "vertex" and all(not p[2] for p in props):
                dtype = np.dtype([(p[0], "<" + p[1]) for p in props])
                end = offset + dtype.itemsize * count
                if end > len(body):
                    raise MeshError(f"{path}: truncated vertex data at byte {len(body)}")
                arr = np.frombuffer(body[offset:end], dtype=dtype)
                offset = end
                rows = [{p[0]: float(arr[p[0]][i]) for p in props} for i in range(count)]
            else:
                rows = []
                for _ in range(count):
                    row = {}
                    for pname, dt, is_list, cdt in props:
                        if is_list:
                            csize = np.dtype(cdt).itemsize
                            if offset + csize > len(body):
                                raise MeshError(f"{path}: truncated list at byte {offset}")
                            n = int(np.frombuffer(body[offset:offset + csize], dtype="<" + cdt)[0])
                            offset += csize
                            isize = np.dtype(dt).itemsize
                            if offset + isize * n > len(body):
                                raise MeshError(f"{path}: truncated list at byte {offset}")
                            row[pname] = np.frombuffer(body[offset:offset + isize * n], dtype="<" + dt).tolist()
                            offset += isize * n
                        else:
                            isize = np.dtype(dt).itemsize
                            if offset + isize > len(body):
                                raise MeshError(f"{path}: truncated scalar at byte {offset}")
                            row[pname] = float(np.frombuffer(body[offset:offset + isize], dtype="<" + dt)[0])
                            offset += isize
                    rows.append(row)
            verts, colors, faces = _collect_ply_element(name, rows, props, verts, colors, faces)

    if verts is None:
        raise MeshError(f"{path}: no vertex element")
    face_arr = _drop_degenerate(np.asarray(faces, dtype=np.int64).reshape(-1, 3), len(verts), path)
    return TriMesh(verts, face_arr, colors=colors)


def _collect_ply_element(name, rows, props, verts, colors, faces):
    if name == "vertex":
        verts = np.array([[r["x"], r["y"], r["z"]] for r in rows], dtype=np.float64).reshape(-1, 3)
        prop_names = {p[0]: p[1] for p in props}
        if {"red", "green", "blue"} <= set(prop_names):
            colors = np.array([[r["red"], r["green"], r["blue"]] for r in rows], dtype=np.float64)
            if prop_names["red"] == "u1":
                colors /= 255.0
            colors = colors.reshape(-1, 3)
    elif name == "face":
        key = "vertex_indices" if rows and "vertex_indices" in rows[0] else "vertex_index"
        for r in rows:
            idx = [int(i) for i in r[key]]
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    return verts, colors, faces


def load_mesh(path):
    """Load an OBJ or PLY mesh (format chosen by suffix)."""
    path = Path(path)
    if not path.exists():
        raise MeshError(f"{path}: no such file")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return _load_obj(path)
    if suffix == ".ply":
        return _load_ply(path)
    raise MeshError(f"{path}: unsupported mesh format {suffix!r}")


def write_mesh(path, mesh, binary=True):
    """Write OBJ (ASCII) or PLY (binary LE by default, ASCII with binary=False)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        _write_obj(path, mesh)
    elif suffix == ".ply":
        _write_ply(path, mesh, binary=binary)
    else:
        raise MeshError(f"{path}: unsupported mesh format {suffix!r}")


def obj_text(mesh):
    """OBJ serialization as a string (per-vertex colors via the 6-number
    "v" line extension)."""
    lines = []
    if mesh.colors is not None:
        for v, c in zip(mesh.vertices.tolist(), mesh.colors.tolist()):
            lines.append(f"v {v[0]!r} {v[1]!r} {v[2]!r} {c[0]!r} {c[1]!r} {c[2]!r}")
    else:
        for v in mesh.vertices.tolist():
            lines.append(f"v {v[0]!r} {v[1]!r} {v[2]!r}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    lines.append("")
    return "\n".join(lines)


def _write_obj(path, mesh):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(obj_text(mesh))


def _write_ply(path, mesh, binary=True):
    has_color = mesh.colors is not None
    lines = [
        "ply",
        "format binary_little_endian 1.0" if binary else "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property float64 x",
        "property float64 y",
        "property float64 z",
    ]
    if has_color:
        lines += ["property float64 red", "property float64 green", "property float64 blue"]
    lines += [
        f"element face {mesh.n_faces}",
        "property list uchar int32 vertex_indices",
        "end_header",
    ]
    header = ("\n".join(lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            vdata = mesh.vertices
            if has_color:
                vdata = np.hstack([mesh.vertices, mesh.colors])
            fh.write(np.ascontiguousarray(vdata, dtype="<f8").tobytes())
            for f in mesh.faces:
                fh.write(struct.pack("<Biii", 3, int(f[0]), int(f[1]), int(f[2])))
        else:
            for i, v in enumerate(mesh.vertices):
                row = [repr(float(x)) for x in v]
                if has_color:
                    row += [repr(float(x)) for x in mesh.colors[i]]
                fh.write((" ".join(row) + "\n").encode("ascii"))
            for f in mesh.faces:
                fh.write(f"3 {f[0]} {f[1]} {f[2]}\n".encode("ascii"))


def face_normals_areas(mesh):
    """Per-face unit normals and areas; degenerate faces get zero normal/area."""
    v = mesh.vertices
    f = mesh.faces
    cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    norms = np.linalg.norm(cross, axis=1)
    areas = 0.5 * norms
    unit = np.zeros_like(cross)
    ok = norms > 0
    unit[ok] = cross[ok] / norms[ok, None]
    return unit, areas


def vertex_normals(mesh):
    """Area-weighted vertex normals.

    Isolated vertices (and vertices whose incident face normals cancel)
    get the zero vector.
    """
    v = mesh.vertices
    f = mesh.faces
    # cross product length is twice the face area, so summing raw cross
    # products per incident vertex is exactly area weighting
    cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    acc = np.zeros_like(v)
    for k in range(3):
        np.add.at(acc, f[:, k], cross)
    lens = np.linalg.norm(acc, axis=1)
    out = np.zeros_like(acc)
    ok = lens > 1e-300
    out[ok] = acc[ok] / lens[ok, None]
    return out


def bbox_diagonal(points_or_mesh):
    """Euclidean length of the axis-aligned bounding-box diagonal."""
    pts = points_or_mesh.vertices if isinstance(points_or_mesh, TriMesh) else np.asarray(points_or_mesh, dtype=np.float64)
    if pts.size == 0:
        raise MeshError("empty mesh has no bounding box")
    pts = pts.reshape(-1, 3)
    return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
