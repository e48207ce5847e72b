"""Turn ordered point clouds into triangle meshes.

Pipeline: normalize points into the unit cube, voxelize, take the exposed
voxel surface (two triangles per cube face adjacent to an empty cell), undo
the normalization, snap every voxel-surface vertex to its nearest original
point, and rewrite the faces in original-point indices. Faces whose corners
matched too far away, or collapsed onto a repeated point, are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh, bbox_diagonal

__all__ = ["VoxelGrid", "extract_faces", "extract_mesh", "extract_batch", "smooth"]

DEFAULT_VOXEL_SIZE = 1.0 / 64.0


class ExtractError(ValueError):
    pass


@dataclass(frozen=True)
class VoxelGrid:
    """Occupancy over the normalized unit cube; world = unit * scale + translation."""

    resolution: int
    occupancy: np.ndarray  # (res, res, res) bool
    scale: float
    translation: np.ndarray

    def __post_init__(self):
        if not self.scale > 0:
            raise ExtractError("voxel grid scale must be positive")


# cube corners per axis-aligned face, wound outward; order fixes determinism
_FACE_CORNERS = {
    (-1, 0, 0): [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
    (1, 0, 0): [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    (0, -1, 0): [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
    (0, 1, 0): [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    (0, 0, -1): [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
    (0, 0, 1): [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
}


def voxelize(points, voxel_size):
    """Normalize points into the unit cube and rasterize occupancy."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 4:
        raise ExtractError("need at least 4 points")
    if not 0.0 < voxel_size <= 1.0:
        raise ExtractError("voxel size must lie in (0, 1]")
    mins = pts.min(axis=0)
    extent = float((pts.max(axis=0) - mins).max())
    if extent <= 0.0:
        raise ExtractError("all points coincident")
    res = int(round(1.0 / voxel_size))
    if res < 2:
        raise ExtractError(f"voxel size {voxel_size} gives a grid smaller than 2^3")
    unit = (pts - mins) / extent
    idx = np.clip((unit * res).astype(np.int64), 0, res - 1)
    occ = np.zeros((res, res, res), dtype=bool)
    occ[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return VoxelGrid(res, occ, extent, mins)


def voxel_surface(grid):
    """Exposed-face surface mesh of the occupancy grid, in world space.

    Returns (vertices (v, 3) float64, faces (f, 3) int64) with shared cube
    corners deduplicated; deterministic for identical input.
    """
    occ = grid.occupancy
    res = grid.resolution
    corner_id = {}
    verts = []
    faces = []

    def corner(cx, cy, cz):
        key = (cx, cy, cz)
        vid = corner_id.get(key)
        if vid is None:
            vid = len(verts)
            corner_id[key] = vid
            verts.append((cx / res, cy / res, cz / res))
        return vid

    cells = np.argwhere(occ)  # lexicographic order
    for cx, cy, cz in cells:
        for (dx, dy, dz), quad in _FACE_CORNERS.items():
            nx, ny, nz = cx + dx, cy + dy, cz + dz
            inside = 0 <= nx < res and 0 <= ny < res and 0 <= nz < res
            if inside and occ[nx, ny, nz]:
                continue
            ids = [corner(cx + qx, cy + qy, cz + qz) for qx, qy, qz in quad]
            faces.append((ids[0], ids[1], ids[2]))
            faces.append((ids[0], ids[2], ids[3]))

    vertices = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    vertices = vertices * grid.scale + grid.translation
    return vertices, np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def extract_faces(points, voxel_size=DEFAULT_VOXEL_SIZE, match_threshold=None):
    """Triangle faces over the ORIGINAL point indices.

    match_threshold defaults to 2 * voxel_size * (model-space bbox diagonal);
    voxel-surface corners matching farther than that, and faces that collapse
    onto repeated points, are discarded.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    grid = voxelize(pts, voxel_size)
    if match_threshold is None:
        match_threshold = 2.0 * voxel_size * bbox_diagonal(pts)
    surf_v, surf_f = voxel_surface(grid)
    if len(surf_f) == 0:
        return np.empty((0, 3), dtype=np.int64)
    dist, nearest = cKDTree(pts).query(surf_v)
    mapped = nearest[surf_f]
    ok_dist = (dist[surf_f] <= match_threshold).all(axis=1)
    distinct = (
        (mapped[:, 0] != mapped[:, 1])
        & (mapped[:, 1] != mapped[:, 2])
        & (mapped[:, 0] != mapped[:, 2])
    )
    return np.ascontiguousarray(mapped[ok_dist & distinct])


def extract_mesh(points, voxel_size=DEFAULT_VOXEL_SIZE, match_threshold=None, colors=None):
    """Convenience wrapper returning a TriMesh over the input points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    faces = extract_faces(pts, voxel_size, match_threshold)
    return TriMesh(pts, faces, colors=colors)


def extract_batch(batches, voxel_size=DEFAULT_VOXEL_SIZE, match_threshold=None):
    """Independent per-item map of extract_faces over a list of point sets."""
    return [extract_faces(p, voxel_size, match_threshold) for p in batches]


def smooth(mesh, iterations=5, lam=0.5):
    """Uniform-weight Laplacian smoothing: v <- v + lam * (avg(neighbors) - v).

    Connectivity is untouched; vertices without neighbors stay put.
    """
    if iterations < 0:
        raise ExtractError("iterations must be >= 0")
    if not 0.0 < lam < 1.0:
        if lam != 0.0:
            raise ExtractError("lambda must lie in [0, 1)")
    if iterations == 0 or lam == 0.0 or mesh.n_faces == 0:
        return mesh
    n = mesh.n_vertices
    f = mesh.faces
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    i = np.concatenate([edges[:, 0], edges[:, 1]])
    j = np.concatenate([edges[:, 1], edges[:, 0]])
    degree = np.bincount(i, minlength=n).astype(np.float64)
    has = degree > 0
    v = mesh.vertices.copy()
    for _ in range(iterations):
        acc = np.zeros_like(v)
        np.add.at(acc, i, v[j])
        avg = np.where(has[:, None], acc / np.maximum(degree, 1.0)[:, None], v)
        v = v + lam * (avg - v)
    return mesh.with_vertices(v)
