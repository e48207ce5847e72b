"""Shared multi-step compositions used by both the CLI and the HTTP service."""

from __future__ import annotations

import numpy as np

from .extract import DEFAULT_VOXEL_SIZE, extract_mesh, smooth as smooth_mesh
from .field import reconstruct_vertices
from .mesh import vertex_normals
from .scalp import build_frames, place_rays
from .shading import shade

__all__ = ["build_rayset", "field_to_mesh"]


def build_rayset(head, scalp, template):
    """World-space rays of a template placed at every scalp vertex of a head."""
    frames = build_frames(head, scalp)
    positions = head.vertices[scalp.vertex_ids]
    return place_rays(frames, positions, template,
                      template_hash=template.content_hash(),
                      scalp_hash=scalp.content_hash())


def field_to_mesh(field, rays, voxel_size=DEFAULT_VOXEL_SIZE, smooth_iterations=0,
                  smooth_lambda=0.5, sh_coeffs=None, albedo_vector=None):
    """Field -> mesh: reconstruct nonzero vertices, mesh them over the voxel
    surface, optionally smooth, optionally bake order-2 SH lighting into the
    vertex colors sampled from the field's albedo.
    """
    verts, tags = reconstruct_vertices(field, rays, drop_zeros=True)
    if len(verts) == 0:
        raise ValueError("field carries no hair (all distances zero)")
    colors = None
    if albedo_vector is None:
        albedo_vector = field.albedo_vector()
    albedo = np.asarray(albedo_vector, dtype=np.float64).reshape(field.n_s, field.n_r, 2, 3)
    colors = albedo[tags[:, 0], tags[:, 1], tags[:, 2]]
    mesh = extract_mesh(verts, voxel_size, colors=np.clip(colors, 0.0, 1.0))
    if smooth_iterations > 0:
        mesh = smooth_mesh(mesh, smooth_iterations, smooth_lambda)
    if sh_coeffs is not None and mesh.colors is not None:
        normals = vertex_normals(mesh)
        shaded = shade(mesh.colors, normals, sh_coeffs)
        mesh = type(mesh)(mesh.vertices, mesh.faces, colors=shaded)
    return mesh
