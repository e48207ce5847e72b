"""Spatially accelerated ray/triangle intersection.

A compiled Cython core is used when available; otherwise a pure-numpy
fallback with the identical BVH layout is selected at import time. Set
HAIRFIELD_PURE=1 to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _fallback

if os.environ.get("HAIRFIELD_PURE") == "1":
    _impl = _fallback
    HAVE_COMPILED = False
else:
    try:
        from . import _kernels as _impl

        HAVE_COMPILED = True
    except ImportError:
        _impl = _fallback
        HAVE_COMPILED = False

__all__ = ["Ray", "AccelIndex", "build_accel", "cast_all_hits", "HAVE_COMPILED"]


@dataclass(frozen=True)
class Ray:
    """Half-line with unit direction; t parameters are Euclidean distances."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length within 1e-9")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


class AccelIndex:
    """Immutable BVH over a triangle mesh; queries equal a brute-force scan."""

    def __init__(self, mesh, leaf_size=4, impl=None):
        if mesh.n_faces == 0:
            raise ValueError("cannot build an acceleration index over an empty mesh")
        self._impl = impl if impl is not None else _impl
        self._bvh = self._impl.build_bvh(mesh.vertices, mesh.faces, leaf_size)
        self.n_triangles = mesh.n_faces
        self.leaf_size = leaf_size

    @property
    def compiled(self):
        return self._impl is not _fallback

    def cast_all_hits(self, ray):
        """All hits with t >= 0 sorted ascending; near-duplicate t merged.

        Returns (t, face, u, v) arrays; barycentric weights of a hit are
        (1 - u - v, u, v) on the face's three corners.
        """
        if isinstance(ray, Ray):
            origin, direction = ray.origin, ray.direction
        else:
            origin, direction = ray
        return self._impl.cast_all_hits(self._bvh, origin, direction)

    def cast_min_max(self, origins, directions):
        """Nearest and farthest hit for a batch of rays.

        Returns (n_hits, t_min, t_max, face_min, face_max, uv_min, uv_max).
        """
        return self._impl.cast_min_max_batch(self._bvh, origins, directions)


def build_accel(mesh, leaf_size=4):
    return AccelIndex(mesh, leaf_size=leaf_size)


def cast_all_hits(index, ray):
    return index.cast_all_hits(ray)
