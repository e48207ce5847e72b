"""Geometric evaluation: two-sided Chamfer distance, NRMSE, Recall.

Nearest-neighbor queries run over a k-d tree whose results equal brute
force. NRMSE normalizes by the ground-truth bounding-box diagonal; the
default recall threshold is 1% of that diagonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh, bbox_diagonal, face_normals_areas

__all__ = [
    "EvalReport",
    "chamfer",
    "nrmse",
    "recall",
    "evaluate",
    "mesh_to_points",
    "point_mesh_distance",
]

DEFAULT_RECALL_FRACTION = 0.01


@dataclass
class EvalReport:
    chamfer: float
    nrmse: float
    recall: float
    threshold: float
    normalizer: float
    n_pred: int
    n_gt: int

    def to_json(self):
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _points(x):
    pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("point set is empty")
    return pts


def chamfer(a, b):
    """Mean squared NN distance a->b plus mean squared NN distance b->a."""
    a = _points(a)
    b = _points(b)
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(np.mean(d_ab ** 2) + np.mean(d_ba ** 2))


def nrmse(pred, gt):
    """RMSE of per-GT-point NN distances to pred over the GT bbox diagonal."""
    pred = _points(pred)
    gt = _points(gt)
    diag = bbox_diagonal(gt)
    if diag <= 0:
        raise ValueError("ground truth is degenerate (zero bbox diagonal)")
    d, _ = cKDTree(pred).query(gt)
    return float(np.sqrt(np.mean(d ** 2)) / diag)


def recall(pred, gt, threshold):
    """Fraction of GT points within threshold of some prediction point."""
    if not threshold > 0:
        raise ValueError("recall threshold must be positive")
    pred = _points(pred)
    gt = _points(gt)
    d, _ = cKDTree(pred).query(gt)
    return float(np.mean(d <= threshold))


def evaluate(pred, gt, threshold=None):
    pred = _points(pred)
    gt = _points(gt)
    diag = bbox_diagonal(gt)
    if threshold is None:
        threshold = DEFAULT_RECALL_FRACTION * diag
    return EvalReport(
        chamfer=chamfer(pred, gt),
        nrmse=nrmse(pred, gt),
        recall=recall(pred, gt, threshold),
        threshold=float(threshold),
        normalizer=float(diag),
        n_pred=len(pred),
        n_gt=len(gt),
    )


def mesh_to_points(mesh, surface_samples=0, seed=0):
    """Vertices of a mesh, optionally plus uniform area-weighted surface
    samples (deterministic given the seed)."""
    pts = mesh.vertices
    if surface_samples > 0 and mesh.n_faces > 0:
        rng = np.random.default_rng(seed)
        _, areas = face_normals_areas(mesh)
        total = areas.sum()
        if total > 0:
            fid = rng.choice(mesh.n_faces, size=surface_samples, p=areas / total)
            u = rng.random(surface_samples)
            v = rng.random(surface_samples)
            over = u + v > 1
            u[over] = 1 - u[over]
            v[over] = 1 - v[over]
            tri = mesh.vertices[mesh.faces[fid]]
            samples = (1 - u - v)[:, None] * tri[:, 0] + u[:, None] * tri[:, 1] + v[:, None] * tri[:, 2]
            pts = np.vstack([pts, samples])
    return pts


def point_mesh_distance(points, mesh, chunk=256):
    """Exact distance from each point to the closest triangle of a mesh.

    Brute force over triangles, chunked over points; intended for tests and
    coverage checks, not hot paths.
    """
    pts = _points(points)
    v = mesh.vertices
    f = mesh.faces
    if len(f) == 0:
        raise ValueError("mesh has no faces")
    a = v[f[:, 0]]
    ab = v[f[:, 1]] - a
    ac = v[f[:, 2]] - a
    out = np.empty(len(pts))
    for lo in range(0, len(pts), chunk):
        p = pts[lo:lo + chunk]
        out[lo:lo + chunk] = _point_tri_min(p, a, ab, ac)
    return out


def _point_tri_min(p, a, ab, ac):
    """Min distance from each point in p to any triangle (a, a+ab, a+ac)."""
    # closest point on triangle via projection onto the supporting plane and
    # clamping of barycentric coordinates (Ericson, Real-Time Collision
    # Detection, section 5.1.5), vectorized over points x triangles
    ap = p[:, None, :] - a[None, :, :]  # (P, T, 3)
    d1 = np.einsum("tk,ptk->pt", ab, ap)
    d2 = np.einsum("tk,ptk->pt", ac, ap)
    dot_abab = np.einsum("tk,tk->t", ab, ab)
    dot_abac = np.einsum("tk,tk->t", ab, ac)
    dot_acac = np.einsum("tk,tk->t", ac, ac)
    denom = dot_abab * dot_acac - dot_abac ** 2
    denom = np.where(denom > 0, denom, 1.0)
    v = (dot_acac * d1 - dot_abac * d2) / denom
    w = (dot_abab * d2 - dot_abac * d1) / denom
    v = np.clip(v, 0.0, 1.0)
    w = np.clip(w, 0.0, 1.0)
    over = v + w > 1.0
    # renormalize onto the diagonal edge where the clamped pair overflows
    scale = np.where(over, v + w, 1.0)
    v = np.where(over, v / scale, v)
    w = np.where(over, w / scale, w)
    closest = a + v[..., None] * ab + w[..., None] * ac
    d_plane = np.linalg.norm(p[:, None, :] - closest, axis=2)
    # clamped-plane projection is not exact near edges; refine with edge checks
    d_edges = np.minimum(
        _point_seg_min(p, a, ab),
        np.minimum(_point_seg_min(p, a, ac), _point_seg_min(p, a + ab, ac - ab)),
    )
    return np.minimum(d_plane, d_edges).min(axis=1)


def _point_seg_min(p, s0, d):
    sp = p[:, None, :] - s0[None, :, :]
    dd = np.einsum("tk,tk->t", d, d)
    dd = np.where(dd > 0, dd, 1.0)
    t = np.clip(np.einsum("tk,ptk->pt", d, sp) / dd, 0.0, 1.0)
    closest = s0 + t[..., None] * d
    return np.linalg.norm(p[:, None, :] - closest, axis=2)
