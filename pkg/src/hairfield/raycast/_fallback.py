"""Pure-numpy BVH build and traversal, used when the compiled core is absent.

Array layout is identical to the Cython kernels so the two backends are
interchangeable: median-split BVH over triangle centroids, leaf size <= 4,
Moller-Trumbore intersection with a 1e-9 determinant epsilon.
"""

from __future__ import annotations

import numpy as np

DET_EPS = 1e-9
BARY_EPS = 1e-12


def build_bvh(vertices, faces, leaf_size=4):
    """Build BVH arrays over a triangle soup.

    Returns a dict with prim data (pv0, pe1, pe2), node bounds (bmin, bmax),
    node children (left, -1 for leaves), leaf ranges (first, count) and the
    primitive permutation prim_order.
    """
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    m = len(f)
    if m == 0:
        raise ValueError("cannot build an acceleration index over an empty mesh")
    pv0 = np.ascontiguousarray(v[f[:, 0]])
    pe1 = np.ascontiguousarray(v[f[:, 1]] - v[f[:, 0]])
    pe2 = np.ascontiguousarray(v[f[:, 2]] - v[f[:, 0]])
    tri = v[f]  # (m, 3, 3)
    tmin = tri.min(axis=1)
    tmax = tri.max(axis=1)
    cent = tri.mean(axis=1)

    cap = 2 * m
    bmin = np.empty((cap, 3))
    bmax = np.empty((cap, 3))
    left = np.full(cap, -1, dtype=np.int32)
    first = np.zeros(cap, dtype=np.int32)
    count = np.zeros(cap, dtype=np.int32)
    order = np.arange(m, dtype=np.int64)

    n_nodes = 1
    stack = [(0, 0, m)]
    while stack:
        node, lo, hi = stack.pop()
        ids = order[lo:hi]
        bmin[node] = tmin[ids].min(axis=0)
        bmax[node] = tmax[ids].max(axis=0)
        n = hi - lo
        if n <= leaf_size:
            first[node] = lo
            count[node] = n
            continue
        c = cent[ids]
        extent = c.max(axis=0) - c.min(axis=0)
        axis = int(np.argmax(extent))
        if extent[axis] <= 0.0:
            first[node] = lo
            count[node] = n
            continue
        key = np.argsort(c[:, axis], kind="stable")
        order[lo:hi] = ids[key]
        mid = lo + n // 2
        lchild = n_nodes
        n_nodes += 2
        left[node] = lchild
        stack.append((lchild + 1, mid, hi))
        stack.append((lchild, lo, mid))

    return {
        "pv0": pv0,
        "pe1": pe1,
        "pe2": pe2,
        "bmin": np.ascontiguousarray(bmin[:n_nodes]),
        "bmax": np.ascontiguousarray(bmax[:n_nodes]),
        "left": left[:n_nodes],
        "first": first[:n_nodes],
        "count": count[:n_nodes],
        "prim_order": order,
    }


def _candidates(bvh, origin, direction):
    """Primitive ids of every leaf whose AABB the ray touches."""
    bmin, bmax = bvh["bmin"], bvh["bmax"]
    left, first, count = bvh["left"], bvh["first"], bvh["count"]
    order = bvh["prim_order"]
    with np.errstate(divide="ignore"):
        inv = 1.0 / direction
    out = []
    stack = [0]
    while stack:
        node = stack.pop()
        t0 = (bmin[node] - origin) * inv
        t1 = (bmax[node] - origin) * inv
        near = np.minimum(t0, t1)
        far = np.maximum(t0, t1)
        # NaNs from 0/0 mean the ray lies on a slab boundary; treat as hit
        tnear = np.nanmax(near, initial=0.0)
        tfar = np.nanmin(far, initial=np.inf)
        if tnear > tfar:
            continue
        if left[node] < 0:
            lo = first[node]
            out.append(order[lo:lo + count[node]])
        else:
            stack.append(left[node] + 1)
            stack.append(left[node])
    if not out:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(out)


def _intersect(bvh, ids, origin, direction):
    """Moller-Trumbore over the given primitive ids; returns (t, face, u, v)."""
    v0 = bvh["pv0"][ids]
    e1 = bvh["pe1"][ids]
    e2 = bvh["pe2"][ids]
    pvec = np.cross(np.broadcast_to(direction, e2.shape), e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > DET_EPS
    inv = np.zeros_like(det)
    inv[ok] = 1.0 / det[ok]
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = qvec @ direction * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    ok &= (u >= -BARY_EPS) & (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS) & (t >= 0.0)
    return t[ok], ids[ok], u[ok], v[ok]


def merge_duplicates(t, face, u, v, eps=1e-7):
    """Sort hits by t and collapse runs closer than eps (shared-edge hits)."""
    if len(t) == 0:
        return t, face, u, v
    key = np.argsort(t, kind="stable")
    t, face, u, v = t[key], face[key], u[key], v[key]
    keep = [0]
    last = t[0]
    for i in range(1, len(t)):
        if t[i] - last >= eps:
            keep.append(i)
            last = t[i]
    keep = np.asarray(keep)
    return t[keep], face[keep], u[keep], v[keep]


def cast_all_hits(bvh, origin, direction):
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    ids = np.unique(_candidates(bvh, origin, direction))
    t, face, u, v = _intersect(bvh, ids, origin, direction)
    return merge_duplicates(t, face, u, v)


def cast_min_max_batch(bvh, origins, directions):
    """First/last hit per ray.

    Returns (n_hits, t_min, t_max, face_min, face_max, uv_min, uv_max); rays
    without hits have n_hits 0 and undefined other slots.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    n_hits = np.zeros(n, dtype=np.int64)
    t_min = np.zeros(n)
    t_max = np.zeros(n)
    f_min = np.full(n, -1, dtype=np.int64)
    f_max = np.full(n, -1, dtype=np.int64)
    uv_min = np.zeros((n, 2))
    uv_max = np.zeros((n, 2))
    for i in range(n):
        ids = np.unique(_candidates(bvh, origins[i], directions[i]))
        t, face, u, v = _intersect(bvh, ids, origins[i], directions[i])
        if len(t) == 0:
            continue
        a = int(np.argmin(t))
        b = int(np.argmax(t))
        n_hits[i] = len(t)
        t_min[i], f_min[i], uv_min[i] = t[a], face[a], (u[a], v[a])
        t_max[i], f_max[i], uv_max[i] = t[b], face[b], (u[b], v[b])
    return n_hits, t_min, t_max, f_min, f_max, uv_min, uv_max
