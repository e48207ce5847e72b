# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled BVH build and ray traversal (binned SAH, Moller-Trumbore).

Shares the array layout of the pure-numpy fallback; either backend can
consume a BVH built by the other.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, INFINITY
from libc.stdlib cimport free, malloc, realloc

cnp.import_array()

DEF N_BINS = 16
DEF DET_EPS = 1e-9
DEF BARY_EPS = 1e-12
DEF STACK_CAP = 128


cdef struct Hit:
    double t
    double u
    double v
    long long face


def build_bvh(vertices, faces, int leaf_size=4):
    """Binned-SAH BVH over a triangle soup; see _fallback.build_bvh for layout."""
    cdef cnp.ndarray[double, ndim=2] v = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef cnp.ndarray[long long, ndim=2] f = np.ascontiguousarray(faces, dtype=np.int64)
    cdef Py_ssize_t m = f.shape[0]
    if m == 0:
        raise ValueError("cannot build an acceleration index over an empty mesh")

    cdef cnp.ndarray[double, ndim=2] pv0 = np.empty((m, 3))
    cdef cnp.ndarray[double, ndim=2] pe1 = np.empty((m, 3))
    cdef cnp.ndarray[double, ndim=2] pe2 = np.empty((m, 3))
    cdef cnp.ndarray[double, ndim=2] tmin = np.empty((m, 3))
    cdef cnp.ndarray[double, ndim=2] tmax = np.empty((m, 3))
    cdef cnp.ndarray[double, ndim=2] cent = np.empty((m, 3))
    cdef Py_ssize_t i, k
    cdef double a, b, c
    for i in range(m):
        for k in range(3):
            a = v[f[i, 0], k]
            b = v[f[i, 1], k]
            c = v[f[i, 2], k]
            pv0[i, k] = a
            pe1[i, k] = b - a
            pe2[i, k] = c - a
            tmin[i, k] = min(a, min(b, c))
            tmax[i, k] = max(a, max(b, c))
            cent[i, k] = (a + b + c) / 3.0

    cdef Py_ssize_t cap = 2 * m
    cdef cnp.ndarray[double, ndim=2] bmin = np.empty((cap, 3))
    cdef cnp.ndarray[double, ndim=2] bmax = np.empty((cap, 3))
    cdef cnp.ndarray[int, ndim=1] left = np.full(cap, -1, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] first = np.zeros(cap, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] count = np.zeros(cap, dtype=np.int32)
    cdef cnp.ndarray[long long, ndim=1] order = np.arange(m, dtype=np.int64)

    # explicit build stack of (node, lo, hi)
    cdef Py_ssize_t *snode = <Py_ssize_t *> malloc(sizeof(Py_ssize_t) * 3 * (m + 2))
    if snode == NULL:
        raise MemoryError()
    cdef Py_ssize_t sp = 0
    snode[0] = 0
    snode[1] = 0
    snode[2] = m
    sp = 1
    cdef Py_ssize_t n_nodes = 1

    cdef Py_ssize_t node, lo, hi, n, mid, axis, best_axis, best_bin, lchild, j, p, q
    cdef double ext, best_ext, split_pos, inv_ext, best_cost, cost
    cdef double nbmin[3]
    cdef double nbmax[3]
    cdef double cmin[3]
    cdef double cmax[3]
    cdef long long bin_count[N_BINS]
    cdef double bin_min[N_BINS][3]
    cdef double bin_max[N_BINS][3]
    cdef double lmin[3]
    cdef double lmax[3]
    cdef double larea[N_BINS]
    cdef long long lcount[N_BINS]
    cdef long long tmp_id
    cdef Py_ssize_t bidx

    while sp > 0:
        sp -= 1
        node = snode[3 * sp]
        lo = snode[3 * sp + 1]
        hi = snode[3 * sp + 2]
        n = hi - lo

        for k in range(3):
            nbmin[k] = INFINITY
            nbmax[k] = -INFINITY
            cmin[k] = INFINITY
            cmax[k] = -INFINITY
        for j in range(lo, hi):
            p = order[j]
            for k in range(3):
                if tmin[p, k] < nbmin[k]:
                    nbmin[k] = tmin[p, k]
                if tmax[p, k] > nbmax[k]:
                    nbmax[k] = tmax[p, k]
                if cent[p, k] < cmin[k]:
                    cmin[k] = cent[p, k]
                if cent[p, k] > cmax[k]:
                    cmax[k] = cent[p, k]
        for k in range(3):
            bmin[node, k] = nbmin[k]
            bmax[node, k] = nbmax[k]

        if n <= leaf_size:
            first[node] = <int> lo
            count[node] = <int> n
            continue

        best_axis = -1
        best_ext = 0.0
        for k in range(3):
            ext = cmax[k] - cmin[k]
            if ext > best_ext:
                best_ext = ext
                best_axis = k
        if best_axis < 0:
            first[node] = <int> lo
            count[node] = <int> n
            continue
        axis = best_axis
        inv_ext = N_BINS / (cmax[axis] - cmin[axis])

        for j in range(N_BINS):
            bin_count[j] = 0
            for k in range(3):
                bin_min[j][k] = INFINITY
                bin_max[j][k] = -INFINITY
        for j in range(lo, hi):
            p = order[j]
            bidx = <Py_ssize_t> ((cent[p, axis] - cmin[axis]) * inv_ext)
            if bidx >= N_BINS:
                bidx = N_BINS - 1
            bin_count[bidx] += 1
            for k in range(3):
                if tmin[p, k] < bin_min[bidx][k]:
                    bin_min[bidx][k] = tmin[p, k]
                if tmax[p, k] > bin_max[bidx][k]:
                    bin_max[bidx][k] = tmax[p, k]

        # left-to-right sweep of surface areas
        for k in range(3):
            lmin[k] = INFINITY
            lmax[k] = -INFINITY
        q = 0
        for j in range(N_BINS - 1):
            q += bin_count[j]
            for k in range(3):
                if bin_min[j][k] < lmin[k]:
                    lmin[k] = bin_min[j][k]
                if bin_max[j][k] > lmax[k]:
                    lmax[k] = bin_max[j][k]
            lcount[j] = q
            larea[j] = _half_area(lmin, lmax) if q > 0 else 0.0

        best_bin = -1
        best_cost = INFINITY
        for k in range(3):
            lmin[k] = INFINITY
            lmax[k] = -INFINITY
        q = 0
        for j in range(N_BINS - 2, -1, -1):
            q += bin_count[j + 1]
            for k in range(3):
                if bin_min[j + 1][k] < lmin[k]:
                    lmin[k] = bin_min[j + 1][k]
                if bin_max[j + 1][k] > lmax[k]:
                    lmax[k] = bin_max[j + 1][k]
            if lcount[j] == 0 or q == 0:
                continue
            cost = larea[j] * lcount[j] + _half_area(lmin, lmax) * q
            if cost < best_cost:
                best_cost = cost
                best_bin = j

        if best_bin < 0:
            # all centroids in one bin: split the range in half
            mid = lo + n // 2
        else:
            split_pos = cmin[axis] + (best_bin + 1) * (cmax[axis] - cmin[axis]) / N_BINS
            p = lo
            q = hi - 1
            while p <= q:
                if cent[order[p], axis] < split_pos:
                    p += 1
                else:
                    tmp_id = order[p]
                    order[p] = order[q]
                    order[q] = tmp_id
                    q -= 1
            mid = p
            if mid == lo or mid == hi:
                mid = lo + n // 2

        lchild = n_nodes
        n_nodes += 2
        left[node] = <int> lchild
        snode[3 * sp] = lchild + 1
        snode[3 * sp + 1] = mid
        snode[3 * sp + 2] = hi
        sp += 1
        snode[3 * sp] = lchild
        snode[3 * sp + 1] = lo
        snode[3 * sp + 2] = mid
        sp += 1

    free(snode)
    return {
        "pv0": pv0,
        "pe1": pe1,
        "pe2": pe2,
        "bmin": np.ascontiguousarray(bmin[:n_nodes]),
        "bmax": np.ascontiguousarray(bmax[:n_nodes]),
        "left": left[:n_nodes].copy(),
        "first": first[:n_nodes].copy(),
        "count": count[:n_nodes].copy(),
        "prim_order": order,
    }


cdef inline double _half_area(double *lo, double *hi) noexcept nogil:
    cdef double dx = hi[0] - lo[0]
    cdef double dy = hi[1] - lo[1]
    cdef double dz = hi[2] - lo[2]
    return dx * dy + dy * dz + dz * dx


cdef inline bint _tri_hit(const double[:, ::1] pv0, const double[:, ::1] pe1,
                          const double[:, ::1] pe2, Py_ssize_t p,
                          const double *o, const double *d, Hit *out) noexcept nogil:
    cdef double px, py, pz, det, inv, tx, ty, tz, qx, qy, qz, u, vv, t
    px = d[1] * pe2[p, 2] - d[2] * pe2[p, 1]
    py = d[2] * pe2[p, 0] - d[0] * pe2[p, 2]
    pz = d[0] * pe2[p, 1] - d[1] * pe2[p, 0]
    det = pe1[p, 0] * px + pe1[p, 1] * py + pe1[p, 2] * pz
    if fabs(det) <= DET_EPS:
        return False
    inv = 1.0 / det
    tx = o[0] - pv0[p, 0]
    ty = o[1] - pv0[p, 1]
    tz = o[2] - pv0[p, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -BARY_EPS or u > 1.0 + BARY_EPS:
        return False
    qx = ty * pe1[p, 2] - tz * pe1[p, 1]
    qy = tz * pe1[p, 0] - tx * pe1[p, 2]
    qz = tx * pe1[p, 1] - ty * pe1[p, 0]
    vv = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if vv < -BARY_EPS or u + vv > 1.0 + BARY_EPS:
        return False
    t = (pe2[p, 0] * qx + pe2[p, 1] * qy + pe2[p, 2] * qz) * inv
    if t < 0.0:
        return False
    out.t = t
    out.u = u
    out.v = vv
    return True


cdef inline bint _box_hit(const double[:, ::1] bmin, const double[:, ::1] bmax,
                          Py_ssize_t node, const double *o, const double *inv_d) noexcept nogil:
    cdef double tnear = 0.0
    cdef double tfar = INFINITY
    cdef double t0, t1, tmp
    cdef Py_ssize_t k
    for k in range(3):
        if inv_d[k] == INFINITY or inv_d[k] == -INFINITY:
            # ray parallel to slab: hit only if origin inside it
            if o[k] < bmin[node, k] or o[k] > bmax[node, k]:
                return False
            continue
        t0 = (bmin[node, k] - o[k]) * inv_d[k]
        t1 = (bmax[node, k] - o[k]) * inv_d[k]
        if t0 > t1:
            tmp = t0
            t0 = t1
            t1 = tmp
        if t0 > tnear:
            tnear = t0
        if t1 < tfar:
            tfar = t1
        if tnear > tfar:
            return False
    return True


cdef Py_ssize_t _collect(const double[:, ::1] pv0, const double[:, ::1] pe1,
                         const double[:, ::1] pe2, const double[:, ::1] bmin,
                         const double[:, ::1] bmax, const int[::1] left,
                         const int[::1] first, const int[::1] count,
                         const long long[::1] order,
                         const double *o, const double *d,
                         Hit **buf, Py_ssize_t *cap) noexcept nogil:
    """Unsorted hit list for one ray; returns -1 on allocation failure."""
    cdef double inv_d[3]
    cdef Py_ssize_t k
    for k in range(3):
        inv_d[k] = INFINITY if d[k] == 0.0 else 1.0 / d[k]

    cdef Py_ssize_t stack[STACK_CAP]
    cdef Py_ssize_t sp = 1
    stack[0] = 0
    cdef Py_ssize_t n_hits = 0
    cdef Py_ssize_t node, j, p
    cdef Hit h
    cdef Hit *grown
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _box_hit(bmin, bmax, node, o, inv_d):
            continue
        if left[node] < 0:
            for j in range(first[node], first[node] + count[node]):
                p = order[j]
                if _tri_hit(pv0, pe1, pe2, p, o, d, &h):
                    if n_hits >= cap[0]:
                        grown = <Hit *> realloc(buf[0], sizeof(Hit) * cap[0] * 2)
                        if grown == NULL:
                            return -1
                        buf[0] = grown
                        cap[0] = cap[0] * 2
                    h.face = p
                    buf[0][n_hits] = h
                    n_hits += 1
        else:
            if sp + 2 > STACK_CAP:
                return -1
            stack[sp] = left[node]
            stack[sp + 1] = left[node] + 1
            sp += 2
    return n_hits


def cast_all_hits(dict bvh, origin, direction):
    """All intersections along the half-line, sorted by t, duplicates merged."""
    cdef cnp.ndarray[double, ndim=1] o = np.ascontiguousarray(origin, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] d = np.ascontiguousarray(direction, dtype=np.float64)
    cdef const double[:, ::1] pv0 = bvh["pv0"]
    cdef const double[:, ::1] pe1 = bvh["pe1"]
    cdef const double[:, ::1] pe2 = bvh["pe2"]
    cdef const double[:, ::1] bmin = bvh["bmin"]
    cdef const double[:, ::1] bmax = bvh["bmax"]
    cdef const int[::1] left = bvh["left"]
    cdef const int[::1] first = bvh["first"]
    cdef const int[::1] count = bvh["count"]
    cdef const long long[::1] order = bvh["prim_order"]

    cdef Py_ssize_t cap = 16
    cdef Hit *buf = <Hit *> malloc(sizeof(Hit) * cap)
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t n, i
    try:
        n = _collect(pv0, pe1, pe2, bmin, bmax, left, first, count, order,
                     &o[0], &d[0], &buf, &cap)
        if n < 0:
            raise MemoryError("BVH traversal buffer allocation failed")
        t = np.empty(n)
        face = np.empty(n, dtype=np.int64)
        u = np.empty(n)
        v = np.empty(n)
        for i in range(n):
            t[i] = buf[i].t
            face[i] = buf[i].face
            u[i] = buf[i].u
            v[i] = buf[i].v
    finally:
        free(buf)
    from ._fallback import merge_duplicates
    return merge_duplicates(t, face, u, v)


def cast_min_max_batch(dict bvh, origins, directions):
    """First/last hit per ray; layout matches _fallback.cast_min_max_batch."""
    cdef cnp.ndarray[double, ndim=2] o = np.ascontiguousarray(
        np.asarray(origins, dtype=np.float64).reshape(-1, 3))
    cdef cnp.ndarray[double, ndim=2] d = np.ascontiguousarray(
        np.asarray(directions, dtype=np.float64).reshape(-1, 3))
    cdef const double[:, ::1] pv0 = bvh["pv0"]
    cdef const double[:, ::1] pe1 = bvh["pe1"]
    cdef const double[:, ::1] pe2 = bvh["pe2"]
    cdef const double[:, ::1] bmin = bvh["bmin"]
    cdef const double[:, ::1] bmax = bvh["bmax"]
    cdef const int[::1] left = bvh["left"]
    cdef const int[::1] first = bvh["first"]
    cdef const int[::1] count = bvh["count"]
    cdef const long long[::1] order = bvh["prim_order"]

    cdef Py_ssize_t n = o.shape[0]
    cdef cnp.ndarray[long long, ndim=1] n_hits = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] t_min = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1] t_max = np.zeros(n)
    cdef cnp.ndarray[long long, ndim=1] f_min = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1] f_max = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=2] uv_min = np.zeros((n, 2))
    cdef cnp.ndarray[double, ndim=2] uv_max = np.zeros((n, 2))

    cdef Py_ssize_t cap = 64
    cdef Hit *buf = <Hit *> malloc(sizeof(Hit) * cap)
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j, m, a, b
    cdef bint failed = False
    try:
        with nogil:
            for i in range(n):
                m = _collect(pv0, pe1, pe2, bmin, bmax, left, first, count, order,
                             &o[i, 0], &d[i, 0], &buf, &cap)
                if m < 0:
                    failed = True
                    break
                if m == 0:
                    continue
                a = 0
                b = 0
                for j in range(1, m):
                    if buf[j].t < buf[a].t:
                        a = j
                    if buf[j].t > buf[b].t:
                        b = j
                n_hits[i] = m
                t_min[i] = buf[a].t
                f_min[i] = buf[a].face
                uv_min[i, 0] = buf[a].u
                uv_min[i, 1] = buf[a].v
                t_max[i] = buf[b].t
                f_max[i] = buf[b].face
                uv_max[i, 0] = buf[b].u
                uv_max[i, 1] = buf[b].v
    finally:
        free(buf)
    if failed:
        raise MemoryError("BVH traversal buffer allocation failed")
    return n_hits, t_min, t_max, f_min, f_max, uv_min, uv_max
