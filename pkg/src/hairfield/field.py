"""Ray-distance fields: capture from a hair mesh, ordered vertex
reconstruction, and the morphable-field operations (fuse, flip, thickness
scaling, exclusion, perturbation).

A field stores, per scalp vertex i and template direction n, the nearest and
farthest ray-hit distances plus an RGB albedo sample for each of the two
slots. Entries where the ray misses encode both distances as zero ("case 1")
and carry the mean skin color; that zero-coupling (d_min = 0 iff d_max = 0)
is re-established after every operation. Arrays are float32 so the SRMH file
format round-trips bit-exactly.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .raycast import AccelIndex

__all__ = [
    "RayDistanceField",
    "ExclusionMap",
    "DEFAULT_SKIN_COLOR",
    "analyze",
    "reconstruct_vertices",
    "fuse",
    "flip",
    "scale_thickness",
    "apply_exclusion",
    "perturb",
    "binarize_exclusion",
    "save_field",
    "load_field",
]

DEFAULT_SKIN_COLOR = (0.6, 0.45, 0.35)

SRMH_MAGIC = b"SRMH"
SRMH_VERSION = 1


class FieldError(ValueError):
    pass


class RayDistanceField:
    """d_min, d_max: (n_s, n_r) float32; albedo: (n_s, n_r, 2, 3) float32
    with slot order (min-hit, max-hit)."""

    def __init__(self, d_min, d_max, albedo, template_hash, scalp_hash):
        d_min = np.ascontiguousarray(d_min, dtype=np.float32)
        d_max = np.ascontiguousarray(d_max, dtype=np.float32)
        albedo = np.ascontiguousarray(albedo, dtype=np.float32)
        if d_min.shape != d_max.shape or d_min.ndim != 2:
            raise FieldError("d_min/d_max must both be (n_s, n_r)")
        if albedo.shape != d_min.shape + (2, 3):
            raise FieldError("albedo must be (n_s, n_r, 2, 3)")
        if not (np.isfinite(d_min).all() and np.isfinite(d_max).all() and np.isfinite(albedo).all()):
            raise FieldError("field values must be finite")
        if (d_min < 0).any() or (d_max < 0).any():
            raise FieldError("distances must be non-negative")
        if (d_min > d_max).any():
            raise FieldError("d_min must not exceed d_max")
        if ((d_min == 0) != (d_max == 0)).any():
            raise FieldError("zero-coupling violated: d_min = 0 iff d_max = 0")
        for a in (d_min, d_max, albedo):
            a.setflags(write=False)
        self.d_min = d_min
        self.d_max = d_max
        self.albedo = albedo
        self.template_hash = bytes(template_hash)
        self.scalp_hash = bytes(scalp_hash)

    @property
    def n_s(self):
        return self.d_min.shape[0]

    @property
    def n_r(self):
        return self.d_min.shape[1]

    def distance_vector(self):
        """Flat (n_s * n_r * 2,) float64 vector in (i, n, slot) order."""
        return np.stack([self.d_min, self.d_max], axis=-1).astype(np.float64).ravel()

    def albedo_vector(self):
        """Flat (3 * n_s * n_r * 2,) float64 vector, same entry order."""
        return self.albedo.astype(np.float64).ravel()

    def support(self):
        """Boolean (n_s, n_r) mask of entries that carry hair."""
        return self.d_max > 0

    def same_meta(self, other):
        return (
            self.d_min.shape == other.d_min.shape
            and self.template_hash == other.template_hash
            and self.scalp_hash == other.scalp_hash
        )


class ExclusionMap:
    """Binary masks flagging (i, n) slots whose distances are outliers."""

    def __init__(self, ex_min, ex_max):
        ex_min = np.ascontiguousarray(ex_min, dtype=np.uint8)
        ex_max = np.ascontiguousarray(ex_max, dtype=np.uint8)
        if ex_min.shape != ex_max.shape or ex_min.ndim != 2:
            raise FieldError("exclusion maps must both be (n_s, n_r)")
        if not (np.isin(ex_min, (0, 1)).all() and np.isin(ex_max, (0, 1)).all()):
            raise FieldError("exclusion map values must be 0 or 1")
        ex_min.setflags(write=False)
        ex_max.setflags(write=False)
        self.ex_min = ex_min
        self.ex_max = ex_max


def _from_vectors(d_vec, albedo_vec, n_s, n_r, template_hash, scalp_hash,
                  skin_color=DEFAULT_SKIN_COLOR):
    """Build a field from flat (i, n, slot) vectors, enforcing invariants."""
    d = np.asarray(d_vec, dtype=np.float64).reshape(n_s, n_r, 2)
    a = np.asarray(albedo_vec, dtype=np.float64).reshape(n_s, n_r, 2, 3)
    d = np.clip(d, 0.0, None)
    d_min = np.minimum(d[..., 0], d[..., 1])
    d_max = np.maximum(d[..., 0], d[..., 1])
    dead = (d_min <= 0) | (d_max <= 0)
    d_min[dead] = 0.0
    d_max[dead] = 0.0
    a = np.clip(a, 0.0, 1.0)
    albedo = np.empty((n_s, n_r, 2, 3), dtype=np.float32)
    albedo[:] = a
    return RayDistanceField(d_min, d_max, albedo, template_hash, scalp_hash)


def analyze(hair, rays, skin_mean_color=DEFAULT_SKIN_COLOR, index=None):
    """Capture the ray-distance and albedo field of a hair mesh.

    Per ray: no hits -> both distances 0 and both albedo slots the mean skin
    color; otherwise the nearest/farthest hit distances with the
    barycentric-interpolated vertex color at each hit (skin color when the
    hair mesh carries no colors).
    """
    if hair.n_faces == 0:
        raise FieldError("hair mesh has no faces")
    skin = np.asarray(skin_mean_color, dtype=np.float64).reshape(3)
    if index is None:
        index = AccelIndex(hair)
    n_s, n_r = rays.n_s, rays.n_r
    origins = np.repeat(rays.origins, n_r, axis=0)
    dirs = rays.directions.reshape(-1, 3)

    workers = max(1, int(os.environ.get("SRMH_THREADS", "1")))
    if workers > 1 and len(origins) > workers:
        chunks = np.array_split(np.arange(len(origins)), workers)
        parts = [None] * len(chunks)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(index.cast_min_max, origins[c], dirs[c])
                for c in chunks
            ]
            for k, fut in enumerate(futs):
                parts[k] = fut.result()
        n_hits = np.concatenate([p[0] for p in parts])
        t_min = np.concatenate([p[1] for p in parts])
        t_max = np.concatenate([p[2] for p in parts])
        f_min = np.concatenate([p[3] for p in parts])
        f_max = np.concatenate([p[4] for p in parts])
        uv_min = np.concatenate([p[5] for p in parts])
        uv_max = np.concatenate([p[6] for p in parts])
    else:
        n_hits, t_min, t_max, f_min, f_max, uv_min, uv_max = index.cast_min_max(origins, dirs)

    hit = n_hits > 0
    d_min = np.where(hit, t_min, 0.0).reshape(n_s, n_r)
    d_max = np.where(hit, t_max, 0.0).reshape(n_s, n_r)

    albedo = np.empty((len(origins), 2, 3), dtype=np.float64)
    albedo[:] = skin
    if hair.colors is not None and hit.any():
        faces = hair.faces
        colors = hair.colors
        for slot, (fids, uv) in enumerate([(f_min, uv_min), (f_max, uv_max)]):
            fh = fids[hit]
            u = uv[hit, 0][:, None]
            v = uv[hit, 1][:, None]
            c = (1.0 - u - v) * colors[faces[fh, 0]] + u * colors[faces[fh, 1]] + v * colors[faces[fh, 2]]
            albedo[hit, slot] = np.clip(c, 0.0, 1.0)
    albedo = albedo.reshape(n_s, n_r, 2, 3)

    # a hit exactly at t = 0 would break zero-coupling; treat it as a miss
    dead = (d_min <= 0) | (d_max <= 0)
    d_min[dead] = 0.0
    d_max[dead] = 0.0
    albedo[dead] = skin
    return RayDistanceField(d_min, d_max, albedo, rays.template_hash, rays.scalp_hash)


def reconstruct_vertices(field, rays, drop_zeros=False):
    """Ordered hair-surface vertices: origin + direction * distance.

    Returns (vertices (M, 3) float64, tags (M, 3) int64) with tags (i, n, k),
    k = 0 for the min slot and 1 for the max slot. Without drop_zeros M is
    exactly n_s * n_r * 2; with it, zero-distance entries are omitted while
    preserving order.
    """
    if (field.n_s, field.n_r) != (rays.n_s, rays.n_r):
        raise FieldError("field shape does not match ray set")
    if field.template_hash != rays.template_hash or field.scalp_hash != rays.scalp_hash:
        raise FieldError("field and ray set come from different template/scalp")
    n_s, n_r = field.n_s, field.n_r
    d = np.stack([field.d_min, field.d_max], axis=-1).astype(np.float64)  # (n_s, n_r, 2)
    origins = rays.origins[:, None, None, :]
    dirs = rays.directions[:, :, None, :]
    verts = (origins + dirs * d[..., None]).reshape(-1, 3)
    tags = np.stack(
        np.meshgrid(np.arange(n_s), np.arange(n_r), np.arange(2), indexing="ij"),
        axis=-1,
    ).reshape(-1, 3).astype(np.int64)
    if drop_zeros:
        keep = d.reshape(-1) > 0
        verts = verts[keep]
        tags = tags[keep]
    return verts, tags


def fuse(fields, weights, mask_aware=False, skin_color=DEFAULT_SKIN_COLOR):
    """Weighted combination of fields sharing the same template and scalp.

    Plain mode sums w_j * field_j elementwise, clamps negative distances to
    zero and re-establishes zero-coupling. Mask-aware mode renormalizes the
    weights per (i, n) entry over the fields that carry hair there, so
    disjoint hairstyles union instead of diluting each other.
    """
    if not fields:
        raise FieldError("fuse needs at least one field")
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(weights) != len(fields):
        raise FieldError("weight count does not match field count")
    if np.all(weights == 0):
        raise FieldError("all fuse weights are zero")
    base = fields[0]
    for f in fields[1:]:
        if not base.same_meta(f):
            raise FieldError("fused fields must share shape, template and scalp")

    d = np.stack([np.stack([f.d_min, f.d_max], axis=-1) for f in fields]).astype(np.float64)
    a = np.stack([f.albedo for f in fields]).astype(np.float64)
    if mask_aware:
        support = np.stack([f.support() for f in fields])  # (j, n_s, n_r)
        w = weights[:, None, None] * support
        tot = w.sum(axis=0)
        safe = np.where(tot != 0, tot, 1.0)
        w = w / safe
        d_out = np.einsum("jsr,jsrk->srk", w, d)
        a_out = np.einsum("jsr,jsrkc->srkc", w, a)
        # entries with no support anywhere keep plain-normalized albedo
        none = tot == 0
        if none.any():
            wn = weights / weights.sum()
            a_out[none] = np.einsum("j,jxkc->xkc", wn, a[:, none])
    else:
        d_out = np.einsum("j,jsrk->srk", weights, d)
        a_out = np.einsum("j,jsrkc->srkc", weights, a)
    return _from_vectors(d_out, a_out, base.n_s, base.n_r,
                         base.template_hash, base.scalp_hash, skin_color)


def flip(field, spec):
    """Mirror a hairstyle by permuting scalp entries with their symmetry
    partners; valid because paired local frames have mirrored handedness."""
    if spec.n_s != field.n_s:
        raise FieldError("scalp spec size does not match field")
    if field.scalp_hash != spec.content_hash():
        raise FieldError("field was captured with a different scalp spec")
    p = spec.pair_of
    return RayDistanceField(field.d_min[p], field.d_max[p], field.albedo[p],
                            field.template_hash, field.scalp_hash)


def scale_thickness(field, beta_s):
    """Multiply all distances by beta_s > 0; albedo and support unchanged."""
    if not beta_s > 0:
        raise FieldError("beta_s must be positive")
    # multiply in float64 and round once so power-of-two factors stay exact
    d_min = (field.d_min.astype(np.float64) * beta_s).astype(np.float32)
    d_max = (field.d_max.astype(np.float64) * beta_s).astype(np.float32)
    return RayDistanceField(d_min, d_max, field.albedo,
                            field.template_hash, field.scalp_hash)


def apply_exclusion(field, emap, skin_color=DEFAULT_SKIN_COLOR):
    """Zero out flagged outlier entries.

    A flag on either slot removes the whole (i, n) entry: keeping one slot of
    a pair would break the zero-coupling invariant. Albedo of removed entries
    resets to the mean skin color; untouched entries are bit-identical.
    """
    if emap.ex_min.shape != field.d_min.shape:
        raise FieldError("exclusion map shape does not match field")
    kill = (emap.ex_min == 1) | (emap.ex_max == 1)
    d_min = field.d_min.copy()
    d_max = field.d_max.copy()
    albedo = field.albedo.copy()
    d_min[kill] = 0.0
    d_max[kill] = 0.0
    albedo[kill] = np.asarray(skin_color, dtype=np.float32)
    return RayDistanceField(d_min, d_max, albedo, field.template_hash, field.scalp_hash)


def perturb(field, count, magnitude, rng_seed=0, skin_color=DEFAULT_SKIN_COLOR):
    """Add uniform noise at `count` random (i, n, slot) positions and return
    the perturbed field plus the ground-truth exclusion map flagging exactly
    those positions.

    The noisy value is clamped at zero; a perturbed entry whose slots end up
    out of order is re-sorted, and one driven to zero collapses to a case-1
    entry so the field invariants keep holding.
    """
    n_s, n_r = field.n_s, field.n_r
    total = n_s * n_r * 2
    if count < 0 or count > total:
        raise FieldError(f"count must be in [0, {total}]")
    rng = np.random.default_rng(rng_seed)
    d = np.stack([field.d_min, field.d_max], axis=-1).astype(np.float64).reshape(-1)
    ex = np.zeros(total, dtype=np.uint8)
    if count > 0:
        pos = rng.choice(total, size=count, replace=False)
        noise = rng.uniform(-magnitude, magnitude, size=count)
        d[pos] = np.maximum(0.0, d[pos] + noise)
        ex[pos] = 1
    out = _from_vectors(d, field.albedo, n_s, n_r,
                        field.template_hash, field.scalp_hash, skin_color)
    ex = ex.reshape(n_s, n_r, 2)
    return out, ExclusionMap(ex[..., 0], ex[..., 1])


def binarize_exclusion(raw):
    """Threshold raw scores: flag iff sigmoid(score) > 0.5, i.e. score > 0."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3 or raw.shape[2] != 2:
        raise FieldError("raw scores must be (n_s, n_r, 2)")
    if not np.isfinite(raw).all():
        raise FieldError("raw scores must be finite")
    flags = (raw > 0).astype(np.uint8)
    return ExclusionMap(flags[..., 0], flags[..., 1])


def save_field(path, field):
    """SRMH file: 16-byte header, two 32-byte hashes, little-endian float32
    arrays d_min, d_max, albedo(min), albedo(max), row-major."""
    header = struct.pack("<4sHHII", SRMH_MAGIC, SRMH_VERSION, 0, field.n_s, field.n_r)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(field.template_hash.ljust(32, b"\0")[:32])
        fh.write(field.scalp_hash.ljust(32, b"\0")[:32])
        fh.write(field.d_min.astype("<f4").tobytes())
        fh.write(field.d_max.astype("<f4").tobytes())
        fh.write(np.ascontiguousarray(field.albedo[:, :, 0, :]).astype("<f4").tobytes())
        fh.write(np.ascontiguousarray(field.albedo[:, :, 1, :]).astype("<f4").tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 80 or data[:4] != SRMH_MAGIC:
        raise FieldError(f"{path}: not an SRMH field file")
    _, version, _, n_s, n_r = struct.unpack("<4sHHII", data[:16])
    if version != SRMH_VERSION:
        raise FieldError(f"{path}: unsupported SRMH version {version}")
    template_hash = data[16:48]
    scalp_hash = data[48:80]
    n = n_s * n_r
    need = 80 + 4 * (2 * n + 6 * n)
    if len(data) < need:
        raise FieldError(f"{path}: truncated SRMH file ({len(data)} of {need} bytes)")
    off = 80
    d_min = np.frombuffer(data[off:off + 4 * n], dtype="<f4").reshape(n_s, n_r); off += 4 * n
    d_max = np.frombuffer(data[off:off + 4 * n], dtype="<f4").reshape(n_s, n_r); off += 4 * n
    a_min = np.frombuffer(data[off:off + 12 * n], dtype="<f4").reshape(n_s, n_r, 3); off += 12 * n
    a_max = np.frombuffer(data[off:off + 12 * n], dtype="<f4").reshape(n_s, n_r, 3)
    albedo = np.stack([a_min, a_max], axis=2)
    return RayDistanceField(d_min, d_max, albedo, template_hash, scalp_hash)
