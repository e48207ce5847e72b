"""Scalp vertex set with symmetry pairing, per-vertex local frames, and the
hemisphere ray template placed at every scalp vertex.

Left-side scalp vertices get right-handed frames and right-side vertices get
left-handed ones; placing the template through a left-handed frame mirrors it,
so paired rays are exact sagittal reflections of each other.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .mesh import vertex_normals

__all__ = [
    "ScalpSpec",
    "RayTemplate",
    "LocalFrame",
    "RaySet",
    "make_template",
    "build_frames",
    "place_rays",
    "load_scalp_spec",
    "write_scalp_spec",
    "load_template",
    "write_template",
]

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
MIN_SEPARATION_DEG = 1.0


class ScalpSpec:
    """Ordered scalp vertex indices with a fixed-point-free left/right pairing.

    vertex_ids : (n_s,) int64 indices into a head mesh
    pair_of    : (n_s,) int64 involution over positions 0..n_s-1
    side       : (n_s,) array of "left" / "right" labels
    """

    def __init__(self, vertex_ids, pair_of, side, topology="unspecified"):
        ids = np.asarray(vertex_ids, dtype=np.int64).reshape(-1)
        pair = np.asarray(pair_of, dtype=np.int64).reshape(-1)
        side = np.asarray(side, dtype=object).reshape(-1)
        n = len(ids)
        if n == 0 or n % 2 != 0:
            raise ValueError(f"scalp spec needs an even, positive vertex count, got {n}")
        if len(pair) != n or len(side) != n:
            raise ValueError("pair_of and side must match vertex count")
        if pair.min() < 0 or pair.max() >= n:
            raise ValueError("pair_of entries out of range")
        idx = np.arange(n)
        if (pair == idx).any():
            bad = idx[pair == idx][:5].tolist()
            raise ValueError(f"pair_of has fixed points at positions {bad}")
        if (pair[pair] != idx).any():
            raise ValueError("pair_of is not an involution")
        if not set(side) <= {"left", "right"}:
            raise ValueError("side labels must be 'left' or 'right'")
        n_left = int(np.sum(side == "left"))
        if n_left != n // 2:
            raise ValueError(f"expected {n // 2} left entries, got {n_left}")
        if (side[pair] == side).any():
            raise ValueError("pair_of must map left entries to right entries")
        ids.setflags(write=False)
        pair.setflags(write=False)
        self.vertex_ids = ids
        self.pair_of = pair
        self.side = side
        self.topology = topology

    @property
    def n_s(self):
        return len(self.vertex_ids)

    def content_hash(self):
        h = hashlib.sha256()
        h.update(self.vertex_ids.tobytes())
        h.update(self.pair_of.tobytes())
        h.update("".join(self.side).encode())
        return h.digest()

    def delta(self):
        """+1 for left entries, -1 for right ones."""
        return np.where(self.side == "left", 1.0, -1.0)


class RayTemplate:
    """Fixed set of unit directions; the first three are the canonical triad."""

    def __init__(self, directions):
        d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        if len(d) < 3:
            raise ValueError("a ray template needs at least 3 directions")
        if np.abs(np.linalg.norm(d, axis=1) - 1.0).max() > 1e-9:
            raise ValueError("template directions must be unit length within 1e-9")
        if not (np.array_equal(d[0], [1.0, 0.0, 0.0])
                and np.array_equal(d[1], [0.0, 1.0, 0.0])
                and np.array_equal(d[2], [0.0, 0.0, 1.0])):
            raise ValueError("template entries 1-3 must be the canonical triad")
        if d[:, 2].min() < -1e-12:
            raise ValueError("template directions must lie in the upper hemisphere")
        _check_separation(d)
        d.setflags(write=False)
        self.directions = d

    @property
    def n_r(self):
        return len(self.directions)

    def content_hash(self):
        return hashlib.sha256(self.directions.tobytes()).digest()


@dataclass(frozen=True)
class LocalFrame:
    """Orthonormal basis at a scalp vertex; handedness = sign of det[x y z]."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @property
    def handedness(self):
        return 1.0 if np.linalg.det(np.column_stack([self.x, self.y, self.z])) > 0 else -1.0


class RaySet:
    """World-space rays (n_s x n_r) tagged with template/scalp hashes."""

    def __init__(self, origins, directions, template_hash, scalp_hash):
        self.origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        self.directions = np.asarray(directions, dtype=np.float64)
        self.template_hash = template_hash
        self.scalp_hash = scalp_hash
        self.n_s = self.directions.shape[0]
        self.n_r = self.directions.shape[1]


def _check_separation(directions):
    cosmax = math.cos(math.radians(MIN_SEPARATION_DEG))
    dots = directions @ directions.T
    np.fill_diagonal(dots, -1.0)
    if dots.max() > cosmax + 1e-12:
        raise ValueError("template directions closer than 1 degree")


def make_template(n_rays, max_polar_angle=90.0):
    """Deterministic hemisphere template.

    Entries 1-3 are the canonical triad; the rest are a Fibonacci-lattice
    sample of the spherical cap z >= cos(max_polar_angle). Candidates closer
    than 1 degree to an already accepted direction are skipped, continuing
    along the lattice index sequence.
    """
    if n_rays < 3:
        raise ValueError("n_rays must be >= 3")
    if not 0.0 < max_polar_angle <= 90.0:
        raise ValueError("max_polar_angle must be in (0, 90] degrees")
    triad = np.eye(3)
    if n_rays == 3:
        return RayTemplate(triad)

    z_lo = math.cos(math.radians(max_polar_angle))
    accepted = [triad[0], triad[1], triad[2]]
    cosmax = math.cos(math.radians(MIN_SEPARATION_DEG))
    need = n_rays - 3
    m = need  # nominal lattice size; indices continue past it when skipping
    j = 0
    while need > 0:
        z = 1.0 - (j + 0.5) / m * (1.0 - z_lo)
        j += 1
        if z < z_lo - 1e-12:
            # lattice exhausted below the cap: densify and restart the tail
            m *= 2
            j = 0
            continue
        r = math.sqrt(max(0.0, 1.0 - z * z))
        phi = GOLDEN_ANGLE * j
        cand = np.array([r * math.cos(phi), r * math.sin(phi), z])
        cand /= np.linalg.norm(cand)
        if max(float(cand @ a) for a in accepted) > cosmax:
            continue
        accepted.append(cand)
        need -= 1
    return RayTemplate(np.array(accepted))


def build_frames(head, scalp):
    """Per scalp vertex: z = vertex normal, x' = normalize(t x z) with
    t = v_i - v_pair, y = normalize(z x x'), x = delta * x'.
    """
    ids = scalp.vertex_ids
    if ids.max() >= head.n_vertices:
        raise ValueError("scalp vertex id out of range for head mesh")
    normals = head.normals if head.normals is not None else vertex_normals(head)
    z = np.asarray(normals)[ids]
    pos = head.vertices[ids]
    t = pos - pos[scalp.pair_of]
    xp = np.cross(t, z)
    lens = np.linalg.norm(xp, axis=1)
    bad = lens < 1e-8
    if bad.any():
        idx = np.flatnonzero(bad)[:10].tolist()
        raise ValueError(
            f"degenerate scalp frames (pair direction parallel to normal or "
            f"coincident pair) at positions {idx}"
        )
    xp = xp / lens[:, None]
    y = np.cross(z, xp)
    y /= np.linalg.norm(y, axis=1)[:, None]
    x = scalp.delta()[:, None] * xp
    return [LocalFrame(x[i], y[i], z[i]) for i in range(len(ids))]


def place_rays(frames, scalp_positions, template, template_hash=None, scalp_hash=None):
    """World direction of ray (i, n) = r.x * x_i + r.y * y_i + r.z * z_i."""
    pos = np.asarray(scalp_positions, dtype=np.float64).reshape(-1, 3)
    if len(frames) != len(pos):
        raise ValueError("frame count does not match scalp position count")
    basis = np.stack(
        [np.stack([f.x for f in frames]),
         np.stack([f.y for f in frames]),
         np.stack([f.z for f in frames])],
        axis=1,
    )  # (n_s, 3 axes, 3)
    dirs = np.einsum("na,iak->ink", template.directions, basis)
    return RaySet(pos, dirs,
                  template_hash if template_hash is not None else template.content_hash(),
                  scalp_hash)


SCALP_SPEC_VERSION = 1
TEMPLATE_VERSION = 1


def write_scalp_spec(path, spec):
    entries = [
        {
            "vertex_id": int(spec.vertex_ids[i]),
            "pair_id": int(spec.vertex_ids[spec.pair_of[i]]),
            "side": str(spec.side[i]),
        }
        for i in range(spec.n_s)
    ]
    doc = {
        "version": SCALP_SPEC_VERSION,
        "topology": spec.topology,
        "n_s": spec.n_s,
        "entries": entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_scalp_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != SCALP_SPEC_VERSION:
        raise ValueError(f"{path}: unsupported scalp spec version {doc.get('version')}")
    entries = doc["entries"]
    if len(entries) != doc.get("n_s"):
        raise ValueError(f"{path}: n_s does not match entry count")
    ids = np.array([e["vertex_id"] for e in entries], dtype=np.int64)
    side = np.array([e["side"] for e in entries], dtype=object)
    pos_of = {int(v): i for i, v in enumerate(ids)}
    if len(pos_of) != len(ids):
        raise ValueError(f"{path}: duplicate vertex ids")
    try:
        pair = np.array([pos_of[int(e["pair_id"])] for e in entries], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"{path}: pair_id {exc} is not a listed vertex") from exc
    return ScalpSpec(ids, pair, side, topology=doc.get("topology", "unspecified"))


def write_template(path, template):
    doc = {
        "version": TEMPLATE_VERSION,
        "n_r": template.n_r,
        "directions": [[float(c) for c in d] for d in template.directions],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_template(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != TEMPLATE_VERSION:
        raise ValueError(f"{path}: unsupported template version {doc.get('version')}")
    dirs = np.asarray(doc["directions"], dtype=np.float64)
    if len(dirs) != doc.get("n_r"):
        raise ValueError(f"{path}: n_r does not match direction count")
    return RayTemplate(dirs)
