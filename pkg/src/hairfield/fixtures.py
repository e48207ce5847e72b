"""Deterministic synthetic fixtures: spherical heads, shell-cap hair meshes,
mirrored scalp specs, and closed-form distance oracles.

The icosphere construction is bitwise mirror-symmetric across each
coordinate plane, so scalp pairing and symmetry properties hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .mesh import TriMesh
from .scalp import ScalpSpec

__all__ = [
    "FixtureRecipe",
    "FixtureBundle",
    "icosphere",
    "shell_cap_mesh",
    "make_scalp_spec",
    "ShellOracle",
    "generate",
]

KINDS = ("sphere-head", "shell-cap-hair", "asymmetric-cap", "two-cap", "noisy-shell")


def icosphere(subdivisions=3, radius=1.0):
    """Subdivided icosahedron scaled to the given radius.

    Vertex count is 10 * 4^n + 2, face count 20 * 4^n.
    """
    if subdivisions < 0:
        raise ValueError("subdivisions must be >= 0")
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts[0])
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            idx = cache.get(key)
            if idx is None:
                a = verts[key[0]]
                b = verts[key[1]]
                m = (a[0] + b[0], a[1] + b[1], a[2] + b[2])
                norm = math.sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2])
                idx = len(verts)
                verts.append((m[0] / norm, m[1] / norm, m[2] / norm))
                cache[key] = idx
            return idx

        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.asarray(verts, dtype=np.float64) * radius
    return TriMesh(v, np.asarray(faces, dtype=np.int64))


def _boundary_edges(faces):
    """Directed edges of the face set that have no opposite partner."""
    edges = {}
    for a, b, c in faces:
        for e in ((a, b), (b, c), (c, a)):
            edges[e] = edges.get(e, 0) + 1
    return [e for e in edges if (e[1], e[0]) not in edges]


def shell_cap_mesh(subdivisions, r_in, r_out, extent_deg=180.0, axis=(0.0, 0.0, 1.0),
                   colored=False, noise=0.0, seed=0):
    """Closed shell between two concentric spherical caps.

    Faces of a unit icosphere whose vertices all lie within extent_deg of the
    axis form the cap; the outer copy is scaled by r_out, the inner by r_in
    with reversed winding, and the two rims are stitched with a quad strip.
    extent_deg = 180 yields two complete spheres.
    """
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < inner radius < outer radius")
    base = icosphere(subdivisions)
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    cos_ext = math.cos(math.radians(extent_deg))
    inside = (base.vertices @ axis) >= cos_ext - 1e-12
    keep = inside[base.faces].all(axis=1)
    cap_faces = base.faces[keep]
    if len(cap_faces) == 0:
        raise ValueError("cap extent keeps no faces at this subdivision")
    used = np.unique(cap_faces)
    remap = -np.ones(base.n_vertices, dtype=np.int64)
    remap[used] = np.arange(len(used))
    f = remap[cap_faces]
    unit = base.vertices[used]

    n = len(used)
    verts = np.vstack([unit * r_out, unit * r_in])
    faces = [f, f[:, ::-1] + n]
    for a, b in sorted(_boundary_edges(f.tolist())):
        # wound against the cap's (a, b) edge so the strip faces outward
        faces.append(np.array([[b, a, a + n], [b, a + n, b + n]], dtype=np.int64))
    faces = np.vstack(faces)

    if noise > 0.0:
        rng = np.random.default_rng(seed)
        radial = verts / np.linalg.norm(verts, axis=1, keepdims=True)
        verts = verts + radial * rng.uniform(-noise, noise, size=(len(verts), 1))

    colors = None
    if colored:
        # symmetric in x so mirrored fixtures keep mirrored albedo
        r = np.linalg.norm(verts, axis=1)
        colors = np.column_stack([
            0.25 + 0.5 * np.abs(verts[:, 0]) / r,
            0.25 + 0.5 * (verts[:, 1] / r + 1.0) / 2.0,
            0.25 + 0.5 * (verts[:, 2] / r + 1.0) / 2.0,
        ])
        colors = np.clip(colors, 0.0, 1.0)
    return TriMesh(verts, faces, colors=colors)


def make_scalp_spec(head, cap_deg=30.0, max_pairs=None, min_x=1e-9):
    """Mirrored scalp spec from the upper cap of a symmetric head mesh.

    Picks vertices within cap_deg of +z whose mirror image (-x, y, z) is also
    a mesh vertex; entries are ordered left block then right block, left
    meaning x > 0. Midline vertices are skipped (the pairing must be
    fixed-point-free).
    """
    v = head.vertices
    r = np.linalg.norm(v, axis=1)
    cos_cap = math.cos(math.radians(cap_deg))
    lookup = {(float(p[0]), float(p[1]), float(p[2])): i for i, p in enumerate(v)}
    lefts = []
    rights = []
    for i in np.flatnonzero((v[:, 2] / r >= cos_cap) & (v[:, 0] > min_x)):
        j = lookup.get((float(-v[i, 0]), float(v[i, 1]), float(v[i, 2])))
        if j is not None:
            lefts.append(int(i))
            rights.append(int(j))
    if not lefts:
        raise ValueError("no mirrored vertex pairs inside the cap")
    order = np.argsort(lefts)
    lefts = [lefts[k] for k in order]
    rights = [rights[k] for k in order]
    if max_pairs is not None:
        if max_pairs > len(lefts):
            raise ValueError(f"only {len(lefts)} mirrored pairs available, need {max_pairs}")
        step = len(lefts) / max_pairs
        pick = [int(k * step) for k in range(max_pairs)]
        lefts = [lefts[k] for k in pick]
        rights = [rights[k] for k in pick]
    n = len(lefts)
    ids = np.array(lefts + rights, dtype=np.int64)
    pair = np.concatenate([np.arange(n) + n, np.arange(n)])
    side = np.array(["left"] * n + ["right"] * n, dtype=object)
    return ScalpSpec(ids, pair, side, topology="icosphere")


class ShellOracle:
    """Closed-form min/max ray distances against one or more spherical-cap
    shells; candidates are positive quadratic roots whose hit points lie
    within the cap extent."""

    def __init__(self, shells):
        # shells: list of (r_in, r_out, extent_deg, axis)
        self.shells = [
            (float(ri), float(ro), math.cos(math.radians(e)),
             np.asarray(ax, dtype=np.float64) / np.linalg.norm(ax))
            for ri, ro, e, ax in shells
        ]

    def __call__(self, origins, directions):
        o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        m = len(o)
        d_min = np.full(m, np.inf)
        d_max = np.zeros(m)
        hit = np.zeros(m, dtype=bool)
        od = np.einsum("ij,ij->i", o, d)
        oo = np.einsum("ij,ij->i", o, o)
        for r_in, r_out, cos_ext, axis in self.shells:
            for radius in (r_in, r_out):
                disc = od ** 2 - (oo - radius ** 2)
                ok = disc >= 0
                root = np.sqrt(np.where(ok, disc, 0.0))
                for sign in (-1.0, 1.0):
                    t = -od + sign * root
                    q = o + t[:, None] * d
                    valid = ok & (t >= 0) & ((q @ axis) / radius >= cos_ext)
                    hit |= valid
                    d_min = np.where(valid & (t < d_min), t, d_min)
                    d_max = np.where(valid & (t > d_max), t, d_max)
        d_min = np.where(hit, d_min, 0.0)
        d_max = np.where(hit, d_max, 0.0)
        return d_min, d_max


@dataclass
class FixtureRecipe:
    kind: str = "shell-cap-hair"
    head_radius: float = 1.0
    head_subdivisions: int = 4
    hair_subdivisions: int = 4
    r_in: float = 1.2
    r_out: float = 1.5
    extent_deg: float = 60.0
    scalp_cap_deg: float = 25.0
    scalp_pairs: int | None = None
    tilt_deg: float = 30.0
    noise: float = 0.02
    colored: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fixture kind {self.kind!r}; choose from {KINDS}")
        if self.head_radius <= 0 or self.r_in <= 0 or self.r_out <= 0:
            raise ValueError("radii must be positive")
        if self.r_in <= self.head_radius:
            raise ValueError("hair inner radius must exceed the head radius")
        if self.r_out <= self.r_in:
            raise ValueError("hair outer radius must exceed the inner radius")


@dataclass
class FixtureBundle:
    head: TriMesh
    scalp: ScalpSpec
    hair: TriMesh
    oracle: ShellOracle | None = None


def _tilted(deg):
    rad = math.radians(deg)
    return (math.sin(rad), 0.0, math.cos(rad))


def generate(recipe):
    """Deterministic head, scalp spec, hair mesh, and (where closed-form)
    distance oracle for a recipe."""
    head = icosphere(recipe.head_subdivisions, recipe.head_radius)
    scalp = make_scalp_spec(head, recipe.scalp_cap_deg, max_pairs=recipe.scalp_pairs)
    kw = dict(subdivisions=recipe.hair_subdivisions, r_in=recipe.r_in,
              r_out=recipe.r_out, colored=recipe.colored)
    shell = (recipe.r_in, recipe.r_out)
    if recipe.kind == "sphere-head":
        hair = shell_cap_mesh(extent_deg=180.0, **kw)
        oracle = ShellOracle([(*shell, 180.0, (0, 0, 1))])
    elif recipe.kind == "shell-cap-hair":
        hair = shell_cap_mesh(extent_deg=recipe.extent_deg, **kw)
        oracle = ShellOracle([(*shell, recipe.extent_deg, (0, 0, 1))])
    elif recipe.kind == "asymmetric-cap":
        axis = _tilted(recipe.tilt_deg)
        hair = shell_cap_mesh(extent_deg=recipe.extent_deg, axis=axis, **kw)
        oracle = ShellOracle([(*shell, recipe.extent_deg, axis)])
    elif recipe.kind == "two-cap":
        a1 = _tilted(recipe.tilt_deg)
        a2 = _tilted(-recipe.tilt_deg)
        extent = min(recipe.extent_deg, recipe.tilt_deg * 0.9)
        m1 = shell_cap_mesh(extent_deg=extent, axis=a1, **kw)
        m2 = shell_cap_mesh(extent_deg=extent, axis=a2, **kw)
        verts = np.vstack([m1.vertices, m2.vertices])
        faces = np.vstack([m1.faces, m2.faces + m1.n_vertices])
        colors = None
        if m1.colors is not None:
            colors = np.vstack([m1.colors, m2.colors])
        hair = TriMesh(verts, faces, colors=colors)
        oracle = ShellOracle([(*shell, extent, a1), (*shell, extent, a2)])
    else:  # noisy-shell
        hair = shell_cap_mesh(extent_deg=recipe.extent_deg, noise=recipe.noise,
                              seed=recipe.seed, **kw)
        oracle = None
    return FixtureBundle(head, scalp, hair, oracle)
