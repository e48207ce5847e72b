"""PCA morphable hair model: mean field plus scaled principal directions for
ray distances and albedo, with synthesis and projection.

Basis columns are unit principal directions scaled by the per-mode standard
deviation sigma_k / sqrt(n_samples - 1), so coefficients are measured in
standard deviations. Distance and albedo spaces are independent.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import RayDistanceField, _from_vectors, scale_thickness

__all__ = [
    "MorphableHairModel",
    "HairCoefficients",
    "ModelError",
    "build_model",
    "synthesize",
    "project",
    "save_model",
    "load_model",
]

SRMM_MAGIC = b"SRMM"
SRMM_VERSION = 1


class ModelError(ValueError):
    pass


class MorphableHairModel:
    """mean_d: (N,) with N = n_s * n_r * 2; shape_basis: (N, K) scaled;
    mean_a: (3N,); albedo_basis: (3N, K_a) scaled; plus singular values."""

    def __init__(self, n_s, n_r, mean_d, sv_shape, shape_basis,
                 mean_a, sv_alb, albedo_basis, template_hash, scalp_hash):
        n = n_s * n_r * 2
        self.n_s = int(n_s)
        self.n_r = int(n_r)
        self.mean_d = np.ascontiguousarray(mean_d, dtype=np.float64).reshape(n)
        self.sv_shape = np.ascontiguousarray(sv_shape, dtype=np.float64).reshape(-1)
        self.shape_basis = np.ascontiguousarray(shape_basis, dtype=np.float64).reshape(n, -1)
        self.mean_a = np.ascontiguousarray(mean_a, dtype=np.float64).reshape(3 * n)
        self.sv_alb = np.ascontiguousarray(sv_alb, dtype=np.float64).reshape(-1)
        self.albedo_basis = np.ascontiguousarray(albedo_basis, dtype=np.float64).reshape(3 * n, -1)
        self.template_hash = bytes(template_hash)
        self.scalp_hash = bytes(scalp_hash)
        if self.shape_basis.shape[1] != len(self.sv_shape):
            raise ModelError("shape basis / singular value count mismatch")
        if self.albedo_basis.shape[1] != len(self.sv_alb):
            raise ModelError("albedo basis / singular value count mismatch")
        if (self.mean_d < 0).any():
            raise ModelError("mean distances must be non-negative")

    @property
    def n(self):
        return self.n_s * self.n_r * 2

    @property
    def k(self):
        return self.shape_basis.shape[1]

    @property
    def k_a(self):
        return self.albedo_basis.shape[1]

    def shape_scales(self):
        """Per-mode standard deviations (the basis column norms)."""
        return np.linalg.norm(self.shape_basis, axis=0)


@dataclass
class HairCoefficients:
    """Coefficients of one hairstyle: shape and albedo loadings in standard
    deviation units, thickness scale, and order-2 SH lighting (9 RGB rows)."""

    beta_shape: np.ndarray
    beta_alb: np.ndarray
    beta_s: float = 1.0
    beta_sh: np.ndarray = dc_field(default_factory=lambda: np.zeros((9, 3)))

    def __post_init__(self):
        self.beta_shape = np.asarray(self.beta_shape, dtype=np.float64).reshape(-1)
        self.beta_alb = np.asarray(self.beta_alb, dtype=np.float64).reshape(-1)
        self.beta_sh = np.asarray(self.beta_sh, dtype=np.float64).reshape(9, 3)
        if not self.beta_s > 0:
            raise ModelError("beta_s must be positive")
        if not (np.isfinite(self.beta_shape).all() and np.isfinite(self.beta_alb).all()
                and np.isfinite(self.beta_sh).all()):
            raise ModelError("coefficients must be finite")


def _pca(samples, modes, what):
    """Mean, singular values and scaled basis of a sample matrix (rows are
    samples). Columns are sorted by descending singular value, sign-fixed so
    the largest-magnitude component is positive."""
    x = np.asarray(samples, dtype=np.float64)
    n_samples = x.shape[0]
    if modes < 0 or modes > n_samples - 1:
        raise ModelError(f"{what}: modes must be in [0, n_samples - 1]")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    s = s[:modes]
    u = vt[:modes].T  # (dim, modes), orthonormal columns
    if modes > 0:
        tol = max(1.0, float(s[0]) if len(s) else 0.0) * 1e-12
        if (s <= tol).any():
            raise ModelError(f"{what}: rank zero along requested modes")
        peak = np.argmax(np.abs(u), axis=0)
        signs = np.sign(u[peak, np.arange(modes)])
        u = u * signs
    scale = s / np.sqrt(n_samples - 1)
    return mean, s, u * scale


def build_model(fields, modes, albedo_modes):
    """Fit the morphable model to captured fields (>= 2, identical meta)."""
    if len(fields) < 2:
        raise ModelError("building a model needs at least 2 fields")
    base = fields[0]
    for f in fields[1:]:
        if not base.same_meta(f):
            raise ModelError("all training fields must share shape, template and scalp")
    d_all = np.stack([f.distance_vector() for f in fields])
    a_all = np.stack([f.albedo_vector() for f in fields])
    mean_d, sv_d, basis_d = _pca(d_all, modes, "shape")
    mean_a, sv_a, basis_a = _pca(a_all, albedo_modes, "albedo")
    return MorphableHairModel(base.n_s, base.n_r, mean_d, sv_d, basis_d,
                              mean_a, sv_a, basis_a,
                              base.template_hash, base.scalp_hash)


def synthesize(model, coeffs):
    """Field and albedo vector from coefficients.

    Distances: (mean + basis . beta_shape) * beta_s, clamped at zero and
    zero-coupled. The thickness factor is applied through scale_thickness so
    it factors out exactly.
    """
    if len(coeffs.beta_shape) != model.k:
        raise ModelError(f"expected {model.k} shape coefficients, got {len(coeffs.beta_shape)}")
    if len(coeffs.beta_alb) != model.k_a:
        raise ModelError(f"expected {model.k_a} albedo coefficients, got {len(coeffs.beta_alb)}")
    d = model.mean_d + model.shape_basis @ coeffs.beta_shape
    a = np.clip(model.mean_a + model.albedo_basis @ coeffs.beta_alb, 0.0, 1.0)
    out = _from_vectors(d, a, model.n_s, model.n_r,
                        model.template_hash, model.scalp_hash)
    if coeffs.beta_s != 1.0:
        out = scale_thickness(out, coeffs.beta_s)
    return out, a


def project(model, field):
    """Least-squares shape coefficients of a field (thickness assumed 1)."""
    if (field.n_s, field.n_r) != (model.n_s, model.n_r):
        raise ModelError("field shape does not match model")
    if field.template_hash != model.template_hash or field.scalp_hash != model.scalp_hash:
        raise ModelError("field and model come from different template/scalp")
    scales = model.shape_scales()
    unit = model.shape_basis / scales
    return (field.distance_vector() - model.mean_d) @ unit / scales


def save_model(path, model):
    """SRMM file: header, hashes, little-endian float64 arrays (mean_d,
    shape singular values, shape basis column-major, mean_a, albedo singular
    values, albedo basis column-major)."""
    header = struct.pack("<4sHHIIII", SRMM_MAGIC, SRMM_VERSION, 0,
                         model.n_s, model.n_r, model.k, model.k_a)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(model.template_hash.ljust(32, b"\0")[:32])
        fh.write(model.scalp_hash.ljust(32, b"\0")[:32])
        fh.write(model.mean_d.astype("<f8").tobytes())
        fh.write(model.sv_shape.astype("<f8").tobytes())
        fh.write(np.asfortranarray(model.shape_basis).astype("<f8").tobytes(order="F"))
        fh.write(model.mean_a.astype("<f8").tobytes())
        fh.write(model.sv_alb.astype("<f8").tobytes())
        fh.write(np.asfortranarray(model.albedo_basis).astype("<f8").tobytes(order="F"))


def load_model(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 88 or data[:4] != SRMM_MAGIC:
        raise ModelError(f"{path}: not an SRMM model file")
    _, version, _, n_s, n_r, k, k_a = struct.unpack("<4sHHIIII", data[:24])
    if version != SRMM_VERSION:
        raise ModelError(f"{path}: unsupported SRMM version {version}")
    template_hash = data[24:56]
    scalp_hash = data[56:88]
    n = n_s * n_r * 2
    sizes = [n, k, n * k, 3 * n, k_a, 3 * n * k_a]
    need = 88 + 8 * sum(sizes)
    if len(data) < need:
        raise ModelError(f"{path}: truncated SRMM file ({len(data)} of {need} bytes)")
    off = 88
    parts = []
    for size in sizes:
        parts.append(np.frombuffer(data[off:off + 8 * size], dtype="<f8"))
        off += 8 * size
    mean_d, sv_d, basis_d, mean_a, sv_a, basis_a = parts
    return MorphableHairModel(
        n_s, n_r, mean_d, sv_d, basis_d.reshape((n, k), order="F"),
        mean_a, sv_a, basis_a.reshape((3 * n, k_a), order="F"),
        template_hash, scalp_hash,
    )
