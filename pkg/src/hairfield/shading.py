"""Order-2 real spherical-harmonics shading of vertex albedo.

Basis ordering is (1, y, z, x, xy, yz, 3z^2 - 1, xz, x^2 - y^2) with the
standard orthonormalization constants:

    c0 = 0.28209479  (1 / (2 sqrt(pi)))
    c1 = 0.48860251  (sqrt(3 / (4 pi)))          for y, z, x
    c2 = 1.09254843  (sqrt(15 / (4 pi)))         for xy, yz, xz
    c3 = 0.31539157  (sqrt(5 / (16 pi)))         for 3z^2 - 1
    c4 = 0.54627422  (sqrt(15 / (16 pi)))        for x^2 - y^2
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["SH_C0", "sh_basis", "sh_basis_batch", "shade"]

SH_C0 = 0.5 * math.sqrt(1.0 / math.pi)
SH_C1 = math.sqrt(3.0 / (4.0 * math.pi))
SH_C2 = math.sqrt(15.0 / (4.0 * math.pi))
SH_C3 = math.sqrt(5.0 / (16.0 * math.pi))
SH_C4 = math.sqrt(15.0 / (16.0 * math.pi))


def sh_basis_batch(normals):
    """(n, 9) basis values for unit normals; rows with zero normals allowed
    (isolated vertices) and evaluate to the constant band only."""
    n = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    lens = np.linalg.norm(n, axis=1)
    ok = lens > 0
    if (np.abs(lens[ok] - 1.0) > 1e-6).any():
        raise ValueError("normals must be unit length within 1e-6")
    x, y, z = n[:, 0], n[:, 1], n[:, 2]
    out = np.empty((len(n), 9))
    out[:, 0] = SH_C0
    out[:, 1] = SH_C1 * y
    out[:, 2] = SH_C1 * z
    out[:, 3] = SH_C1 * x
    out[:, 4] = SH_C2 * x * y
    out[:, 5] = SH_C2 * y * z
    out[:, 6] = SH_C3 * (3.0 * z * z - 1.0)
    out[:, 7] = SH_C2 * x * z
    out[:, 8] = SH_C4 * (x * x - y * y)
    out[~ok, 1:] = 0.0  # isolated vertices: constant band only
    return out


def sh_basis(normal):
    """The 9 order-2 basis values at one unit normal."""
    n = np.asarray(normal, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise ValueError("normal must be unit length within 1e-6")
    return sh_basis_batch(n[None])[0]


def shade(albedo, normals, coeffs, clamp=True):
    """Per-vertex color = albedo (Hadamard) sum_k beta_sh[k] * basis_k(n).

    coeffs is a (9, 3) array of RGB weights per basis function.
    """
    a = np.asarray(albedo, dtype=np.float64).reshape(-1, 3)
    n = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if len(a) != len(n):
        raise ValueError("albedo and normal counts differ")
    beta = np.asarray(coeffs, dtype=np.float64).reshape(9, 3)
    irradiance = sh_basis_batch(n) @ beta  # (n, 3)
    out = a * irradiance
    return np.clip(out, 0.0, 1.0) if clamp else out
