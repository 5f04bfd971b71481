"""Rotation parameterizations and conversions.

Matrices are the in-memory representation (row-major 3x3, right-handed,
columns act on column vectors). Quaternions appear only at file and wire
boundaries, ordered (w, x, y, z), unit norm, w >= 0 canonical sign.

The 6D representation (two stacked 3-vectors, Gram-Schmidt orthonormalized,
third column by cross product) is the network output head's parameterization;
its analytic adjoint is required for end-to-end training.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, StructureError

# Below this norm the Gram-Schmidt input counts as degenerate and is nudged.
_DEGENERATE_NORM = 1e-12
_NUDGE = 1e-8

# Quaternions whose norm deviates more than this are rejected at import time.
QUAT_NORM_TOLERANCE = 1e-2


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """(..., 4) wxyz unit quaternions to (..., 3, 3) rotation matrices."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[..., 0, 1] = 2.0 * (x * y - w * z)
    R[..., 0, 2] = 2.0 * (x * z + w * y)
    R[..., 1, 0] = 2.0 * (x * y + w * z)
    R[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[..., 1, 2] = 2.0 * (y * z - w * x)
    R[..., 2, 0] = 2.0 * (x * z - w * y)
    R[..., 2, 1] = 2.0 * (y * z + w * x)
    R[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """(..., 3, 3) rotation matrices to canonical (..., 4) wxyz quaternions.

    Shepperd's method: branch on the largest of (trace, R00, R11, R22) for
    numerical stability, then normalize and force w >= 0.
    """
    R = np.asarray(R, dtype=np.float64)
    lead = R.shape[:-2]
    m = R.reshape(-1, 3, 3)
    n = m.shape[0]
    q = np.empty((n, 4), dtype=np.float64)

    tr = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2]
    case0 = tr > 0.0
    case1 = (~case0) & (m[:, 0, 0] >= m[:, 1, 1]) & (m[:, 0, 0] >= m[:, 2, 2])
    case2 = (~case0) & (~case1) & (m[:, 1, 1] >= m[:, 2, 2])
    case3 = ~(case0 | case1 | case2)

    if np.any(case0):
        c = m[case0]
        s = np.sqrt(tr[case0] + 1.0) * 2.0
        q[case0, 0] = 0.25 * s
        q[case0, 1] = (c[:, 2, 1] - c[:, 1, 2]) / s
        q[case0, 2] = (c[:, 0, 2] - c[:, 2, 0]) / s
        q[case0, 3] = (c[:, 1, 0] - c[:, 0, 1]) / s
    if np.any(case1):
        c = m[case1]
        s = np.sqrt(1.0 + c[:, 0, 0] - c[:, 1, 1] - c[:, 2, 2]) * 2.0
        q[case1, 0] = (c[:, 2, 1] - c[:, 1, 2]) / s
        q[case1, 1] = 0.25 * s
        q[case1, 2] = (c[:, 0, 1] + c[:, 1, 0]) / s
        q[case1, 3] = (c[:, 0, 2] + c[:, 2, 0]) / s
    if np.any(case2):
        c = m[case2]
        s = np.sqrt(1.0 + c[:, 1, 1] - c[:, 0, 0] - c[:, 2, 2]) * 2.0
        q[case2, 0] = (c[:, 0, 2] - c[:, 2, 0]) / s
        q[case2, 1] = (c[:, 0, 1] + c[:, 1, 0]) / s
        q[case2, 2] = 0.25 * s
        q[case2, 3] = (c[:, 1, 2] + c[:, 2, 1]) / s
    if np.any(case3):
        c = m[case3]
        s = np.sqrt(1.0 + c[:, 2, 2] - c[:, 0, 0] - c[:, 1, 1]) * 2.0
        q[case3, 0] = (c[:, 1, 0] - c[:, 0, 1]) / s
        q[case3, 1] = (c[:, 0, 2] + c[:, 2, 0]) / s
        q[case3, 2] = (c[:, 1, 2] + c[:, 2, 1]) / s
        q[case3, 3] = 0.25 * s

    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    flip = q[:, 0] < 0.0
    q[flip] = -q[flip]
    return q.reshape(lead + (4,))


def normalize_quat(q: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Renormalize quaternions, skipping rows already unit within ``tol``.

    The skip makes renormalization bitwise idempotent, so a file round trip
    after one import is lossless.
    """
    q = np.asarray(q, dtype=np.float64)
    norms = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norms < 1e-6):
        raise StructureError("cannot normalize a near-zero quaternion")
    needs = np.abs(norms - 1.0) > tol
    return np.where(needs, q / norms, q)


def axis_angle_to_matrix(axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues formula for (..., 3) unit axes and (...) angles in radians."""
    axes = np.asarray(axes, dtype=np.float64)
    angles = np.asarray(angles, dtype=np.float64)
    x, y, z = axes[..., 0], axes[..., 1], axes[..., 2]
    c = np.cos(angles)
    s = np.sin(angles)
    t = 1.0 - c
    R = np.empty(axes.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = t * x * x + c
    R[..., 0, 1] = t * x * y - s * z
    R[..., 0, 2] = t * x * z + s * y
    R[..., 1, 0] = t * x * y + s * z
    R[..., 1, 1] = t * y * y + c
    R[..., 1, 2] = t * y * z - s * x
    R[..., 2, 0] = t * x * z - s * y
    R[..., 2, 1] = t * y * z + s * x
    R[..., 2, 2] = t * z * z + c
    return R


def _gram_schmidt(a: np.ndarray, b: np.ndarray):
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    x = a / na
    xb = np.sum(x * b, axis=-1, keepdims=True)
    u = b - xb * x
    nu = np.linalg.norm(u, axis=-1, keepdims=True)
    y = u / nu
    z = np.cross(x, y)
    return x, y, z, na, nu


def orthonormalize_6d_batch(v: np.ndarray):
    """Orthonormalize (..., 6) vectors into (..., 3, 3) rotation matrices.

    Returns (R, cache, flagged). Degenerate rows (near-zero first vector or
    near-parallel pair) are nudged by 1e-8 along fixed axes and recomputed;
    ``flagged`` marks them. The cache feeds
    :func:`orthonormalize_6d_backward`.
    """
    v = np.asarray(v, dtype=np.float64)
    a = v[..., :3].copy()
    b = v[..., 3:].copy()

    na0 = np.linalg.norm(a, axis=-1)
    u0 = b - np.sum(a * b, axis=-1, keepdims=True) * a / np.maximum(na0, _DEGENERATE_NORM)[..., None] ** 2
    nu0 = np.linalg.norm(u0, axis=-1)
    flagged = (na0 < _DEGENERATE_NORM) | (nu0 < _DEGENERATE_NORM)
    if np.any(flagged):
        a[flagged] += np.array([_NUDGE, 0.0, 0.0])
        b[flagged] += np.array([0.0, _NUDGE, 0.0])
        na1 = np.linalg.norm(a[flagged], axis=-1)
        x1 = a[flagged] / na1[..., None]
        u1 = b[flagged] - np.sum(x1 * b[flagged], axis=-1, keepdims=True) * x1
        if np.any(na1 < _DEGENERATE_NORM) or np.any(np.linalg.norm(u1, axis=-1) < _DEGENERATE_NORM):
            raise DegenerateInputError("6d input degenerate even after nudge")

    x, y, z, na, nu = _gram_schmidt(a, b)
    R = np.stack([x, y, z], axis=-1)
    cache = (a, b, x, y, na, nu)
    return R, cache, flagged


def orthonormalize_6d_backward(d_R: np.ndarray, cache) -> np.ndarray:
    """Adjoint of :func:`orthonormalize_6d_batch` (gradient w.r.t. the 6D input)."""
    a, b, x, y, na, nu = cache
    dX = d_R[..., :, 0]
    dY = d_R[..., :, 1]
    dZ = d_R[..., :, 2]

    # z = x cross y
    dx = dX + np.cross(y, dZ)
    dy = dY + np.cross(dZ, x)
    # y = u / |u|
    du = (dy - np.sum(y * dy, axis=-1, keepdims=True) * y) / nu
    # u = b - (x.b) x
    xb = np.sum(x * b, axis=-1, keepdims=True)
    xdu = np.sum(x * du, axis=-1, keepdims=True)
    db = du - xdu * x
    dx = dx - xdu * b - xb * du
    # x = a / |a|
    da = (dx - np.sum(x * dx, axis=-1, keepdims=True) * x) / na
    return np.concatenate([da, db], axis=-1)


def orthonormalize_6d(v: np.ndarray):
    """Single (6,) vector to a 3x3 rotation matrix; returns (R, flagged)."""
    R, _, flagged = orthonormalize_6d_batch(np.asarray(v, dtype=np.float64)[None, :])
    return R[0], bool(flagged[0])
