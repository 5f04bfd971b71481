"""Pose evaluation metrics: geodesic rotation error, MPJPE, PA-MPJPE.

MPJPE flattens every (pose, joint) pair in the batch into one leading
dimension and averages the Euclidean errors. PA-MPJPE first aligns each
predicted pose to its ground truth with the best similarity transform
(rotation + translation + uniform positive scale, solved in closed form via
the centered cross-covariance SVD with reflection correction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructureError
from .skeleton import rotation_violation


@dataclass(frozen=True)
class MetricReport:
    mpjpe_mm: float
    pa_mpjpe_mm: float
    ge_rad: float
    n_poses: int
    n_joints: int

    def __post_init__(self):
        if self.pa_mpjpe_mm > self.mpjpe_mm + 1e-9:
            raise StructureError("PA-MPJPE exceeds MPJPE; alignment is broken")

    def to_dict(self) -> dict:
        return {
            "mpjpe_mm": self.mpjpe_mm,
            "pa_mpjpe_mm": self.pa_mpjpe_mm,
            "ge_rad": self.ge_rad,
            "n_poses": self.n_poses,
            "n_joints": self.n_joints,
        }


def geodesic_error(R: np.ndarray, R_hat: np.ndarray, check: bool = True) -> np.ndarray:
    """Angular distance arccos[(tr(R_hat^T R) - 1) / 2], elementwise over
    leading batch dimensions, result in [0, pi] radians."""
    R = np.asarray(R, dtype=np.float64)
    R_hat = np.asarray(R_hat, dtype=np.float64)
    if R.shape != R_hat.shape or R.shape[-2:] != (3, 3):
        raise StructureError(f"rotation shapes must match and end in (3,3): {R.shape} vs {R_hat.shape}")
    if check:
        for arr in (R, R_hat):
            msg = rotation_violation(arr.reshape(-1, 3, 3))
            if msg is not None:
                raise StructureError(msg)
    trace = np.einsum("...ij,...ij->...", R_hat, R)
    arg = np.clip((trace - 1.0) / 2.0, -1.0, 1.0)
    return np.arccos(arg)


def mpjpe(P: np.ndarray, P_hat: np.ndarray) -> float:
    """Mean per-joint position error in meters over the flattened batch."""
    P = np.asarray(P, dtype=np.float64).reshape(-1, 3)
    P_hat = np.asarray(P_hat, dtype=np.float64).reshape(-1, 3)
    if P.shape != P_hat.shape:
        raise StructureError(f"point counts differ: {P.shape} vs {P_hat.shape}")
    return float(np.mean(np.linalg.norm(P - P_hat, axis=1)))


def similarity_align(target: np.ndarray, source: np.ndarray):
    """Best-fit similarity transform mapping ``source`` onto ``target``.

    Both are (n, 3) point sets, n >= 3. Returns (aligned, fallback) where
    ``aligned = s * Q @ source_i + t`` minimizes the squared error. When the
    centered cross-covariance is rank-deficient (rank < 2, rotation
    underdetermined), falls back to centroid translation only and flags it.
    """
    target = np.asarray(target, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    if target.ndim != 2 or target.shape[1] != 3 or target.shape != source.shape:
        raise StructureError(f"expected matching (n, 3) point sets, got {target.shape} vs {source.shape}")
    n = target.shape[0]
    if n < 3:
        raise StructureError("similarity alignment needs at least 3 points")

    mu_t = target.mean(axis=0)
    mu_s = source.mean(axis=0)
    tc = target - mu_t
    sc = source - mu_s

    cov = tc.T @ sc / n
    U, D, Vt = np.linalg.svd(cov)
    if D[1] <= D[0] * 1e-9:
        return source - mu_s + mu_t, True

    sign = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    S = np.ones(3)
    S[2] = sign if sign != 0 else 1.0
    Q = U @ np.diag(S) @ Vt
    var_s = np.mean(np.sum(sc * sc, axis=1))
    s = float(np.sum(D * S) / var_s)
    t = mu_t - s * Q @ mu_s
    return s * source @ Q.T + t, False


def pa_mpjpe(P: np.ndarray, P_hat: np.ndarray) -> float:
    """MPJPE in meters after per-pose similarity alignment of P_hat onto P.

    Accepts (J, 3) single poses or (n_poses, J, 3) batches.
    """
    P = np.asarray(P, dtype=np.float64)
    P_hat = np.asarray(P_hat, dtype=np.float64)
    if P.shape != P_hat.shape:
        raise StructureError(f"shapes differ: {P.shape} vs {P_hat.shape}")
    if P.ndim == 2:
        P = P[None]
        P_hat = P_hat[None]
    aligned = np.empty_like(P_hat)
    for i in range(P.shape[0]):
        aligned[i], _ = similarity_align(P[i], P_hat[i])
    return mpjpe(P, aligned)


def report(P: np.ndarray, P_hat: np.ndarray, R: np.ndarray, R_hat: np.ndarray) -> MetricReport:
    """Aggregate all three metrics over (n_poses, J, ...) batches."""
    P = np.asarray(P, dtype=np.float64)
    n_poses, n_joints = P.shape[0], P.shape[1]
    ge = float(np.mean(geodesic_error(R, R_hat, check=False)))
    return MetricReport(
        mpjpe_mm=mpjpe(P, P_hat) * 1000.0,
        pa_mpjpe_mm=pa_mpjpe(P, P_hat) * 1000.0,
        ge_rad=ge,
        n_poses=n_poses,
        n_joints=n_joints,
    )
