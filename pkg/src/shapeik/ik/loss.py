"""Training loss over a batch of predicted poses, with analytic gradients.

Terms: squared position error (through FK), smoothed geodesic error on the
local rotations, squared root error, and a cosine look-at term tying each
look-at effector's ray to its target. Gradients are returned with respect to
the predicted root positions and local rotation matrices; FK terms are
back-propagated through the kinematic chain.
"""

from __future__ import annotations

import numpy as np

from .. import kernels

# arccos input clamp for differentiability; the attainable minimum
# arccos(1 - CLAMP_EPS) is subtracted so a perfect fit scores exactly 0
CLAMP_EPS = 1e-7
_GE_FLOOR = float(np.arccos(1.0 - CLAMP_EPS))


def ik_loss(parents, offsets, pred_roots, pred_rotations,
            target_positions, target_rotations, target_roots,
            lookats, lambda_pos=1.0, lambda_rot=1.0, lambda_root=1.0,
            lambda_look=1.0):
    """Returns (loss, parts, d_roots, d_rotations).

    offsets (B,J,3) are the per-sample shaped bone offsets. lookats is a
    sequence of (batch index, joint, target point (3,), forward axis (3,))
    tuples, one per look-at effector in the batch.
    """
    B, J = offsets.shape[0], offsets.shape[1]
    pos_hat, glob_hat = kernels.fk_forward(parents, offsets, pred_rotations, pred_roots)
    d_positions = np.zeros((B, J, 3))
    d_globals = np.zeros((B, J, 3, 3))

    diff = pos_hat - target_positions
    loss_pos = lambda_pos * float(np.sum(diff * diff)) / (B * J)
    d_positions += (2.0 * lambda_pos / (B * J)) * diff

    # smoothed geodesic on local rotations; clamped region carries no gradient
    c_raw = 0.5 * (np.einsum("bjik,bjik->bj", pred_rotations, target_rotations) - 1.0)
    c = np.clip(c_raw, -1.0 + CLAMP_EPS, 1.0 - CLAMP_EPS)
    loss_rot = lambda_rot * float(np.sum(np.arccos(c) - _GE_FLOOR)) / (B * J)
    active = (c_raw > -1.0 + CLAMP_EPS) & (c_raw < 1.0 - CLAMP_EPS)
    coef = np.where(active, -0.5 / np.sqrt(1.0 - c * c), 0.0) * (lambda_rot / (B * J))
    d_rot_local = coef[:, :, None, None] * target_rotations

    rdiff = pred_roots - target_roots
    loss_root = lambda_root * float(np.sum(rdiff * rdiff)) / B
    d_roots_direct = (2.0 * lambda_root / B) * rdiff

    loss_look = 0.0
    if lookats:
        w = lambda_look / len(lookats)
        for b, j, target, axis in lookats:
            u = glob_hat[b, j] @ axis
            s = target - pos_hat[b, j]
            r = max(float(np.linalg.norm(s)), 1e-9)
            v = s / r
            uv = float(u @ v)
            loss_look += 1.0 - uv
            d_globals[b, j] -= w * np.outer(v, axis)
            d_positions[b, j] += w * (u - uv * v) / r
        loss_look *= w

    d_rot_fk, d_roots_fk = kernels.fk_backward(
        parents, offsets, pred_rotations, glob_hat, d_positions, d_globals)

    parts = {"position": loss_pos, "rotation": loss_rot,
             "root": loss_root, "lookat": loss_look}
    total = loss_pos + loss_rot + loss_root + loss_look
    return total, parts, d_roots_fk + d_roots_direct, d_rot_fk + d_rot_local
