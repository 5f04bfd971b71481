"""Effector constraints and their fixed-width token encoding.

Every effector becomes a 51-dim vector (for the canonical 24 joints):
kind one-hot (3) | joint one-hot (J) | payload slots (9) | tolerance (1) |
betas (10) | gender one-hot (3) | scale (1). Payload slots: positions and
look-at targets fill slots 0-2, rotation payloads fill slots 0-5 with the
first two matrix columns (6D form). Remaining slots stay zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import StructureError
from ..skeleton import CANONICAL_JOINT_COUNT, N_BETAS, ShapeParams, rotation_violation

KINDS = ("position", "rotation", "lookat")
PAYLOAD_SLOTS = 9
CONDITIONING_DIM = N_BETAS + 3 + 1  # betas, gender one-hot, scale


def feature_dim(n_joints: int = CANONICAL_JOINT_COUNT) -> int:
    return len(KINDS) + n_joints + PAYLOAD_SLOTS + 1 + CONDITIONING_DIM


@dataclass(frozen=True)
class Effector:
    """One pose constraint bound to a joint.

    payload: (3,) world position | (3,3) world rotation | (3,) look-at
    target point. tolerance 0 marks a hard constraint, 1 a soft hint.
    """

    kind: str
    joint: int
    payload: np.ndarray
    tolerance: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StructureError(f"unknown effector kind '{self.kind}'")
        if not isinstance(self.joint, (int, np.integer)) or self.joint < 0:
            raise StructureError(f"effector joint must be a non-negative index, got {self.joint}")
        payload = np.ascontiguousarray(np.asarray(self.payload, dtype=np.float64))
        expected = (3, 3) if self.kind == "rotation" else (3,)
        if payload.shape != expected:
            raise StructureError(
                f"{self.kind} effector payload must have shape {expected}, got {payload.shape}"
            )
        if not np.isfinite(payload).all():
            raise StructureError("effector payload must be finite")
        if self.kind == "rotation":
            msg = rotation_violation(payload)
            if msg is not None:
                raise StructureError(f"rotation effector payload invalid: {msg}")
        if not (np.isfinite(self.tolerance) and 0.0 <= self.tolerance <= 1.0):
            raise StructureError(f"tolerance must lie in [0, 1], got {self.tolerance}")
        payload.flags.writeable = False
        object.__setattr__(self, "payload", payload)
        object.__setattr__(self, "joint", int(self.joint))
        object.__setattr__(self, "tolerance", float(self.tolerance))

    def payload_slots(self) -> np.ndarray:
        slots = np.zeros(PAYLOAD_SLOTS)
        if self.kind == "rotation":
            slots[:3] = self.payload[:, 0]
            slots[3:6] = self.payload[:, 1]
        else:
            slots[:3] = self.payload
        return slots


@dataclass(frozen=True)
class EffectorSet:
    """Unordered collection of effectors; (kind, joint) pairs must be unique.

    May be empty: a solve on an empty set returns the model's learned
    default pose.
    """

    effectors: tuple = field(default_factory=tuple)

    def __post_init__(self):
        effectors = tuple(self.effectors)
        seen = set()
        for e in effectors:
            if not isinstance(e, Effector):
                raise StructureError(f"EffectorSet holds Effector instances, got {type(e).__name__}")
            key = (e.kind, e.joint)
            if key in seen:
                raise StructureError(f"duplicate effector {key}")
            seen.add(key)
        object.__setattr__(self, "effectors", effectors)

    def __len__(self):
        return len(self.effectors)

    def __iter__(self):
        return iter(self.effectors)

    def check_joint_range(self, n_joints: int) -> None:
        for e in self.effectors:
            if e.joint >= n_joints:
                raise StructureError(
                    f"effector joint {e.joint} out of range for a {n_joints}-joint template"
                )


@dataclass(frozen=True)
class IKInput:
    effectors: EffectorSet
    shape: ShapeParams


def shape_conditioning(shape: ShapeParams) -> np.ndarray:
    """[betas, gender one-hot, scale] as a flat (14,) vector."""
    return np.concatenate([shape.betas, shape.gender_one_hot(), [shape.scale]])


def effector_features(effectors: Sequence[Effector], shape: ShapeParams,
                      n_joints: int = CANONICAL_JOINT_COUNT) -> np.ndarray:
    """Pre-projection token features, one row per effector: (n, feature_dim)."""
    cond = shape_conditioning(shape)
    out = np.zeros((len(effectors), feature_dim(n_joints)))
    for i, e in enumerate(effectors):
        if e.joint >= n_joints:
            raise StructureError(
                f"effector joint {e.joint} out of range for a {n_joints}-joint template"
            )
        out[i, KINDS.index(e.kind)] = 1.0
        out[i, len(KINDS) + e.joint] = 1.0
        base = len(KINDS) + n_joints
        out[i, base:base + PAYLOAD_SLOTS] = e.payload_slots()
        out[i, base + PAYLOAD_SLOTS] = e.tolerance
        out[i, base + PAYLOAD_SLOTS + 1:] = cond
    return out
