"""Greedy extraction of a small effector set that preserves a full pose.

Starting from the empty set, every remaining (kind, joint) candidate is
tried in turn, the solver runs on the extended set, and the candidate whose
reconstruction has the lowest mean per-joint position error is committed.
Stops when the error drops below the threshold or the budget is reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import RecoveryExhaustedError, StructureError
from .ik.effectors import Effector, EffectorSet, IKInput
from .ik.model import IKModel
from .skeleton import Pose, ShapeParams, SkeletonTemplate, forward_kinematics_full, shaped_offsets

CANDIDATE_KINDS = ("position", "rotation")


@dataclass(frozen=True)
class RecoveryConfig:
    max_effectors: int = 6
    error_threshold: float = 0.02   # meters, mean per-joint
    kinds: tuple = CANDIDATE_KINDS

    def __post_init__(self):
        if self.max_effectors < 1:
            raise StructureError("max_effectors must be >= 1")
        if not (np.isfinite(self.error_threshold) and self.error_threshold > 0):
            raise StructureError("error_threshold must be positive")
        kinds = tuple(self.kinds)
        if not kinds or any(k not in CANDIDATE_KINDS for k in kinds):
            raise StructureError(f"kinds must be a non-empty subset of {CANDIDATE_KINDS}")
        object.__setattr__(self, "kinds", kinds)


@dataclass(frozen=True)
class RecoveryResult:
    effectors: EffectorSet
    error_trace: tuple           # (step, Effector, error meters) per committed pick
    terminated_by: str           # "threshold" | "max_count"
    empty_set_error: float
    solve_calls: int             # candidate evaluations; the one empty-set solve not counted

    def __post_init__(self):
        if len(self.error_trace) != len(self.effectors):
            raise StructureError("error trace must have one entry per effector")
        if self.terminated_by not in ("threshold", "max_count"):
            raise StructureError(f"unknown termination reason '{self.terminated_by}'")

    @property
    def final_error(self) -> float:
        return self.error_trace[-1][2] if self.error_trace else self.empty_set_error


def _mean_joint_error(template, shape, poses, target_positions):
    offsets = np.broadcast_to(
        shaped_offsets(template, shape), (len(poses), template.n_joints, 3)).copy()
    roots = np.stack([p.root_position for p in poses])
    rot = np.stack([p.rotations for p in poses])
    pos, _ = kernels.fk_forward(template.parents, offsets, rot, roots)
    return np.mean(np.linalg.norm(pos - target_positions[None], axis=2), axis=1)


def recover_effectors(model: IKModel, template: SkeletonTemplate, shape: ShapeParams,
                      target: Pose, config: RecoveryConfig = RecoveryConfig()) -> RecoveryResult:
    """Greedy forward selection; deterministic. Ties resolve to the lowest
    joint index, position before rotation. Raises RecoveryExhaustedError
    (carrying the best result so far) if candidates run out early."""
    positions, globals_ = forward_kinematics_full(template, shape, target)

    def payload(kind, joint):
        return positions[joint].copy() if kind == "position" else globals_[joint].copy()

    solve_calls = 0
    selected = []
    trace = []

    empty_pose = model.solve_batch([IKInput(EffectorSet(()), shape)], template)[0]
    empty_error = float(_mean_joint_error(template, shape, [empty_pose], positions)[0])
    current = empty_error
    if current < config.error_threshold:
        return RecoveryResult(EffectorSet(()), (), "threshold", empty_error, solve_calls)

    # candidate order fixes tie-breaking: ascending joint, position first
    universe = [(j, kind) for j in range(template.n_joints) for kind in CANDIDATE_KINDS
                if kind in config.kinds]

    while len(selected) < config.max_effectors:
        chosen = {(e.kind, e.joint) for e in selected}
        candidates = [(j, k) for j, k in universe if (k, j) not in chosen]
        if not candidates:
            raise RecoveryExhaustedError(RecoveryResult(
                EffectorSet(tuple(selected)), tuple(trace), "max_count",
                empty_error, solve_calls))
        inputs = [
            IKInput(EffectorSet(tuple(selected) + (
                Effector(kind=k, joint=j, payload=payload(k, j)),)), shape)
            for j, k in candidates
        ]
        poses = model.solve_batch(inputs, template)
        solve_calls += len(inputs)
        errors = _mean_joint_error(template, shape, poses, positions)
        best = int(np.argmin(errors))  # argmin takes the first minimum: tie-break by order
        j, k = candidates[best]
        selected.append(Effector(kind=k, joint=j, payload=payload(k, j)))
        current = float(errors[best])
        trace.append((len(selected), selected[-1], current))
        if current < config.error_threshold:
            return RecoveryResult(EffectorSet(tuple(selected)), tuple(trace),
                                  "threshold", empty_error, solve_calls)

    return RecoveryResult(EffectorSet(tuple(selected)), tuple(trace),
                          "max_count", empty_error, solve_calls)
