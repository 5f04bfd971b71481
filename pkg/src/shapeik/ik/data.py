"""Synthetic training examples: random shape, random pose, FK ground truth,
randomized effector draws, and shape-noise augmentation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import StructureError
from ..skeleton import (
    GENDERS,
    N_BETAS,
    Pose,
    ShapeParams,
    SkeletonTemplate,
    forward_kinematics_full,
    sample_random_pose,
)
from .effectors import KINDS, Effector, EffectorSet, IKInput

LOOKAT_DISTANCE_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class TrainingExample:
    input: IKInput
    pose: Pose               # full target pose (root + local rotations)
    positions: np.ndarray    # (J, 3) FK of the target
    globals: np.ndarray      # (J, 3, 3) world rotations of the target


def _draw_effectors(rng, template, positions, globals_, n, kind_probs):
    kinds = [KINDS[k] for k in rng.choice(len(KINDS), size=n, p=kind_probs)]
    used = set()
    effectors = []
    for kind in kinds:
        free = [j for j in range(template.n_joints) if (kind, j) not in used]
        if not free:
            # that kind is saturated; fall to the first kind with room
            for alt in KINDS:
                free = [j for j in range(template.n_joints) if (alt, j) not in used]
                if free:
                    kind = alt
                    break
        joint = int(free[rng.integers(len(free))])
        used.add((kind, joint))
        if kind == "position":
            payload = positions[joint].copy()
        elif kind == "rotation":
            payload = globals_[joint].copy()
        else:
            d = rng.uniform(*LOOKAT_DISTANCE_RANGE)
            payload = positions[joint] + globals_[joint] @ template.forward_axes[joint] * d
        effectors.append((kind, joint, payload))
    tolerances = rng.uniform(0.0, 1.0, size=n)
    return EffectorSet(tuple(
        Effector(kind=k, joint=j, payload=p, tolerance=float(t))
        for (k, j, p), t in zip(effectors, tolerances)
    ))


def make_training_example(template: SkeletonTemplate, rng: np.random.Generator,
                          config) -> TrainingExample:
    """Draws one synthetic example. Deterministic given the generator state.

    Draw order (fixed): betas, gender, pose, effector count, kinds, per-kind
    joints and payload extras, tolerances.
    """
    betas = np.clip(rng.standard_normal(N_BETAS), -5.0, 5.0)
    gender = GENDERS[rng.integers(len(GENDERS))]
    shape = ShapeParams(betas=betas, gender=gender, scale=1.0)
    pose = sample_random_pose(template, rng, limits=config.pose_limit)
    positions, globals_ = forward_kinematics_full(template, shape, pose)
    n = int(rng.integers(config.n_effectors_min, config.n_effectors_max + 1))
    effectors = _draw_effectors(rng, template, positions, globals_, n, config.kind_probs)
    return TrainingExample(
        input=IKInput(effectors=effectors, shape=shape),
        pose=pose,
        positions=positions,
        globals=globals_,
    )


def augment_beta(example: TrainingExample, template: SkeletonTemplate,
                 rng: np.random.Generator, variance: float = 1.0) -> TrainingExample:
    """Perturbs betas with Gaussian noise and rebuilds all FK-derived data.

    The pose is kept; positions, world rotations, and effector payloads are
    recomputed under the new shape, so the example stays self-consistent.
    Look-at targets keep their original distance along the ray.
    """
    if variance < 0:
        raise StructureError(f"augmentation variance must be >= 0, got {variance}")
    eps = np.sqrt(variance) * rng.standard_normal(N_BETAS)
    old_shape = example.input.shape
    new_shape = ShapeParams(betas=old_shape.betas + eps, gender=old_shape.gender,
                            scale=old_shape.scale)
    positions, globals_ = forward_kinematics_full(template, new_shape, example.pose)
    new_effectors = []
    for e in example.input.effectors:
        if e.kind == "position":
            payload = positions[e.joint].copy()
        elif e.kind == "rotation":
            payload = globals_[e.joint].copy()
        else:
            d = np.linalg.norm(e.payload - example.positions[e.joint])
            payload = positions[e.joint] + globals_[e.joint] @ template.forward_axes[e.joint] * d
        new_effectors.append(replace(e, payload=payload))
    return TrainingExample(
        input=IKInput(effectors=EffectorSet(tuple(new_effectors)), shape=new_shape),
        pose=example.pose,
        positions=positions,
        globals=globals_,
    )
