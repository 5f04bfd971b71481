"""Held-out evaluation under the randomized effector scheme."""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..metrics import MetricReport, report
from ..skeleton import SkeletonTemplate, shaped_offsets
from .data import make_training_example
from .effectors import Effector, EffectorSet, IKInput
from .model import IKModel

_BATCH = 128


def generate_eval_set(template: SkeletonTemplate, config, n_poses: int, seed: int):
    """Deterministic held-out examples, disjoint RNG stream from training."""
    return [
        make_training_example(template, np.random.default_rng([seed, 5, k]), config)
        for k in range(n_poses)
    ]


def _predict(solver, template, inputs):
    poses = []
    for start in range(0, len(inputs), _BATCH):
        poses.extend(solver(inputs[start:start + _BATCH], template))
    return poses


def evaluate_on(solver, template: SkeletonTemplate, examples) -> MetricReport:
    """solver(list[IKInput], template) -> list[Pose]; aggregates pose metrics."""
    pred = _predict(solver, template, [ex.input for ex in examples])
    offsets = np.stack([shaped_offsets(template, ex.input.shape) for ex in examples])
    roots = np.stack([p.root_position for p in pred])
    R_hat = np.stack([p.rotations for p in pred])
    pos_hat, _ = kernels.fk_forward(template.parents, offsets, R_hat, roots)
    t_pos = np.stack([ex.positions for ex in examples])
    t_rot = np.stack([ex.pose.rotations for ex in examples])
    return report(t_pos, pos_hat, t_rot, R_hat)


def evaluate(model: IKModel, template: SkeletonTemplate, config,
             n_poses: int = 500, seed: int = 0) -> MetricReport:
    examples = generate_eval_set(template, config, n_poses, seed)
    return evaluate_on(lambda inputs, tpl: model.solve_batch(inputs, tpl),
                       template, examples)


def mpjpe_by_effector_count(model: IKModel, template: SkeletonTemplate, config,
                            ks=(1, 3, 6, 12, 24), n_poses: int = 500,
                            seed: int = 0) -> dict:
    """Median per-pose MPJPE when solving from k ground-truth position
    effectors on k distinct random joints, for each k."""
    examples = generate_eval_set(template, config, n_poses, seed)
    joint_rng = np.random.default_rng([seed, 6])
    subsets = [joint_rng.permutation(template.n_joints) for _ in examples]

    out = {}
    for k in ks:
        inputs = []
        for ex, perm in zip(examples, subsets):
            effs = tuple(
                Effector(kind="position", joint=int(j), payload=ex.positions[j].copy())
                for j in perm[:k]
            )
            inputs.append(IKInput(effectors=EffectorSet(effs), shape=ex.input.shape))
        pred = _predict(lambda ins, tpl: model.solve_batch(ins, tpl), template, inputs)
        offsets = np.stack([shaped_offsets(template, ex.input.shape) for ex in examples])
        roots = np.stack([p.root_position for p in pred])
        R_hat = np.stack([p.rotations for p in pred])
        pos_hat, _ = kernels.fk_forward(template.parents, offsets, R_hat, roots)
        t_pos = np.stack([ex.positions for ex in examples])
        per_pose = np.mean(np.linalg.norm(pos_hat - t_pos, axis=2), axis=1)
        out[int(k)] = float(np.median(per_pose))
    return out
