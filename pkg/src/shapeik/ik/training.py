"""Deterministic training loop over virtual synthetic data.

The dataset is never materialized: example i is regenerated on demand from
np.random.default_rng([seed, stream, i]), so runs with equal configs produce
bitwise-identical checkpoints. Streams: 0 model init, 1 batch indices,
2 training examples, 3 augmentation noise, 4 held-out examples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import StructureError
from ..metrics import geodesic_error, mpjpe
from ..nn import Adam
from ..skeleton import SkeletonTemplate, shaped_offsets
from .data import augment_beta, make_training_example
from .loss import ik_loss
from .model import IKModel, build_batch

LR_SCHEDULES = ("constant", "cosine")


@dataclass(frozen=True)
class TrainConfig:
    dataset_size: int = 50_000
    steps: int = 2000
    batch_size: int = 64
    learning_rate: float = 1e-3
    lr_schedule: str = "cosine"
    seed: int = 0
    # example sampling
    pose_limit: float = np.pi / 2
    n_effectors_min: int = 3
    n_effectors_max: int = 16
    kind_probs: tuple = (0.6, 0.3, 0.1)
    beta_augment: bool = True
    beta_variance: float = 1.0
    # loss weights
    lambda_pos: float = 1.0
    lambda_rot: float = 1.0
    lambda_root: float = 1.0
    lambda_look: float = 1.0
    # architecture
    token_dim: int = 64
    token_layers: int = 3
    decoder_width: int = 256
    decoder_blocks: int = 4
    # periodic held-out metrics
    eval_every: int = 250
    eval_size: int = 64

    def __post_init__(self):
        if abs(sum(self.kind_probs) - 1.0) > 1e-9 or any(p < 0 for p in self.kind_probs):
            raise StructureError("kind_probs must be non-negative and sum to 1")
        for name in ("lambda_pos", "lambda_rot", "lambda_root", "lambda_look"):
            if getattr(self, name) < 0:
                raise StructureError(f"{name} must be >= 0")
        if self.lr_schedule not in LR_SCHEDULES:
            raise StructureError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if not 0 < self.n_effectors_min <= self.n_effectors_max:
            raise StructureError("need 0 < n_effectors_min <= n_effectors_max")
        if not 0.0 < self.pose_limit <= np.pi:
            raise StructureError("pose_limit must lie in (0, pi]")
        if min(self.dataset_size, self.batch_size, self.eval_size, self.eval_every) < 1:
            raise StructureError("sizes must be positive")
        if self.steps < 0 or self.learning_rate <= 0:
            raise StructureError("steps must be >= 0 and learning_rate > 0")

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["kind_probs"] = list(self.kind_probs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "kind_probs" in d:
            d["kind_probs"] = tuple(d["kind_probs"])
        return cls(**d)


def example_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


def training_example(template, config, index: int):
    return make_training_example(template, example_rng(config.seed, 2, index), config)


def heldout_example(template, config, index: int):
    return make_training_example(template, example_rng(config.seed, 4, index), config)


def _batch_arrays(template, examples):
    feats, mask, cond = build_batch([ex.input for ex in examples], template.n_joints)
    offsets = np.stack([shaped_offsets(template, ex.input.shape) for ex in examples])
    t_pos = np.stack([ex.positions for ex in examples])
    t_rot = np.stack([ex.pose.rotations for ex in examples])
    t_root = np.stack([ex.pose.root_position for ex in examples])
    lookats = []
    for b, ex in enumerate(examples):
        for e in ex.input.effectors:
            if e.kind == "lookat":
                lookats.append((b, e.joint, e.payload, template.forward_axes[e.joint]))
    return feats, mask, cond, offsets, t_pos, t_rot, t_root, lookats


def _lr_at(config: TrainConfig, step: int) -> float:
    if config.lr_schedule == "constant" or config.steps == 0:
        return config.learning_rate
    frac = step / config.steps
    floor = config.learning_rate * 0.01
    return float(floor + 0.5 * (config.learning_rate - floor) * (1 + np.cos(np.pi * frac)))


def _validation_metrics(model, template, config, val_examples, val_arrays):
    feats, mask, cond, offsets, t_pos, t_rot, t_root, lookats = val_arrays
    roots, R, _ = model.forward_batch(feats, mask, cond)
    loss, _, _, _ = ik_loss(
        template.parents, offsets, roots, R, t_pos, t_rot, t_root, lookats,
        config.lambda_pos, config.lambda_rot, config.lambda_root, config.lambda_look)
    from .. import kernels

    pos_hat, _ = kernels.fk_forward(template.parents, offsets, R, roots)
    return {
        "val_loss": float(loss),
        "val_mpjpe": float(mpjpe(t_pos, pos_hat)),
        "val_ge": float(np.mean(geodesic_error(
            t_rot.reshape(-1, 3, 3), R.reshape(-1, 3, 3), check=False))),
    }


def train(template: SkeletonTemplate, config: TrainConfig):
    """Returns (model, trace). trace entries: step, lr, loss and loss parts
    on the training batch, plus held-out val_loss/val_mpjpe/val_ge at step 0,
    every eval_every steps, and at the end."""
    model = IKModel(
        template_id=template.template_id, n_joints=template.n_joints,
        rng=np.random.default_rng([config.seed, 0]),
        token_dim=config.token_dim, token_layers=config.token_layers,
        decoder_width=config.decoder_width, decoder_blocks=config.decoder_blocks)
    optimizer = Adam(model, lr=config.learning_rate)
    batch_rng = np.random.default_rng([config.seed, 1])
    aug_rng = np.random.default_rng([config.seed, 3])

    val_examples = [heldout_example(template, config, k) for k in range(config.eval_size)]
    val_arrays = _batch_arrays(template, val_examples)

    trace = []
    entry = {"step": 0, "lr": _lr_at(config, 0), "loss": None}
    entry.update(_validation_metrics(model, template, config, val_examples, val_arrays))
    trace.append(entry)

    for step in range(config.steps):
        idx = batch_rng.integers(0, config.dataset_size, size=config.batch_size)
        examples = [training_example(template, config, int(i)) for i in idx]
        if config.beta_augment:
            examples = [augment_beta(ex, template, aug_rng, config.beta_variance)
                        for ex in examples]
        feats, mask, cond, offsets, t_pos, t_rot, t_root, lookats = _batch_arrays(
            template, examples)

        roots, R, _ = model.forward_batch(feats, mask, cond)
        loss, parts, d_roots, d_R = ik_loss(
            template.parents, offsets, roots, R, t_pos, t_rot, t_root, lookats,
            config.lambda_pos, config.lambda_rot, config.lambda_root, config.lambda_look)
        model.zero_grad()
        model.backward_batch(d_roots, d_R)
        optimizer.lr = _lr_at(config, step)
        optimizer.step()

        last = step == config.steps - 1
        if last or (step + 1) % config.eval_every == 0:
            entry = {"step": step + 1, "lr": optimizer.lr, "loss": float(loss)}
            entry.update(parts)
            entry.update(_validation_metrics(model, template, config, val_examples, val_arrays))
            trace.append(entry)

    return model, trace
