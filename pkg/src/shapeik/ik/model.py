"""Pose decoder: variable-size effector set in, full pose out.

Architecture: per-effector feature vector -> linear embed -> token MLP ->
masked mean pooling -> concat with shape conditioning -> linear trunk ->
residual blocks -> head emitting root position plus one 6D rotation per
joint, orthonormalized into matrices. Mean pooling makes the output exactly
invariant to effector order.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Sequence

import numpy as np

from ..errors import CheckpointError, StructureError
from ..nn import Linear, Module, ReLU, ResidualBlock, Sequential, load_checkpoint, save_checkpoint
from ..rotations import orthonormalize_6d_backward, orthonormalize_6d_batch
from ..skeleton import Pose, SkeletonTemplate
from .effectors import CONDITIONING_DIM, IKInput, effector_features, feature_dim, shape_conditioning


class IKModel(Module):
    def __init__(self, template_id: str, n_joints: int, rng,
                 token_dim: int = 64, token_layers: int = 3,
                 decoder_width: int = 256, decoder_blocks: int = 4):
        super().__init__()
        if min(token_dim, token_layers, decoder_width, decoder_blocks, n_joints) < 1:
            raise StructureError("architecture dimensions must be positive")
        self.template_id = template_id
        self.n_joints = n_joints
        self.token_dim = token_dim
        self.token_layers = token_layers
        self.decoder_width = decoder_width
        self.decoder_blocks = decoder_blocks
        self.feature_dim = feature_dim(n_joints)
        self.head_dim = 3 + 6 * n_joints

        self.embed = self.add_child("embed", Linear(self.feature_dim, token_dim, rng))
        mlp = []
        for _ in range(token_layers):
            mlp += [Linear(token_dim, token_dim, rng), ReLU()]
        self.token_mlp = self.add_child("token_mlp", Sequential(*mlp))
        self.trunk = self.add_child(
            "trunk", Linear(token_dim + CONDITIONING_DIM, decoder_width, rng))
        blocks = [ResidualBlock(decoder_width, rng) for _ in range(decoder_blocks)]
        self.blocks = self.add_child("blocks", Sequential(*blocks))
        self.head = self.add_child("head", Linear(decoder_width, self.head_dim, rng))
        self._cache = None

    # -- architecture descriptor -------------------------------------------

    def architecture(self) -> dict:
        return {
            "kind": "effector-pose-decoder",
            "template_id": self.template_id,
            "n_joints": self.n_joints,
            "token_dim": self.token_dim,
            "token_layers": self.token_layers,
            "decoder_width": self.decoder_width,
            "decoder_blocks": self.decoder_blocks,
        }

    # -- batched core --------------------------------------------------------

    def forward_batch(self, feats: np.ndarray, mask: np.ndarray, cond: np.ndarray,
                      check_finite: bool = False):
        """feats (B,T,F), mask (B,T) in {0,1}, cond (B,14).

        Returns (roots (B,3), rotations (B,J,3,3), degenerate flags (B,J)).
        """
        B, T = feats.shape[0], feats.shape[1]
        counts = np.maximum(mask.sum(axis=1), 1.0)

        def guard(x, stage):
            if check_finite and not np.all(np.isfinite(x)):
                raise StructureError(f"non-finite activation at stage '{stage}'")
            return x

        if T > 0:
            tok = guard(self.embed.forward(feats), "embed")
            tok = guard(self.token_mlp.forward(tok), "token_mlp")
            pooled = (tok * mask[:, :, None]).sum(axis=1) / counts[:, None]
        else:
            pooled = np.zeros((B, self.token_dim))
        pooled = guard(pooled, "pooling")
        z = np.concatenate([pooled, cond], axis=1)
        h = guard(self.trunk.forward(z), "trunk")
        h = guard(self.blocks.forward(h), "blocks")
        out = guard(self.head.forward(h), "head")
        roots = out[:, :3]
        six = out[:, 3:].reshape(B * self.n_joints, 6)
        R, ortho_cache, flagged = orthonormalize_6d_batch(six)
        self._cache = (mask, counts, T, ortho_cache)
        return roots, R.reshape(B, self.n_joints, 3, 3), flagged.reshape(B, self.n_joints)

    def backward_batch(self, d_roots: np.ndarray, d_R: np.ndarray) -> None:
        """Accumulates parameter gradients for the last forward_batch call."""
        mask, counts, T, ortho_cache = self._cache
        B = d_roots.shape[0]
        d_six = orthonormalize_6d_backward(d_R.reshape(B * self.n_joints, 3, 3), ortho_cache)
        d_out = np.concatenate([d_roots, d_six.reshape(B, 6 * self.n_joints)], axis=1)
        d_h = self.head.backward(d_out)
        d_h = self.blocks.backward(d_h)
        d_z = self.trunk.backward(d_h)
        if T > 0:
            d_pooled = d_z[:, : self.token_dim]
            d_tok = mask[:, :, None] * d_pooled[:, None, :] / counts[:, None, None]
            d_tok = self.token_mlp.backward(d_tok)
            self.embed.backward(d_tok)

    # -- user-facing solve -----------------------------------------------------

    def solve_batch(self, inputs: Sequence[IKInput], template: SkeletonTemplate):
        if template.template_id != self.template_id:
            raise StructureError(
                f"model was trained for template '{self.template_id}', "
                f"got '{template.template_id}'"
            )
        feats, mask, cond = build_batch(inputs, self.n_joints)
        roots, R, _ = self.forward_batch(feats, mask, cond, check_finite=True)
        return [Pose(root_position=roots[b], rotations=R[b]) for b in range(len(inputs))]

    def solve(self, input_: IKInput, template: SkeletonTemplate) -> Pose:
        return self.solve_batch([input_], template)[0]


def build_batch(inputs: Sequence[IKInput], n_joints: int):
    """Pads per-input effector features into (B,T,F) + mask + conditioning."""
    rows = []
    for inp in inputs:
        inp.effectors.check_joint_range(n_joints)
        rows.append(effector_features(list(inp.effectors), inp.shape, n_joints))
    B = len(inputs)
    T = max((r.shape[0] for r in rows), default=0)
    F = feature_dim(n_joints)
    feats = np.zeros((B, T, F))
    mask = np.zeros((B, T))
    for b, r in enumerate(rows):
        feats[b, : r.shape[0]] = r
        mask[b, : r.shape[0]] = 1.0
    cond = np.stack([shape_conditioning(inp.shape) for inp in inputs])
    return feats, mask, cond


def save_model(model: IKModel, path, extra: dict | None = None) -> None:
    arrays = OrderedDict(model.named_parameters())
    save_checkpoint(path, arrays, model.architecture(), extra)


def load_model(path):
    """Returns (model, extra, content_hash)."""
    arrays, arch, extra, content_hash = load_checkpoint(path)
    if arch.get("kind") != "effector-pose-decoder":
        raise CheckpointError(f"{path}: not a pose-decoder checkpoint")
    model = IKModel(
        template_id=arch["template_id"],
        n_joints=arch["n_joints"],
        rng=np.random.default_rng(0),
        token_dim=arch["token_dim"],
        token_layers=arch["token_layers"],
        decoder_width=arch["decoder_width"],
        decoder_blocks=arch["decoder_blocks"],
    )
    model.load_state(arrays)
    return model, extra, content_hash
