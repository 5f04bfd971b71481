"""Shape estimation from bone-length style distance features.

A bank of (shape, feature) pairs is sampled once, then arbitrary feature
vectors are inverted with a Gaussian kernel density estimate over the bank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import kernels
from .binio import read_container, write_container
from .errors import CheckpointError, NamedJointError, StructureError
from .skeleton import N_BETAS, ShapeParams, SkeletonTemplate

# Joint pairs whose Euclidean distances form the feature vector, in order.
FEATURE_PAIRS = (
    ("right_hip", "right_knee"),
    ("right_knee", "right_ankle"),
    ("head", "right_ankle"),
    ("head", "right_wrist"),
    ("right_shoulder", "right_elbow"),
    ("right_elbow", "right_wrist"),
)

N_FEATURES = len(FEATURE_PAIRS)

DEFAULT_KERNEL_WIDTH = 0.02  # meters
DEFAULT_BANK_SIZE = 20_000
BETA_RANGE = (-5.0, 5.0)
SCALE_RANGE = (0.2, 2.0)

# Raw (unshifted) kernel mass below this triggers the nearest-neighbor fallback.
UNDERFLOW_FLOOR = 1e-300

_BANK_MAGIC = b"SSB1"


def required_feature_joints() -> tuple:
    """Distinct joint names used by the feature pairs, in first-use order."""
    seen = []
    for a, b in FEATURE_PAIRS:
        for name in (a, b):
            if name not in seen:
                seen.append(name)
    return tuple(seen)


def extract_features(positions: np.ndarray, joint_index: Mapping[str, int]) -> np.ndarray:
    """Distance features from joint positions.

    positions: (J, 3) or (B, J, 3). joint_index maps the feature joint names
    to rows of the position array. Returns (6,) or (B, 6).
    """
    positions = np.asarray(positions, dtype=np.float64)
    squeeze = positions.ndim == 2
    if squeeze:
        positions = positions[None]
    if positions.ndim != 3 or positions.shape[2] != 3:
        raise StructureError(f"positions must be (J,3) or (B,J,3), got {positions.shape}")
    for name in required_feature_joints():
        if name not in joint_index:
            raise NamedJointError(name, "feature extraction needs this joint in the name map")
        idx = joint_index[name]
        if not 0 <= idx < positions.shape[1]:
            raise NamedJointError(name, f"mapped index {idx} outside 0..{positions.shape[1] - 1}")
    feats = np.empty((positions.shape[0], N_FEATURES))
    for k, (a, b) in enumerate(FEATURE_PAIRS):
        delta = positions[:, joint_index[a]] - positions[:, joint_index[b]]
        feats[:, k] = np.sqrt(np.sum(delta * delta, axis=1))
    return feats[0] if squeeze else feats


def template_joint_index(template: SkeletonTemplate) -> dict:
    index = {}
    for name in required_feature_joints():
        if not template.has_joint(name):
            raise NamedJointError(name, f"template '{template.name}' lacks a feature joint")
        index[name] = template.joint_index(name)
    return index


def template_features(template: SkeletonTemplate, shape: ShapeParams) -> np.ndarray:
    """Feature vector of a template at rest pose under the given shape."""
    from .skeleton import forward_kinematics, tpose

    positions = forward_kinematics(template, shape, tpose(template))
    return extract_features(positions, template_joint_index(template))


@dataclass(frozen=True)
class ShapeBank:
    """Sampled (shape value, feature vector) pairs plus kernel settings.

    values holds [betas(10), scale] per row; features the matching distance
    vectors. All rows were generated at rest pose with the neutral variant.
    """

    values: np.ndarray       # (N, 11)
    features: np.ndarray     # (N, 6)
    kernel_width: float
    seed: int
    template_id: str

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        features = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        if values.ndim != 2 or values.shape[1] != N_BETAS + 1:
            raise StructureError(f"bank values must be (N,{N_BETAS + 1}), got {values.shape}")
        if features.shape != (values.shape[0], N_FEATURES):
            raise StructureError(
                f"bank features must be ({values.shape[0]},{N_FEATURES}), got {features.shape}"
            )
        if values.shape[0] < 1:
            raise StructureError("bank must hold at least one entry")
        if not (np.isfinite(values).all() and np.isfinite(features).all()):
            raise StructureError("bank contains non-finite entries")
        if np.any(values[:, N_BETAS] <= 0):
            raise StructureError("bank scales must be positive")
        if not (np.isfinite(self.kernel_width) and self.kernel_width > 0):
            raise StructureError(f"kernel width must be positive, got {self.kernel_width}")
        values.flags.writeable = False
        features.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "features", features)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ShapeEstimate:
    betas: np.ndarray
    scale: float
    effective_sample_size: float
    fallback_used: bool

    @property
    def params(self) -> ShapeParams:
        return ShapeParams(betas=self.betas, gender="neutral", scale=self.scale)


def build_shape_bank(
    template: SkeletonTemplate,
    size: int = DEFAULT_BANK_SIZE,
    seed: int = 0,
    kernel_width: float = DEFAULT_KERNEL_WIDTH,
) -> ShapeBank:
    """Samples shapes uniformly and records their rest-pose features.

    Betas ~ U(-5, 5) per dimension, scale ~ U(0.2, 2), neutral variant,
    identity rotations. Deterministic given the seed.
    """
    if size < 1:
        raise StructureError(f"bank size must be >= 1, got {size}")
    rng = np.random.default_rng(seed)
    betas = rng.uniform(BETA_RANGE[0], BETA_RANGE[1], size=(size, N_BETAS))
    scales = rng.uniform(SCALE_RANGE[0], SCALE_RANGE[1], size=size)

    offsets, basis = template.variant_arrays("neutral")
    # shaped offsets for every sample in one shot: s_i * (o_j + B_j @ beta_i)
    shaped = scales[:, None, None] * (
        offsets[None, :, :] + np.einsum("jck,nk->njc", basis, betas)
    )
    n_joints = template.n_joints
    rotations = np.broadcast_to(np.eye(3), (size, n_joints, 3, 3)).copy()
    roots = np.zeros((size, 3))
    positions, _ = kernels.fk_forward(template.parents, shaped, rotations, roots)

    features = extract_features(positions, template_joint_index(template))
    values = np.concatenate([betas, scales[:, None]], axis=1)
    return ShapeBank(
        values=values,
        features=features,
        kernel_width=kernel_width,
        seed=seed,
        template_id=template.template_id,
    )


def invert_shape(bank: ShapeBank, features: np.ndarray) -> ShapeEstimate:
    """Kernel-weighted average of bank shapes around the query features.

    Weights are computed relative to the closest bank entry so nearby
    queries keep full precision. If even the raw (unshifted) total mass
    underflows, the estimate falls back to that closest entry.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.shape != (N_FEATURES,):
        raise StructureError(f"feature vector must be ({N_FEATURES},), got {f.shape}")
    if not np.isfinite(f).all():
        raise StructureError("feature vector contains non-finite values")

    shifted, d2_min, nearest = kernels.kde_weights(bank.features, f, bank.kernel_width)
    total_shifted = float(np.sum(shifted))
    # log of the true weight sum; shifted sum >= 1 because the argmin term is exp(0)
    log_total = -d2_min / (2.0 * bank.kernel_width**2) + np.log(total_shifted)

    if log_total < np.log(UNDERFLOW_FLOOR):
        row = bank.values[nearest]
        return ShapeEstimate(
            betas=row[:N_BETAS].copy(),
            scale=float(row[N_BETAS]),
            effective_sample_size=1.0,
            fallback_used=True,
        )

    norm = shifted / total_shifted
    blended = norm @ bank.values
    ess = 1.0 / float(np.sum(norm * norm))
    return ShapeEstimate(
        betas=blended[:N_BETAS].copy(),
        scale=float(blended[N_BETAS]),
        effective_sample_size=ess,
        fallback_used=False,
    )


def save_bank(bank: ShapeBank, path) -> None:
    header = {
        "version": 1,
        "size": bank.size,
        "kernel_width": bank.kernel_width,
        "seed": bank.seed,
        "template_id": bank.template_id,
        "feature_pairs": [list(p) for p in FEATURE_PAIRS],
    }
    payload = np.concatenate([bank.values, bank.features], axis=1)
    write_container(path, _BANK_MAGIC, header, np.ascontiguousarray(payload, dtype="<f8").tobytes())


def load_bank(path) -> ShapeBank:
    header, payload = read_container(path, _BANK_MAGIC)
    try:
        size = int(header["size"])
        kernel_width = float(header["kernel_width"])
        seed = int(header["seed"])
        template_id = str(header["template_id"])
    except KeyError as e:
        raise CheckpointError(f"{path}: bank header missing field {e}") from e
    width = N_BETAS + 1 + N_FEATURES
    expected = size * width * 8
    if len(payload) != expected:
        raise CheckpointError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f8").reshape(size, width).astype(np.float64)
    return ShapeBank(
        values=data[:, : N_BETAS + 1],
        features=data[:, N_BETAS + 1:],
        kernel_width=kernel_width,
        seed=seed,
        template_id=template_id,
    )
