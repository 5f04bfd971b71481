"""Procedural pose transfer between humanoid skeletons.

Local rotations are copied across a name correspondence, unmapped joints get
the identity, and the root position is rescaled by the ratio of rest-pose
heights. Rigs are assumed rest-posed with +Y up.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, NamedJointError, SchemaError, StructureError
from .inversion import ShapeBank, extract_features, invert_shape, required_feature_joints
from .skeleton import Pose, ShapeParams, SkeletonTemplate, forward_kinematics, tpose


@dataclass(frozen=True)
class JointMap:
    """Partial correspondence user joint name -> canonical joint name."""

    pairs: dict

    def __post_init__(self):
        pairs = dict(self.pairs)
        for k, v in pairs.items():
            if not (isinstance(k, str) and isinstance(v, str)):
                raise StructureError("joint map entries must be name strings")
        values = list(pairs.values())
        if len(set(values)) != len(values):
            dupes = sorted({v for v in values if values.count(v) > 1})
            raise StructureError(f"joint map is not injective: {dupes} mapped twice")
        object.__setattr__(self, "pairs", pairs)

    def inverted(self) -> "JointMap":
        return JointMap({v: k for k, v in self.pairs.items()})

    def validate_against(self, user: SkeletonTemplate, canonical: SkeletonTemplate) -> None:
        for u, c in self.pairs.items():
            if not user.has_joint(u):
                raise NamedJointError(u, f"joint map names it but template '{user.name}' lacks it")
            if not canonical.has_joint(c):
                raise NamedJointError(c, f"joint map targets it but template '{canonical.name}' lacks it")


def load_joint_map(path) -> JointMap:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError("", f"joint map file is not valid JSON: {e}") from e
    if not isinstance(data, dict) or "map" not in data:
        raise SchemaError("map", "joint map file must be an object with a 'map' field")
    if not isinstance(data["map"], dict):
        raise SchemaError("map", "'map' must be an object of user->canonical names")
    return JointMap(data["map"])


def save_joint_map(jm: JointMap, path) -> None:
    Path(path).write_text(json.dumps({"map": jm.pairs}, indent=2, sort_keys=True))


@dataclass(frozen=True)
class UserSkeleton:
    """A user-supplied rig plus its correspondence to the canonical joints."""

    template: SkeletonTemplate
    joint_map: JointMap

    def feature_joint_index(self) -> dict:
        """canonical feature joint name -> user joint row, via the map."""
        canonical_to_user = self.joint_map.inverted().pairs
        index = {}
        for name in required_feature_joints():
            if name not in canonical_to_user:
                raise NamedJointError(
                    name, "shape approximation needs this joint mapped in the joint map")
            user_name = canonical_to_user[name]
            if not self.template.has_joint(user_name):
                raise NamedJointError(user_name, f"template '{self.template.name}' lacks it")
            index[name] = self.template.joint_index(user_name)
        return index


def user_rest_features(user: UserSkeleton) -> np.ndarray:
    """Distance features of a user rig's rest pose, via its joint map."""
    positions = forward_kinematics(user.template, ShapeParams.neutral(), tpose(user.template))
    return extract_features(positions, user.feature_joint_index())


def approximate_user_skeleton(user: UserSkeleton, bank: ShapeBank) -> ShapeParams:
    """Closest canonical shape for a user rig, from its rest-pose features."""
    return invert_shape(bank, user_rest_features(user)).params


def tpose_height(template: SkeletonTemplate, shape: ShapeParams) -> float:
    """Vertical (+Y) extent of the rest pose under the given shape."""
    positions = forward_kinematics(template, shape, tpose(template))
    return float(positions[:, 1].max() - positions[:, 1].min())


def retarget_pose(src_template: SkeletonTemplate, src_shape: ShapeParams,
                  dst_template: SkeletonTemplate, dst_shape: ShapeParams,
                  mapping: dict, pose: Pose) -> Pose:
    """mapping: src joint name -> dst joint name. Copies local rotations,
    fills unmapped destination joints with identity, scales the root by the
    rest-pose height ratio."""
    for s, d in mapping.items():
        if not src_template.has_joint(s):
            raise NamedJointError(s, f"mapping names it but template '{src_template.name}' lacks it")
        if not dst_template.has_joint(d):
            raise NamedJointError(d, f"mapping targets it but template '{dst_template.name}' lacks it")
    src_h = tpose_height(src_template, src_shape)
    if src_h <= 1e-12:
        raise DegenerateInputError("source rest pose has zero height, cannot scale root")
    ratio = tpose_height(dst_template, dst_shape) / src_h

    rotations = np.broadcast_to(np.eye(3), (dst_template.n_joints, 3, 3)).copy()
    for s, d in mapping.items():
        rotations[dst_template.joint_index(d)] = pose.rotations[src_template.joint_index(s)]
    return Pose(root_position=pose.root_position * ratio, rotations=rotations)


def retarget_fidelity(src_template: SkeletonTemplate, src_shape: ShapeParams,
                      dst_template: SkeletonTemplate, dst_shape: ShapeParams,
                      mapping: dict, pose: Pose) -> float:
    """Mean positional gap over mapped joints between the source pose and its
    retargeted copy. Diagnostic only: rotation copy is exact by construction,
    so this measures how far the two rigs' proportions drift apart."""
    from .metrics import mpjpe

    retargeted = retarget_pose(src_template, src_shape, dst_template, dst_shape,
                               mapping, pose)
    src_pos = forward_kinematics(src_template, src_shape, pose)
    dst_pos = forward_kinematics(dst_template, dst_shape, retargeted)
    src_rows = [src_template.joint_index(s) for s in mapping]
    dst_rows = [dst_template.joint_index(d) for d in mapping.values()]
    return mpjpe(src_pos[src_rows], dst_pos[dst_rows])


def identity_map(template: SkeletonTemplate) -> dict:
    return {name: name for name in template.joint_names}
