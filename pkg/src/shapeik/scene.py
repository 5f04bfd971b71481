"""Scene interchange: multi-person shape/pose records and the editing
bootstrap (shape approximation -> retarget -> effector recovery).

Wire format, +Y up, meters, root in world frame:
{"version": 1, "source": str, "persons": [{"betas": [10], "gender",
"scale"?, "root": [3], "rotations": [[w,x,y,z] x 24]}]}

Quaternions are the stored truth: import renormalizes only rows whose norm
strays beyond 1e-12 (rejecting anything off by more than 1e-2), so a
round trip through export is byte-lossless and renormalization idempotent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import SchemaError, StructureError
from .ik.model import IKModel
from .inversion import ShapeBank
from .recovery import RecoveryConfig, RecoveryResult, recover_effectors
from .retarget import UserSkeleton, approximate_user_skeleton, identity_map, retarget_pose
from .rotations import QUAT_NORM_TOLERANCE, matrix_to_quat, normalize_quat, quat_to_matrix
from .skeleton import (
    CANONICAL_JOINT_COUNT,
    GENDERS,
    N_BETAS,
    Pose,
    ShapeParams,
    SkeletonTemplate,
)


@dataclass(frozen=True)
class PoseEstimate:
    """One person's estimated shape and pose. quaternions (J,4) wxyz, unit."""

    shape: ShapeParams
    root: np.ndarray
    quaternions: np.ndarray

    def __post_init__(self):
        root = np.ascontiguousarray(np.asarray(self.root, dtype=np.float64))
        quats = np.ascontiguousarray(np.asarray(self.quaternions, dtype=np.float64))
        if root.shape != (3,) or not np.isfinite(root).all():
            raise StructureError(f"root must be a finite 3-vector, got shape {root.shape}")
        if quats.ndim != 2 or quats.shape[1] != 4:
            raise StructureError(f"quaternions must be (J,4), got {quats.shape}")
        norms = np.linalg.norm(quats, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise StructureError("quaternions must be unit within 1e-6")
        root.flags.writeable = False
        quats.flags.writeable = False
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "quaternions", quats)

    @property
    def pose(self) -> Pose:
        return Pose(root_position=self.root, rotations=quat_to_matrix(self.quaternions))

    @classmethod
    def from_pose(cls, shape: ShapeParams, pose: Pose) -> "PoseEstimate":
        return cls(shape=shape, root=pose.root_position,
                   quaternions=matrix_to_quat(pose.rotations))


@dataclass(frozen=True)
class Scene:
    persons: tuple
    source: str = ""

    def __post_init__(self):
        persons = tuple(self.persons)
        for p in persons:
            if not isinstance(p, PoseEstimate):
                raise StructureError("Scene persons must be PoseEstimate instances")
        object.__setattr__(self, "persons", persons)


def _expect(record, key, path):
    if key not in record:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return record[key]


def _person_from_dict(rec, index: int, n_joints: int) -> PoseEstimate:
    path = f"persons[{index}]"
    if not isinstance(rec, dict):
        raise SchemaError(path, "person record must be an object")
    betas = _expect(rec, "betas", path)
    if not (isinstance(betas, list) and len(betas) == N_BETAS):
        raise SchemaError(f"{path}.betas", f"must be a list of {N_BETAS} numbers")
    gender = _expect(rec, "gender", path)
    if gender not in GENDERS:
        raise SchemaError(f"{path}.gender", f"must be one of {list(GENDERS)}")
    scale = rec.get("scale", 1.0)
    if not (isinstance(scale, (int, float)) and np.isfinite(scale) and scale > 0):
        raise SchemaError(f"{path}.scale", "must be a positive number")
    root = _expect(rec, "root", path)
    if not (isinstance(root, list) and len(root) == 3):
        raise SchemaError(f"{path}.root", "must be a list of 3 numbers")
    rots = _expect(rec, "rotations", path)
    if not isinstance(rots, list) or len(rots) != n_joints:
        raise SchemaError(
            f"{path}.rotations",
            f"person {index}: expected {n_joints} rotations, got "
            f"{len(rots) if isinstance(rots, list) else type(rots).__name__}")
    quats = np.empty((n_joints, 4))
    for j, q in enumerate(rots):
        if not (isinstance(q, list) and len(q) == 4):
            raise SchemaError(f"{path}.rotations[{j}]", "must be a [w,x,y,z] quadruple")
        quats[j] = q
    if not np.isfinite(quats).all():
        raise SchemaError(f"{path}.rotations", "quaternions must be finite")
    norms = np.linalg.norm(quats, axis=1)
    bad = np.where(np.abs(norms - 1.0) > QUAT_NORM_TOLERANCE)[0]
    if bad.size:
        raise SchemaError(f"{path}.rotations[{bad[0]}]",
                          f"quaternion norm {norms[bad[0]]:.4f} too far from 1")
    try:
        shape = ShapeParams(betas=np.asarray(betas, dtype=np.float64),
                            gender=gender, scale=float(scale))
    except StructureError as e:
        raise SchemaError(path, str(e)) from e
    return PoseEstimate(shape=shape, root=np.asarray(root, dtype=np.float64),
                        quaternions=normalize_quat(quats))


def scene_from_dict(data: dict, n_joints: int = CANONICAL_JOINT_COUNT) -> Scene:
    if not isinstance(data, dict):
        raise SchemaError("", "scene must be a JSON object")
    version = data.get("version")
    if version != 1:
        raise SchemaError("version", f"unsupported scene version {version!r}")
    persons = data.get("persons")
    if not isinstance(persons, list):
        raise SchemaError("persons", "must be a list of person records")
    return Scene(
        persons=tuple(_person_from_dict(rec, i, n_joints) for i, rec in enumerate(persons)),
        source=str(data.get("source", "")),
    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "version": 1,
        "source": scene.source,
        "persons": [
            {
                "betas": p.shape.betas.tolist(),
                "gender": p.shape.gender,
                "scale": p.shape.scale,
                "root": p.root.tolist(),
                "rotations": p.quaternions.tolist(),
            }
            for p in scene.persons
        ],
    }


def import_scene(path, n_joints: int = CANONICAL_JOINT_COUNT) -> Scene:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError("", f"scene file is not valid JSON: {e}") from e
    return scene_from_dict(data, n_joints)


def export_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=1))


@dataclass(frozen=True)
class BootstrapResult:
    """Editable state for one person after the import pipeline."""

    shape: ShapeParams
    pose: Pose
    recovery: RecoveryResult
    used_user_character: bool


def bootstrap_person(person: PoseEstimate, user: Optional[UserSkeleton],
                     model: IKModel, bank: ShapeBank,
                     template: SkeletonTemplate,
                     config: RecoveryConfig = RecoveryConfig()) -> BootstrapResult:
    """Shape approximation (when a user character is supplied), retarget of
    the estimate onto that approximation, then greedy effector recovery."""
    if user is not None:
        shape = approximate_user_skeleton(user, bank)
        pose = retarget_pose(template, person.shape, template, shape,
                             identity_map(template), person.pose)
    else:
        shape = person.shape
        pose = person.pose
    recovery = recover_effectors(model, template, shape, pose, config)
    return BootstrapResult(shape=shape, pose=pose, recovery=recovery,
                           used_user_character=user is not None)
