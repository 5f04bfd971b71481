"""Parametric skeleton template, shape parameters, poses, forward kinematics.

The skeleton is the engine's ground truth: a fixed joint hierarchy whose
local bone offsets are an affine function of ten shape coefficients and a
global scale, optionally overridden per gender. Forward kinematics maps a
pose (root position + local rotations) to world joint positions, and is the
reconstruction oracle every other module measures against.

Lengths are meters, +Y is up, templates are authored in T-pose.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .errors import SchemaError, StructureError
from .rotations import axis_angle_to_matrix

N_BETAS = 10
GENDERS = ("female", "male", "neutral")
CANONICAL_JOINT_COUNT = 24

_DEFAULT_ROOT_BOX = (np.full(3, -1.0), np.full(3, 1.0))


def _readonly(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    if out is a:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ShapeParams:
    """Morphology input: shape coefficients, gender flag, global scale."""

    betas: np.ndarray
    gender: str = "neutral"
    scale: float = 1.0

    def __post_init__(self):
        betas = _readonly(np.asarray(self.betas, dtype=np.float64).reshape(-1))
        if betas.shape != (N_BETAS,):
            raise StructureError(f"betas must have {N_BETAS} components, got {betas.shape}")
        if not np.all(np.isfinite(betas)):
            raise StructureError("betas must be finite")
        if self.gender not in GENDERS:
            raise StructureError(f"gender must be one of {GENDERS}, got {self.gender!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise StructureError(f"scale must be positive and finite, got {self.scale}")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def neutral(cls) -> "ShapeParams":
        return cls(betas=np.zeros(N_BETAS))

    def gender_one_hot(self) -> np.ndarray:
        out = np.zeros(len(GENDERS))
        out[GENDERS.index(self.gender)] = 1.0
        return out

    def to_dict(self) -> dict:
        return {"betas": self.betas.tolist(), "gender": self.gender, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeParams":
        return cls(
            betas=np.asarray(d["betas"], dtype=np.float64),
            gender=d.get("gender", "neutral"),
            scale=float(d.get("scale", 1.0)),
        )


@dataclass(frozen=True)
class SkeletonTemplate:
    """Joint hierarchy, rest offsets, shape blend basis, gender overrides."""

    name: str
    joint_names: tuple
    parents: np.ndarray            # (J,) int64, parents[0] == -1
    offsets: np.ndarray            # (J, 3) meters
    forward_axes: np.ndarray       # (J, 3) unit vectors
    shape_basis: np.ndarray        # (J, 3, N_BETAS) meters per unit beta
    gender_variants: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "parents", _readonly(self.parents, dtype=np.int64))
        object.__setattr__(self, "offsets", _readonly(self.offsets))
        object.__setattr__(self, "forward_axes", _readonly(self.forward_axes))
        object.__setattr__(self, "shape_basis", _readonly(self.shape_basis))
        violations = validate_skeleton(self, expected_joint_count=None)
        if violations:
            raise StructureError("; ".join(violations))
        object.__setattr__(self, "_name_to_index",
                           {n: i for i, n in enumerate(self.joint_names)})
        object.__setattr__(self, "_template_id", _compute_template_id(self))

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    @property
    def template_id(self) -> str:
        return self._template_id

    def joint_index(self, name: str) -> int:
        return self._name_to_index[name]

    def has_joint(self, name: str) -> bool:
        return name in self._name_to_index

    def variant_arrays(self, gender: str):
        """(offsets, shape_basis) with the gender override substituted."""
        variant = self.gender_variants.get(gender, {})
        offsets = variant.get("offsets", self.offsets)
        basis = variant.get("shape_basis", self.shape_basis)
        return offsets, basis

    def to_dict(self) -> dict:
        joints = []
        for i, name in enumerate(self.joint_names):
            parent = None if self.parents[i] < 0 else self.joint_names[self.parents[i]]
            joints.append({
                "name": name,
                "parent": parent,
                "offset": self.offsets[i].tolist(),
                "forward_axis": self.forward_axes[i].tolist(),
            })
        doc = {
            "version": 1,
            "name": self.name,
            "joints": joints,
            "shape_basis": self.shape_basis.tolist(),
        }
        if self.gender_variants:
            doc["gender_variants"] = {
                g: {k: np.asarray(v).tolist() for k, v in ov.items()}
                for g, ov in self.gender_variants.items()
            }
        return doc


def _compute_template_id(template: SkeletonTemplate) -> str:
    payload = json.dumps(template.to_dict(), sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(payload.encode()).hexdigest()[:12]
    return f"{template.name}:{digest}"


def validate_skeleton(template: SkeletonTemplate, expected_joint_count: int | None = CANONICAL_JOINT_COUNT) -> list:
    """Collect invariant violations; an empty list means the template is valid."""
    v: list[str] = []
    J = len(template.joint_names)
    if expected_joint_count is not None and J != expected_joint_count:
        v.append(f"joint count {J} != expected {expected_joint_count}")
    if len(set(template.joint_names)) != J:
        v.append("duplicate joint names")
    parents = np.asarray(template.parents)
    roots = np.flatnonzero(parents < 0)
    if len(roots) != 1:
        v.append(f"expected exactly one root, found {len(roots)}")
    elif roots[0] != 0:
        v.append(f"root must be joint 0, found index {roots[0]}")
    for j in range(J):
        p = parents[j]
        if p >= J:
            v.append(f"joint {template.joint_names[j]!r} parent index {p} out of range")
        elif p >= j and j > 0:
            v.append(f"joint {template.joint_names[j]!r} not topologically sorted (parent index {p} >= {j})")
    if template.offsets.shape != (J, 3):
        v.append(f"offsets shape {template.offsets.shape} != ({J}, 3)")
    elif not np.all(np.isfinite(template.offsets)):
        v.append("offsets must be finite")
    if template.shape_basis.shape != (J, 3, N_BETAS):
        v.append(f"shape_basis shape {template.shape_basis.shape} != ({J}, 3, {N_BETAS})")
    elif not np.all(np.isfinite(template.shape_basis)):
        v.append("shape_basis must be finite")
    if template.forward_axes.shape != (J, 3):
        v.append(f"forward_axes shape {template.forward_axes.shape} != ({J}, 3)")
    else:
        norms = np.linalg.norm(template.forward_axes, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-9)
        for j in bad:
            v.append(f"joint {template.joint_names[j]!r} forward_axis not unit norm ({norms[j]:.12f})")
    for gender, variant in template.gender_variants.items():
        if gender not in GENDERS:
            v.append(f"unknown gender variant {gender!r}")
        for key, arr in variant.items():
            if key not in ("offsets", "shape_basis"):
                v.append(f"gender variant {gender!r} has unknown field {key!r}")
                continue
            expected = (J, 3) if key == "offsets" else (J, 3, N_BETAS)
            if np.asarray(arr).shape != expected:
                v.append(f"gender variant {gender!r} {key} shape != {expected}")
    return v


@dataclass(frozen=True)
class Pose:
    """Root world position plus one local rotation matrix per joint."""

    root_position: np.ndarray      # (3,)
    rotations: np.ndarray          # (J, 3, 3)

    def __post_init__(self):
        root = _readonly(np.asarray(self.root_position, dtype=np.float64).reshape(-1))
        if root.shape != (3,):
            raise StructureError(f"root_position must have 3 components, got {root.shape}")
        if not np.all(np.isfinite(root)):
            raise StructureError("root_position must be finite")
        rot = _readonly(self.rotations)
        if rot.ndim != 3 or rot.shape[1:] != (3, 3):
            raise StructureError(f"rotations must be (J, 3, 3), got {rot.shape}")
        msg = rotation_violation(rot)
        if msg is not None:
            raise StructureError(msg)
        object.__setattr__(self, "root_position", root)
        object.__setattr__(self, "rotations", rot)

    @property
    def n_joints(self) -> int:
        return self.rotations.shape[0]


def rotation_violation(rot: np.ndarray, tol: float = 1e-6):
    """Message describing why the matrices are not rotations, or None."""
    if not np.all(np.isfinite(rot)):
        return "rotations must be finite"
    eye = np.eye(3)
    gram = np.einsum("...ki,...kj->...ij", rot, rot)
    err = np.linalg.norm((gram - eye).reshape(rot.shape[:-2] + (9,)), axis=-1)
    if np.any(err >= tol):
        return f"rotation not orthonormal (max |R^T R - I|_F = {err.max():.3e})"
    det = np.linalg.det(rot)
    if np.any(np.abs(det - 1.0) >= tol):
        return "rotation determinant differs from +1"
    return None


def validate_rotations(rot: np.ndarray, tol: float = 1e-6) -> bool:
    return rotation_violation(rot, tol) is None


def shaped_offsets(template: SkeletonTemplate, shape: ShapeParams) -> np.ndarray:
    """Per-joint local offsets: scale * (rest + basis @ betas), gender variant first."""
    offsets, basis = template.variant_arrays(shape.gender)
    return shape.scale * (np.asarray(offsets) + np.asarray(basis) @ shape.betas)


def tpose(template: SkeletonTemplate) -> Pose:
    """Identity rotations, root at the origin."""
    return Pose(root_position=np.zeros(3),
                rotations=np.broadcast_to(np.eye(3), (template.n_joints, 3, 3)).copy())


def forward_kinematics(template: SkeletonTemplate, shape: ShapeParams, pose: Pose) -> np.ndarray:
    """World joint positions (J, 3). Pure function; inputs are not mutated."""
    if pose.n_joints != template.n_joints:
        raise StructureError(
            f"pose has {pose.n_joints} rotations but template has {template.n_joints} joints")
    offsets = shaped_offsets(template, shape)
    positions, _ = kernels.fk_forward(
        template.parents,
        np.ascontiguousarray(offsets[None]),
        np.ascontiguousarray(pose.rotations[None]),
        np.ascontiguousarray(pose.root_position[None]),
    )
    return positions[0]


def forward_kinematics_full(template: SkeletonTemplate, shape: ShapeParams, pose: Pose):
    """Like :func:`forward_kinematics` but also returns world rotations (J, 3, 3)."""
    if pose.n_joints != template.n_joints:
        raise StructureError(
            f"pose has {pose.n_joints} rotations but template has {template.n_joints} joints")
    offsets = shaped_offsets(template, shape)
    positions, globals_ = kernels.fk_forward(
        template.parents,
        np.ascontiguousarray(offsets[None]),
        np.ascontiguousarray(pose.rotations[None]),
        np.ascontiguousarray(pose.root_position[None]),
    )
    return positions[0], globals_[0]


def sample_random_pose(template: SkeletonTemplate, rng: np.random.Generator,
                       limits=np.pi / 2, root_box=None) -> Pose:
    """Random pose: per joint, a rotation about a uniform random axis by an
    angle uniform in [-limit, limit]; root uniform in ``root_box``.

    ``limits`` is a scalar or per-joint array of maximum angles in (0, pi].
    Deterministic given the generator state.
    """
    J = template.n_joints
    limits = np.broadcast_to(np.asarray(limits, dtype=np.float64), (J,))
    if np.any(limits <= 0) or np.any(limits > np.pi):
        raise StructureError("rotation limits must lie in (0, pi]")
    if root_box is None:
        root_box = _DEFAULT_ROOT_BOX
    lo, hi = (np.asarray(b, dtype=np.float64) for b in root_box)

    axes = rng.standard_normal((J, 3))
    norms = np.linalg.norm(axes, axis=1, keepdims=True)
    small = norms[:, 0] < 1e-12
    axes[small] = np.array([0.0, 0.0, 1.0])
    norms[small] = 1.0
    axes /= norms
    angles = rng.uniform(-limits, limits)
    root = rng.uniform(lo, hi)
    return Pose(root_position=root, rotations=axis_angle_to_matrix(axes, angles))


# ---------------------------------------------------------------------------
# skeleton file format
# ---------------------------------------------------------------------------

def template_from_dict(doc: dict, source: str = "<dict>") -> SkeletonTemplate:
    if not isinstance(doc, dict):
        raise SchemaError("$", f"expected an object, got {type(doc).__name__}")
    if doc.get("version") != 1:
        raise SchemaError("version", f"unsupported version {doc.get('version')!r}")
    joints = doc.get("joints")
    if not isinstance(joints, list) or not joints:
        raise SchemaError("joints", "expected a non-empty array")

    names = []
    for i, j in enumerate(joints):
        if not isinstance(j, dict) or "name" not in j:
            raise SchemaError(f"joints[{i}]", "expected an object with a 'name'")
        names.append(j["name"])
    if len(set(names)) != len(names):
        raise SchemaError("joints", "duplicate joint names")
    index = {n: i for i, n in enumerate(names)}

    J = len(joints)
    parents = np.empty(J, dtype=np.int64)
    offsets = np.empty((J, 3))
    axes = np.empty((J, 3))
    for i, j in enumerate(joints):
        parent = j.get("parent")
        if parent is None:
            parents[i] = -1
        elif parent in index:
            parents[i] = index[parent]
        else:
            raise SchemaError(f"joints[{i}].parent", f"unknown joint {parent!r}")
        offset = j.get("offset")
        if not (isinstance(offset, list) and len(offset) == 3):
            raise SchemaError(f"joints[{i}].offset", "expected a 3-vector")
        offsets[i] = offset
        axes[i] = j.get("forward_axis", [0.0, 0.0, 1.0])

    _check_acyclic(names, parents)

    basis = np.asarray(doc.get("shape_basis", np.zeros((J, 3, N_BETAS))), dtype=np.float64)
    if basis.shape != (J, 3, N_BETAS):
        raise SchemaError("shape_basis", f"expected shape ({J}, 3, {N_BETAS}), got {basis.shape}")

    variants = {}
    for gender, ov in (doc.get("gender_variants") or {}).items():
        if gender not in GENDERS:
            raise SchemaError(f"gender_variants.{gender}", "unknown gender")
        parsed = {}
        for key, arr in ov.items():
            if key not in ("offsets", "shape_basis"):
                raise SchemaError(f"gender_variants.{gender}.{key}", "unknown field")
            parsed[key] = _readonly(np.asarray(arr, dtype=np.float64))
        variants[gender] = parsed

    try:
        return SkeletonTemplate(
            name=doc.get("name", Path(source).stem),
            joint_names=tuple(names),
            parents=parents,
            offsets=offsets,
            forward_axes=axes,
            shape_basis=basis,
            gender_variants=variants,
        )
    except StructureError as e:
        raise SchemaError("joints", str(e)) from e


def _check_acyclic(names, parents) -> None:
    J = len(names)
    for start in range(J):
        seen = set()
        j = start
        while j >= 0:
            if j in seen:
                cycle = " -> ".join(names[k] for k in sorted(seen))
                raise SchemaError("joints", f"parent cycle involving {cycle}")
            seen.add(j)
            j = int(parents[j])
            if len(seen) > J:
                raise SchemaError("joints", "parent chain longer than joint count")


def load_skeleton(path, expected_joint_count: int | None = None) -> SkeletonTemplate:
    """Parse a skeleton JSON document; see README for the schema."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"malformed JSON: {e}") from e
    template = template_from_dict(doc, source=str(path))
    if expected_joint_count is not None and template.n_joints != expected_joint_count:
        raise StructureError(
            f"expected {expected_joint_count} joints, file has {template.n_joints}")
    return template


def save_skeleton(template: SkeletonTemplate, path) -> None:
    Path(path).write_text(json.dumps(template.to_dict(), indent=2))


_default_cache: dict = {}


def default_template() -> SkeletonTemplate:
    """The bundled 24-joint canonical template (cached)."""
    if "template" not in _default_cache:
        text = resources.files("shapeik.data").joinpath("default_skeleton.json").read_text()
        _default_cache["template"] = template_from_dict(json.loads(text), source="default_skeleton.json")
    return _default_cache["template"]
