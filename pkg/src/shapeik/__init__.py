"""Shape-conditioned full-body inverse kinematics.

A 24-joint kinematic skeleton with a learned pose decoder: sparse effector
constraints (positions, rotations, look-at targets) plus body shape
parameters in, a full pose out. Around the core solver: kernel-density
inversion from bone-length features to shape, greedy effector recovery from
full poses, cross-rig retargeting, multi-person scene interchange, a JSON
service, and a CLI.

Heavy kernels (forward kinematics and its adjoint, kernel weights) run
through numba when available; set SHAPEIK_BACKEND=numpy to force the pure
numpy fallback.
"""

from .backend import ACTIVE_BACKEND
from .errors import (
    CheckpointError,
    DegenerateInputError,
    NamedJointError,
    RecoveryExhaustedError,
    SchemaError,
    ShapeIKError,
    StructureError,
)
from .ik import (
    Effector,
    EffectorSet,
    IKInput,
    IKModel,
    TrainConfig,
    evaluate,
    load_model,
    mpjpe_by_effector_count,
    save_model,
    train,
)
from .inversion import (
    ShapeBank,
    ShapeEstimate,
    build_shape_bank,
    extract_features,
    invert_shape,
    load_bank,
    save_bank,
)
from .metrics import MetricReport, geodesic_error, mpjpe, pa_mpjpe, report
from .recovery import RecoveryConfig, RecoveryResult, recover_effectors
from .retarget import (
    JointMap,
    UserSkeleton,
    approximate_user_skeleton,
    identity_map,
    load_joint_map,
    retarget_fidelity,
    retarget_pose,
    save_joint_map,
)
from .scene import (
    BootstrapResult,
    PoseEstimate,
    Scene,
    bootstrap_person,
    export_scene,
    import_scene,
    scene_from_dict,
    scene_to_dict,
)
from .skeleton import (
    Pose,
    ShapeParams,
    SkeletonTemplate,
    default_template,
    forward_kinematics,
    forward_kinematics_full,
    load_skeleton,
    sample_random_pose,
    save_skeleton,
    shaped_offsets,
    tpose,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "BootstrapResult",
    "CheckpointError",
    "DegenerateInputError",
    "Effector",
    "EffectorSet",
    "IKInput",
    "IKModel",
    "JointMap",
    "MetricReport",
    "NamedJointError",
    "Pose",
    "PoseEstimate",
    "RecoveryConfig",
    "RecoveryExhaustedError",
    "RecoveryResult",
    "Scene",
    "SchemaError",
    "ShapeBank",
    "ShapeEstimate",
    "ShapeIKError",
    "ShapeParams",
    "SkeletonTemplate",
    "StructureError",
    "TrainConfig",
    "UserSkeleton",
    "approximate_user_skeleton",
    "bootstrap_person",
    "build_shape_bank",
    "default_template",
    "evaluate",
    "export_scene",
    "extract_features",
    "forward_kinematics",
    "forward_kinematics_full",
    "geodesic_error",
    "identity_map",
    "import_scene",
    "invert_shape",
    "load_bank",
    "load_joint_map",
    "load_model",
    "load_skeleton",
    "mpjpe",
    "mpjpe_by_effector_count",
    "pa_mpjpe",
    "recover_effectors",
    "report",
    "retarget_fidelity",
    "retarget_pose",
    "sample_random_pose",
    "save_bank",
    "save_joint_map",
    "save_model",
    "save_skeleton",
    "scene_from_dict",
    "scene_to_dict",
    "shaped_offsets",
    "train",
    "tpose",
    "__version__",
]
