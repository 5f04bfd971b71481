"""Generate the bundled default 24-joint skeleton template.

Run from the repository root:

    python3 tools/make_default_skeleton.py

Writes ``src/shapeik/data/default_skeleton.json``. The geometry is a
synthetic average humanoid (pelvis at the origin, +Y up, T-pose, arms along
+/-X). The shape basis is documented and fixed:

  dim 0  limb length: +/- proportional change of leg and arm bone offsets
  dim 1  torso length: proportional change of spine, neck, head, collars
  dims 2-9  small fixed perturbations over all joints (seeded, frozen)

Gender variants uniformly shrink (female) or enlarge (male) all offsets.
"""

import json
from pathlib import Path

import numpy as np

# (name, parent, offset)
JOINTS = [
    ("pelvis", None, (0.0, 0.0, 0.0)),
    ("left_hip", "pelvis", (0.09, -0.09, 0.0)),
    ("right_hip", "pelvis", (-0.09, -0.09, 0.0)),
    ("spine1", "pelvis", (0.0, 0.11, 0.0)),
    ("left_knee", "left_hip", (0.0, -0.38, 0.0)),
    ("right_knee", "right_hip", (0.0, -0.38, 0.0)),
    ("spine2", "spine1", (0.0, 0.12, 0.0)),
    ("left_ankle", "left_knee", (0.0, -0.40, 0.0)),
    ("right_ankle", "right_knee", (0.0, -0.40, 0.0)),
    ("spine3", "spine2", (0.0, 0.12, 0.0)),
    ("left_foot", "left_ankle", (0.0, -0.06, 0.12)),
    ("right_foot", "right_ankle", (0.0, -0.06, 0.12)),
    ("neck", "spine3", (0.0, 0.09, 0.0)),
    ("left_collar", "spine3", (0.07, 0.06, 0.0)),
    ("right_collar", "spine3", (-0.07, 0.06, 0.0)),
    ("head", "neck", (0.0, 0.11, 0.0)),
    ("left_shoulder", "left_collar", (0.10, 0.02, 0.0)),
    ("right_shoulder", "right_collar", (-0.10, 0.02, 0.0)),
    ("left_elbow", "left_shoulder", (0.26, 0.0, 0.0)),
    ("right_elbow", "right_shoulder", (-0.26, 0.0, 0.0)),
    ("left_wrist", "left_elbow", (0.25, 0.0, 0.0)),
    ("right_wrist", "right_elbow", (-0.25, 0.0, 0.0)),
    ("left_hand", "left_wrist", (0.08, 0.0, 0.0)),
    ("right_hand", "right_wrist", (-0.08, 0.0, 0.0)),
]

LIMB_JOINTS = {
    "left_hip", "right_hip", "left_knee", "right_knee", "left_ankle", "right_ankle",
    "left_foot", "right_foot", "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hand", "right_hand",
}
TORSO_JOINTS = {"spine1", "spine2", "spine3", "neck", "head", "left_collar", "right_collar"}

LIMB_GAIN = 0.02        # relative offset change per unit beta; keeps the
                        # sampled feature manifold dense enough for kernel inversion
TORSO_GAIN = 0.02
PERTURB_SCALE = 0.0005  # meters per unit beta for dims 2-9
PERTURB_SEED = 20240811

FEMALE_FACTOR = 0.94
MALE_FACTOR = 1.06


def build() -> dict:
    names = [j[0] for j in JOINTS]
    offsets = np.array([j[2] for j in JOINTS], dtype=np.float64)
    J = len(JOINTS)

    basis = np.zeros((J, 3, 10))
    for i, name in enumerate(names):
        if name in LIMB_JOINTS:
            basis[i, :, 0] = LIMB_GAIN * offsets[i]
        if name in TORSO_JOINTS:
            basis[i, :, 1] = TORSO_GAIN * offsets[i]
    rng = np.random.default_rng(PERTURB_SEED)
    basis[:, :, 2:] = rng.standard_normal((J, 3, 8)) * PERTURB_SCALE
    basis[0, :, :] = 0.0  # root offset stays pinned to the root position

    joints = []
    for name, parent, offset in JOINTS:
        joints.append({
            "name": name,
            "parent": parent,
            "offset": list(offset),
            "forward_axis": [0.0, 0.0, 1.0],
        })

    return {
        "version": 1,
        "name": "shapeik-default-24",
        "joints": joints,
        "shape_basis": basis.tolist(),
        "gender_variants": {
            "female": {"offsets": (offsets * FEMALE_FACTOR).tolist()},
            "male": {"offsets": (offsets * MALE_FACTOR).tolist()},
        },
    }


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "shapeik" / "data" / "default_skeleton.json"
    out.write_text(json.dumps(build(), indent=1))
    print(f"wrote {out}")
