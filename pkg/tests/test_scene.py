"""Tests for scene interchange (wire format, diagnostics, losslessness) and
the person bootstrap pipeline."""

import json

import numpy as np
import pytest

from helpers import random_rotations

from shapeik.errors import SchemaError, StructureError
from shapeik.recovery import RecoveryConfig
from shapeik.retarget import JointMap, UserSkeleton
from shapeik.rotations import matrix_to_quat
from shapeik.scene import (
    BootstrapResult,
    PoseEstimate,
    Scene,
    bootstrap_person,
    export_scene,
    import_scene,
    scene_from_dict,
    scene_to_dict,
)
from shapeik.skeleton import Pose, ShapeParams, sample_random_pose


def neutral_shape(betas=None, scale=1.0):
    b = np.zeros(10) if betas is None else np.asarray(betas, dtype=np.float64)
    return ShapeParams(betas=b, gender="neutral", scale=scale)


def identity_person_dict(n_joints=24, **overrides):
    rec = {
        "betas": [0.0] * 10,
        "gender": "neutral",
        "scale": 1.0,
        "root": [0.0, 0.0, 0.0],
        "rotations": [[1.0, 0.0, 0.0, 0.0] for _ in range(n_joints)],
    }
    rec.update(overrides)
    return rec


def scene_dict(*persons, version=1, source="unit"):
    return {"version": version, "source": source, "persons": list(persons)}


def random_estimate(template, rng, seed_pose=0):
    pose = sample_random_pose(template, np.random.default_rng(seed_pose))
    shape = neutral_shape(betas=rng.normal(size=10) * 0.5)
    return PoseEstimate.from_pose(shape, pose)


class TestPoseEstimate:
    def test_round_trips_through_pose(self, template, rng):
        pose = sample_random_pose(template, rng)
        est = PoseEstimate.from_pose(neutral_shape(), pose)
        back = est.pose
        assert np.allclose(back.rotations, pose.rotations, atol=1e-12)
        assert np.array_equal(back.root_position, pose.root_position)

    def test_rejects_non_unit_quaternions(self):
        quats = np.tile([2.0, 0.0, 0.0, 0.0], (24, 1))
        with pytest.raises(StructureError, match="unit"):
            PoseEstimate(shape=neutral_shape(), root=np.zeros(3), quaternions=quats)

    def test_rejects_bad_root(self):
        quats = np.tile([1.0, 0.0, 0.0, 0.0], (24, 1))
        with pytest.raises(StructureError, match="root"):
            PoseEstimate(shape=neutral_shape(), root=np.zeros(2), quaternions=quats)

    def test_arrays_read_only(self):
        quats = np.tile([1.0, 0.0, 0.0, 0.0], (24, 1))
        est = PoseEstimate(shape=neutral_shape(), root=np.zeros(3), quaternions=quats)
        with pytest.raises(ValueError):
            est.quaternions[0, 0] = 0.5


class TestSceneParsing:
    def test_identity_rotations_give_rest_pose(self):
        scene = scene_from_dict(scene_dict(identity_person_dict()))
        pose = scene.persons[0].pose
        assert np.array_equal(pose.rotations,
                              np.broadcast_to(np.eye(3), (24, 3, 3)))

    def test_scale_defaults_to_one(self):
        rec = identity_person_dict()
        del rec["scale"]
        scene = scene_from_dict(scene_dict(rec))
        assert scene.persons[0].shape.scale == 1.0

    def test_slightly_off_quaternion_renormalized(self):
        rec = identity_person_dict()
        rec["rotations"][3] = [0.9999, 0.0, 0.0, 0.0]
        scene = scene_from_dict(scene_dict(rec))
        assert np.array_equal(scene.persons[0].quaternions[3], [1.0, 0.0, 0.0, 0.0])

    def test_wildly_off_quaternion_rejected(self):
        rec = identity_person_dict()
        rec["rotations"][5] = [0.5, 0.0, 0.0, 0.0]
        with pytest.raises(SchemaError, match=r"persons\[0\].rotations\[5\]"):
            scene_from_dict(scene_dict(rec))

    def test_wrong_rotation_count_names_person(self):
        rec = identity_person_dict()
        rec["rotations"] = rec["rotations"][:23]
        with pytest.raises(SchemaError, match="person 0: expected 24 rotations, got 23"):
            scene_from_dict(scene_dict(rec))

    def test_wrong_version_rejected(self):
        with pytest.raises(SchemaError, match="version"):
            scene_from_dict(scene_dict(identity_person_dict(), version=2))

    def test_missing_fields_give_paths(self):
        for field in ("betas", "gender", "root", "rotations"):
            rec = identity_person_dict()
            del rec[field]
            with pytest.raises(SchemaError, match=rf"persons\[0\].{field}"):
                scene_from_dict(scene_dict(rec))

    def test_second_person_indexed(self):
        bad = identity_person_dict(gender="robot")
        with pytest.raises(SchemaError, match=r"persons\[1\].gender"):
            scene_from_dict(scene_dict(identity_person_dict(), bad))

    def test_bad_scale_rejected(self):
        with pytest.raises(SchemaError, match=r"persons\[0\].scale"):
            scene_from_dict(scene_dict(identity_person_dict(scale=-1.0)))

    def test_bad_betas_rejected(self):
        with pytest.raises(SchemaError, match=r"persons\[0\].betas"):
            scene_from_dict(scene_dict(identity_person_dict(betas=[0.0] * 3)))

    def test_bad_quaternion_shape_rejected(self):
        rec = identity_person_dict()
        rec["rotations"][7] = [1.0, 0.0]
        with pytest.raises(SchemaError, match=r"persons\[0\].rotations\[7\]"):
            scene_from_dict(scene_dict(rec))

    def test_non_finite_quaternion_rejected(self):
        rec = identity_person_dict()
        rec["rotations"][2] = [None, 0.0, 0.0, 0.0]
        with pytest.raises(SchemaError):
            scene_from_dict(scene_dict(rec))

    def test_persons_must_be_list(self):
        with pytest.raises(SchemaError, match="persons"):
            scene_from_dict({"version": 1, "persons": "nope"})

    def test_non_json_file(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{oops")
        with pytest.raises(SchemaError, match="JSON"):
            import_scene(p)


class TestSceneRoundTrip:
    def test_dict_round_trip_is_bitwise(self, template, rng):
        persons = tuple(random_estimate(template, rng, seed_pose=i) for i in range(3))
        scene = Scene(persons=persons, source="synthetic")
        back = scene_from_dict(scene_to_dict(scene))
        assert back.source == "synthetic"
        for a, b in zip(scene.persons, back.persons):
            assert np.array_equal(a.quaternions, b.quaternions)
            assert np.array_equal(a.root, b.root)
            assert np.array_equal(a.shape.betas, b.shape.betas)
            assert a.shape.gender == b.shape.gender
            assert a.shape.scale == b.shape.scale

    def test_file_round_trip_is_byte_stable(self, template, rng, tmp_path):
        scene = Scene(persons=(random_estimate(template, rng),), source="file")
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        export_scene(scene, p1)
        export_scene(import_scene(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_renormalization_idempotent(self):
        rec = identity_person_dict()
        rec["rotations"][3] = [0.9999, 0.0, 0.0, 0.0]
        first = scene_from_dict(scene_dict(rec))
        second = scene_from_dict(scene_to_dict(first))
        assert np.array_equal(first.persons[0].quaternions,
                              second.persons[0].quaternions)

    def test_scene_requires_pose_estimates(self):
        with pytest.raises(StructureError, match="PoseEstimate"):
            Scene(persons=("nope",))


class TestBootstrap:
    def test_passthrough_without_user_character(self, toy_model, template,
                                                small_bank, rng):
        model, _, _ = toy_model
        person = random_estimate(template, rng, seed_pose=12)
        result = bootstrap_person(person, None, model, small_bank, template,
                                  RecoveryConfig(max_effectors=2,
                                                 error_threshold=1e-9))
        assert not result.used_user_character
        assert result.shape is person.shape
        assert np.allclose(result.pose.rotations, person.pose.rotations)
        assert len(result.recovery.effectors) <= 2
        assert len(result.recovery.error_trace) == len(result.recovery.effectors)

    def test_user_character_path(self, toy_model, template, small_bank, rng):
        model, _, _ = toy_model
        person = random_estimate(template, rng, seed_pose=13)
        user = UserSkeleton(
            template=template,
            joint_map=JointMap({n: n for n in template.joint_names}),
        )
        result = bootstrap_person(person, user, model, small_bank, template,
                                  RecoveryConfig(max_effectors=2,
                                                 error_threshold=1e-9))
        assert result.used_user_character
        assert result.shape.gender == "neutral"
        # retarget keeps the local rotations; only the root is rescaled
        assert np.allclose(result.pose.rotations, person.pose.rotations,
                           atol=1e-12)

    def test_bootstrap_deterministic(self, toy_model, template, small_bank, rng):
        model, _, _ = toy_model
        person = random_estimate(template, rng, seed_pose=14)
        cfg = RecoveryConfig(max_effectors=2, error_threshold=1e-9)
        a = bootstrap_person(person, None, model, small_bank, template, cfg)
        b = bootstrap_person(person, None, model, small_bank, template, cfg)
        assert [(e.kind, e.joint) for e in a.recovery.effectors] == \
               [(e.kind, e.joint) for e in b.recovery.effectors]
        assert a.recovery.final_error == b.recovery.final_error
