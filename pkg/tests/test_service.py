"""Live-server tests for the JSON service: contract, diagnostics,
determinism, and the request size limit."""

import hashlib
import json
import socket
import threading

import numpy as np
import pytest
import requests

from shapeik.errors import SchemaError
from shapeik.ik import Effector
from shapeik.rotations import matrix_to_quat
from shapeik.scene import scene_to_dict, Scene, PoseEstimate
from shapeik.service import (
    ServiceConfig,
    effector_from_wire,
    effector_to_wire,
    make_server,
    pose_from_wire,
    pose_to_wire,
    resolve_config,
    shape_from_wire,
)
from shapeik.skeleton import Pose, ShapeParams, sample_random_pose


def neutral_wire_shape():
    return {"betas": [0.0] * 10, "gender": "neutral", "scale": 1.0}


def wire_pose(template, seed=0):
    pose = sample_random_pose(template, np.random.default_rng(seed), limits=np.pi / 3)
    return pose_to_wire(pose)


def identity_scene(n_persons=1):
    person = {
        "betas": [0.0] * 10,
        "gender": "neutral",
        "root": [0.0, 0.0, 0.0],
        "rotations": [[1.0, 0.0, 0.0, 0.0]] * 24,
    }
    return {"version": 1, "source": "test", "persons": [dict(person) for _ in range(n_persons)]}


class TestConfig:
    def test_defaults_and_overrides(self, tmp_path, monkeypatch):
        cfg_file = tmp_path / "svc.json"
        cfg_file.write_text(json.dumps({
            "checkpoint_path": "/a", "bank_path": "/b", "port": 9000}))
        monkeypatch.delenv("SHAPEIK_SERVICE_CONFIG", raising=False)
        cfg = resolve_config({}, config_path=cfg_file)
        assert cfg.port == 9000 and cfg.checkpoint_path == "/a"
        cfg = resolve_config({"port": 9001}, config_path=cfg_file)
        assert cfg.port == 9001  # flags beat the file

    def test_env_var_supplies_config_path(self, tmp_path, monkeypatch):
        cfg_file = tmp_path / "svc.json"
        cfg_file.write_text(json.dumps({"checkpoint_path": "/a", "bank_path": "/b"}))
        monkeypatch.setenv("SHAPEIK_SERVICE_CONFIG", str(cfg_file))
        assert resolve_config({}).bank_path == "/b"

    def test_missing_required_field(self, monkeypatch):
        monkeypatch.delenv("SHAPEIK_SERVICE_CONFIG", raising=False)
        with pytest.raises(SchemaError, match="checkpoint_path"):
            resolve_config({"bank_path": "/b"})

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "svc.json"
        cfg_file.write_text(json.dumps({"checkpoint_path": "/a", "bank_path": "/b",
                                        "bogus": 1}))
        with pytest.raises(SchemaError, match="bogus"):
            resolve_config({}, config_path=cfg_file)


class TestWireFormats:
    def test_shape_round_trip(self):
        shape = shape_from_wire({"betas": list(range(10)), "gender": "male",
                                 "scale": 1.5})
        assert shape.gender == "male" and shape.scale == 1.5

    def test_shape_defaults(self):
        shape = shape_from_wire({})
        assert np.array_equal(shape.betas, np.zeros(10))
        assert shape.gender == "neutral" and shape.scale == 1.0

    def test_effector_rotation_round_trip(self, rng):
        from helpers import random_rotations

        R = random_rotations(rng)
        e = Effector(kind="rotation", joint=3, payload=R, tolerance=0.5)
        back = effector_from_wire(effector_to_wire(e), "effectors[0]")
        assert back.kind == "rotation" and back.joint == 3
        assert np.allclose(back.payload, R, atol=1e-12)
        assert back.tolerance == 0.5

    def test_effector_position_round_trip(self):
        e = Effector(kind="position", joint=9, payload=[0.1, 0.2, 0.3])
        back = effector_from_wire(effector_to_wire(e), "e")
        assert np.array_equal(back.payload, e.payload)

    def test_pose_round_trip(self, template, rng):
        pose = sample_random_pose(template, rng)
        back = pose_from_wire(pose_to_wire(pose), template.n_joints)
        assert np.allclose(back.rotations, pose.rotations, atol=1e-12)
        assert np.array_equal(back.root_position, pose.root_position)

    def test_bad_payload_field_has_path(self):
        with pytest.raises(SchemaError, match=r"effectors\[2\].target"):
            effector_from_wire({"kind": "lookat", "joint": 0}, "effectors[2]")


class TestEndpoints:
    def test_health(self, live_server, service_artifacts):
        r = requests.get(f"{live_server}/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        digest = hashlib.sha256(
            open(service_artifacts["checkpoint"], "rb").read()).hexdigest()
        assert body["checkpoint_hash"] == digest

    def test_cors_headers(self, live_server):
        r = requests.get(f"{live_server}/health")
        assert r.headers["Access-Control-Allow-Origin"] == "*"
        r = requests.options(f"{live_server}/solve")
        assert r.status_code == 204
        assert "POST" in r.headers["Access-Control-Allow-Methods"]

    def test_skeleton(self, live_server, template):
        body = requests.get(f"{live_server}/skeleton").json()
        assert body["template_id"] == template.template_id
        assert len(body["template"]["joints"]) == 24
        assert "checkpoint_hash" in body

    def test_solve_empty_effectors(self, live_server):
        r = requests.post(f"{live_server}/solve",
                          json={"shape": neutral_wire_shape(), "effectors": []})
        assert r.status_code == 200
        pose = r.json()["pose"]
        quats = np.asarray(pose["rotations"])
        assert quats.shape == (24, 4)
        assert np.allclose(np.linalg.norm(quats, axis=1), 1.0, atol=1e-6)
        assert len(pose["root"]) == 3
        # renderers draw from these; no client-side kinematics
        positions = np.asarray(r.json()["positions"])
        assert positions.shape == (24, 3)
        assert np.all(np.isfinite(positions))

    def test_solve_with_each_effector_kind(self, live_server, rng):
        from helpers import random_rotations

        quat = matrix_to_quat(random_rotations(rng)).tolist()
        body = {
            "shape": neutral_wire_shape(),
            "effectors": [
                {"kind": "position", "joint": 4, "position": [0.1, 0.4, 0.0]},
                {"kind": "rotation", "joint": 9, "rotation": quat, "tolerance": 0.2},
                {"kind": "lookat", "joint": 15, "target": [1.0, 1.0, 1.0]},
            ],
        }
        r = requests.post(f"{live_server}/solve", json=body)
        assert r.status_code == 200
        assert "checkpoint_hash" in r.json()

    def test_solve_is_deterministic_bytes(self, live_server):
        body = {"shape": neutral_wire_shape(),
                "effectors": [{"kind": "position", "joint": 7,
                               "position": [0.3, -0.2, 0.1]}]}
        a = requests.post(f"{live_server}/solve", json=body)
        b = requests.post(f"{live_server}/solve", json=body)
        assert a.content == b.content

    def test_solve_duplicate_effector_rejected(self, live_server):
        eff = {"kind": "position", "joint": 7, "position": [0.3, -0.2, 0.1]}
        r = requests.post(f"{live_server}/solve",
                          json={"shape": neutral_wire_shape(),
                                "effectors": [eff, dict(eff)]})
        assert r.status_code == 400
        err = r.json()["error"]
        assert err["type"] == "schema" and "duplicate" in err["message"]

    def test_solve_diagnostics_carry_field_paths(self, live_server):
        r = requests.post(f"{live_server}/solve", json={
            "shape": neutral_wire_shape(),
            "effectors": [{"kind": "teleport", "joint": 0}]})
        assert r.status_code == 400
        assert r.json()["error"]["path"] == "effectors[0].kind"

        r = requests.post(f"{live_server}/solve", json={
            "shape": {"betas": [0.0] * 3}, "effectors": []})
        assert r.status_code == 400
        assert r.json()["error"]["path"] == "shape.betas"

    def test_solve_out_of_range_joint(self, live_server):
        r = requests.post(f"{live_server}/solve", json={
            "shape": neutral_wire_shape(),
            "effectors": [{"kind": "position", "joint": 99,
                           "position": [0.0, 0.0, 0.0]}]})
        assert r.status_code == 400

    def test_invert_shape_features(self, live_server, small_bank):
        row = small_bank.features[10].tolist()
        r = requests.post(f"{live_server}/invert-shape", json={"features": row})
        assert r.status_code == 200
        body = r.json()
        assert len(body["betas"]) == 10
        assert body["scale"] > 0
        assert body["ess"] >= 1.0
        assert isinstance(body["fallback"], bool)

    def test_invert_shape_from_skeleton(self, live_server, template):
        body = {
            "skeleton": template.to_dict(),
            "map": {n: n for n in template.joint_names},
        }
        r = requests.post(f"{live_server}/invert-shape", json=body)
        assert r.status_code == 200
        assert np.all(np.isfinite(r.json()["betas"]))

    def test_invert_shape_needs_input(self, live_server):
        r = requests.post(f"{live_server}/invert-shape", json={})
        assert r.status_code == 400
        assert "features" in r.json()["error"]["message"]

    def test_invert_shape_wrong_feature_count(self, live_server):
        r = requests.post(f"{live_server}/invert-shape", json={"features": [1.0]})
        assert r.status_code == 400
        assert r.json()["error"]["path"] == "features"

    def test_recover_effectors(self, live_server, template):
        body = {"shape": neutral_wire_shape(), "pose": wire_pose(template),
                "max": 2, "threshold": 1e-9}
        r = requests.post(f"{live_server}/recover-effectors", json=body)
        assert r.status_code == 200
        out = r.json()
        assert len(out["effectors"]) == 2
        assert len(out["error_trace"]) == 2
        assert out["terminated_by"] == "max_count"
        assert out["exhausted"] is False
        assert out["solve_calls"] > 0
        assert out["final_error"] == out["error_trace"][-1]["error"]

    def test_recover_validates_pose(self, live_server):
        r = requests.post(f"{live_server}/recover-effectors", json={
            "shape": neutral_wire_shape(),
            "pose": {"root": [0, 0, 0], "rotations": [[1, 0, 0, 0]] * 5}})
        assert r.status_code == 400
        assert r.json()["error"]["path"] == "pose.rotations"

    def test_recover_validates_config(self, live_server, template):
        r = requests.post(f"{live_server}/recover-effectors", json={
            "shape": neutral_wire_shape(), "pose": wire_pose(template),
            "max": 0})
        assert r.status_code == 400

    def test_scene_bootstrap(self, live_server):
        r = requests.post(f"{live_server}/scene/bootstrap", json={
            "scene": identity_scene(n_persons=2),
            "recovery": {"max_effectors": 2, "error_threshold": 1e-9}})
        assert r.status_code == 200
        out = r.json()
        assert len(out["persons"]) == 2
        for person in out["persons"]:
            assert len(person["recovery"]["effectors"]) <= 2
            assert person["used_user_character"] is False
            assert len(person["pose"]["rotations"]) == 24
            assert np.asarray(person["positions"]).shape == (24, 3)

    def test_scene_bootstrap_with_character(self, live_server, template):
        r = requests.post(f"{live_server}/scene/bootstrap", json={
            "scene": identity_scene(),
            "character": {"skeleton": template.to_dict(),
                          "map": {n: n for n in template.joint_names}},
            "recovery": {"max_effectors": 1, "error_threshold": 1e-9}})
        assert r.status_code == 200
        out = r.json()
        assert out["persons"][0]["used_user_character"] is True

    def test_scene_bootstrap_schema_error(self, live_server):
        scene = identity_scene()
        scene["persons"][0]["rotations"] = scene["persons"][0]["rotations"][:23]
        r = requests.post(f"{live_server}/scene/bootstrap", json={"scene": scene})
        assert r.status_code == 400
        assert "person 0" in r.json()["error"]["message"]

    def test_unknown_endpoint(self, live_server):
        assert requests.get(f"{live_server}/nope").status_code == 404
        assert requests.post(f"{live_server}/nope", json={}).status_code == 404

    def test_invalid_json_body(self, live_server):
        r = requests.post(f"{live_server}/solve", data="{oops",
                          headers={"Content-Type": "application/json"})
        assert r.status_code == 400
        assert r.json()["error"]["type"] == "schema"

    def test_non_object_body(self, live_server):
        r = requests.post(f"{live_server}/solve", data="[1,2]",
                          headers={"Content-Type": "application/json"})
        assert r.status_code == 400

    def test_concurrent_solves_agree(self, live_server):
        body = {"shape": neutral_wire_shape(),
                "effectors": [{"kind": "position", "joint": 12,
                               "position": [0.0, 0.5, 0.2]}]}
        results = []

        def hit():
            results.append(requests.post(f"{live_server}/solve", json=body).content)

        threads = [threading.Thread(target=hit) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(set(results)) == 1


class TestRequestLimit:
    def test_oversized_request_rejected_before_parsing(self, service_artifacts):
        config = ServiceConfig(checkpoint_path=service_artifacts["checkpoint"],
                               bank_path=service_artifacts["bank"], port=0,
                               max_request_bytes=128)
        server = make_server(config)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            host, port = server.server_address[:2]
            url = f"http://{host}:{port}/solve"
            # NOT valid JSON: proves the limit fired before any parsing
            r = requests.post(url, data=b"x" * 4096,
                              headers={"Content-Type": "application/json"})
            assert r.status_code == 413
            small = requests.post(url, data=json.dumps(
                {"shape": {}, "effectors": []}).encode(),
                headers={"Content-Type": "application/json"})
            assert small.status_code == 200
        finally:
            server.shutdown()
            server.server_close()

    def test_missing_content_length(self, live_server):
        host, port = live_server.replace("http://", "").split(":")
        with socket.create_connection((host, int(port)), timeout=5) as sock:
            sock.sendall(b"POST /solve HTTP/1.1\r\nHost: t\r\n\r\n")
            data = sock.recv(4096).decode()
        assert "411" in data.splitlines()[0]
