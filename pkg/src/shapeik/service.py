"""Stateless JSON-over-HTTP service exposing the solver pipeline.

All artifacts (skeleton, model checkpoint, shape bank) load once at startup
and are shared read-only across request threads; every response carries the
checkpoint content hash so clients can detect a swapped model. Rotations
travel as [w, x, y, z] unit quaternions, matching the scene file format.

Endpoints:
  GET  /health            -> {"status": "ok", "checkpoint_hash"}
  GET  /skeleton          -> {"template", "template_id", "checkpoint_hash"}
  POST /solve             {"shape", "effectors": [...]} -> {"pose"}
  POST /invert-shape      {"features": [6]} | {"skeleton", "map"}
                          -> {"betas", "scale", "ess", "fallback"}
  POST /recover-effectors {"shape", "pose", "max"?, "threshold"?}
                          -> recovery record
  POST /scene/bootstrap   {"scene", "character"?, "recovery"?}
                          -> {"persons": [...]}
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .binio import canonical_json
from .errors import (
    RecoveryExhaustedError,
    SchemaError,
    ShapeIKError,
    StructureError,
)
from .ik.effectors import Effector, EffectorSet, IKInput
from .ik.model import load_model
from .inversion import N_FEATURES, invert_shape, load_bank
from .recovery import RecoveryConfig, RecoveryResult, recover_effectors
from .retarget import JointMap, UserSkeleton, user_rest_features
from .rotations import QUAT_NORM_TOLERANCE, matrix_to_quat, normalize_quat, quat_to_matrix
from .scene import bootstrap_person, scene_from_dict
from .skeleton import (
    GENDERS,
    N_BETAS,
    Pose,
    ShapeParams,
    default_template,
    forward_kinematics,
    load_skeleton,
    template_from_dict,
)

CONFIG_ENV = "SHAPEIK_SERVICE_CONFIG"

log = logging.getLogger("shapeik.service")


@dataclass(frozen=True)
class ServiceConfig:
    checkpoint_path: str
    bank_path: str
    skeleton_path: str | None = None   # None -> bundled default template
    host: str = "127.0.0.1"
    port: int = 8080
    max_request_bytes: int = 1 << 20
    log_level: str = "INFO"

    def __post_init__(self):
        if self.max_request_bytes < 1:
            raise StructureError("max_request_bytes must be positive")
        if not (0 <= self.port <= 65535):
            raise StructureError(f"port must lie in [0, 65535], got {self.port}")


_CONFIG_FIELDS = ("checkpoint_path", "bank_path", "skeleton_path", "host",
                  "port", "max_request_bytes", "log_level")


def config_from_file(path) -> dict:
    """Raw config values from a JSON file; unknown keys are rejected."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError("", f"service config is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError("", "service config must be a JSON object")
    for key in data:
        if key not in _CONFIG_FIELDS:
            raise SchemaError(key, "unknown service config field")
    return data


def resolve_config(overrides: dict, config_path=None) -> ServiceConfig:
    """Defaults <- config file (explicit path or $SHAPEIK_SERVICE_CONFIG)
    <- non-None overrides."""
    values: dict = {}
    path = config_path or os.environ.get(CONFIG_ENV)
    if path:
        values.update(config_from_file(path))
    values.update({k: v for k, v in overrides.items() if v is not None})
    for required in ("checkpoint_path", "bank_path"):
        if not values.get(required):
            raise SchemaError(required, "required to start the service")
    return ServiceConfig(**values)


@dataclass(frozen=True)
class ServiceState:
    """Artifacts frozen at startup and shared across request handlers."""

    config: ServiceConfig
    template: object
    model: object
    bank: object
    checkpoint_hash: str


def load_state(config: ServiceConfig) -> ServiceState:
    template = (default_template() if config.skeleton_path is None
                else load_skeleton(config.skeleton_path))
    model, _, checkpoint_hash = load_model(config.checkpoint_path)
    if model.template_id != template.template_id:
        raise StructureError(
            f"checkpoint was trained for template '{model.template_id}', "
            f"service skeleton is '{template.template_id}'")
    bank = load_bank(config.bank_path)
    return ServiceState(config=config, template=template, model=model,
                        bank=bank, checkpoint_hash=checkpoint_hash)


# ---------------------------------------------------------------------------
# wire conversions (shared with the CLI)


def _number(value, path, *, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, "must be a number")
    value = float(value)
    if not np.isfinite(value):
        raise SchemaError(path, "must be finite")
    if positive and value <= 0:
        raise SchemaError(path, "must be positive")
    return value


def _vector(value, n, path):
    if not (isinstance(value, list) and len(value) == n):
        raise SchemaError(path, f"must be a list of {n} numbers")
    return np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])


def shape_from_wire(rec, path="shape") -> ShapeParams:
    if not isinstance(rec, dict):
        raise SchemaError(path, "must be an object")
    betas = _vector(rec.get("betas", [0.0] * N_BETAS), N_BETAS, f"{path}.betas")
    gender = rec.get("gender", "neutral")
    if gender not in GENDERS:
        raise SchemaError(f"{path}.gender", f"must be one of {list(GENDERS)}")
    scale = _number(rec.get("scale", 1.0), f"{path}.scale", positive=True)
    return ShapeParams(betas=betas, gender=gender, scale=scale)


def shape_to_wire(shape: ShapeParams) -> dict:
    return {"betas": shape.betas.tolist(), "gender": shape.gender,
            "scale": shape.scale}


def quat_from_wire(value, path) -> np.ndarray:
    q = _vector(value, 4, path)
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > QUAT_NORM_TOLERANCE:
        raise SchemaError(path, f"quaternion norm {norm:.4f} too far from 1")
    return normalize_quat(q)


_PAYLOAD_FIELDS = {"position": "position", "rotation": "rotation", "lookat": "target"}


def effector_from_wire(rec, path) -> Effector:
    if not isinstance(rec, dict):
        raise SchemaError(path, "must be an object")
    kind = rec.get("kind")
    if kind not in _PAYLOAD_FIELDS:
        raise SchemaError(f"{path}.kind",
                          f"must be one of {sorted(_PAYLOAD_FIELDS)}")
    joint = rec.get("joint")
    if isinstance(joint, bool) or not isinstance(joint, int):
        raise SchemaError(f"{path}.joint", "must be an integer joint index")
    field = _PAYLOAD_FIELDS[kind]
    if field not in rec:
        raise SchemaError(f"{path}.{field}", f"required for kind '{kind}'")
    if kind == "rotation":
        payload = quat_to_matrix(quat_from_wire(rec[field], f"{path}.{field}"))
    else:
        payload = _vector(rec[field], 3, f"{path}.{field}")
    tolerance = _number(rec.get("tolerance", 0.0), f"{path}.tolerance")
    try:
        return Effector(kind=kind, joint=joint, payload=payload, tolerance=tolerance)
    except StructureError as e:
        raise SchemaError(path, str(e)) from e


def effector_to_wire(e: Effector) -> dict:
    rec = {"kind": e.kind, "joint": e.joint, "tolerance": e.tolerance}
    if e.kind == "rotation":
        rec["rotation"] = matrix_to_quat(e.payload).tolist()
    else:
        rec[_PAYLOAD_FIELDS[e.kind]] = e.payload.tolist()
    return rec


def effector_set_from_wire(value, path="effectors") -> EffectorSet:
    if not isinstance(value, list):
        raise SchemaError(path, "must be a list of effector records")
    effectors = tuple(effector_from_wire(rec, f"{path}[{i}]")
                      for i, rec in enumerate(value))
    try:
        return EffectorSet(effectors)
    except StructureError as e:
        raise SchemaError(path, str(e)) from e


def pose_to_wire(pose: Pose) -> dict:
    return {"root": pose.root_position.tolist(),
            "rotations": matrix_to_quat(pose.rotations).tolist()}


def pose_from_wire(rec, n_joints, path="pose") -> Pose:
    if not isinstance(rec, dict):
        raise SchemaError(path, "must be an object")
    root = _vector(rec.get("root", [0.0] * 3), 3, f"{path}.root")
    rots = rec.get("rotations")
    if not (isinstance(rots, list) and len(rots) == n_joints):
        raise SchemaError(f"{path}.rotations", f"must be a list of {n_joints} quaternions")
    quats = np.stack([quat_from_wire(q, f"{path}.rotations[{j}]")
                      for j, q in enumerate(rots)])
    return Pose(root_position=root, rotations=quat_to_matrix(quats))


def recovery_to_wire(result: RecoveryResult, exhausted: bool = False) -> dict:
    return {
        "effectors": [effector_to_wire(e) for e in result.effectors],
        "error_trace": [
            {"step": step, "effector": effector_to_wire(e), "error": err}
            for step, e, err in result.error_trace
        ],
        "terminated_by": result.terminated_by,
        "empty_set_error": result.empty_set_error,
        "final_error": result.final_error,
        "solve_calls": result.solve_calls,
        "exhausted": exhausted,
    }


def recovery_config_from_wire(rec, path, **renames) -> RecoveryConfig:
    if rec is None:
        return RecoveryConfig()
    if not isinstance(rec, dict):
        raise SchemaError(path, "must be an object")
    kwargs = {}
    max_key = renames.get("max_key", "max_effectors")
    thr_key = renames.get("threshold_key", "error_threshold")
    if max_key in rec:
        v = rec[max_key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"{path}.{max_key}", "must be an integer")
        kwargs["max_effectors"] = v
    if thr_key in rec:
        kwargs["error_threshold"] = _number(rec[thr_key], f"{path}.{thr_key}")
    try:
        return RecoveryConfig(**kwargs)
    except StructureError as e:
        raise SchemaError(path, str(e)) from e


# ---------------------------------------------------------------------------
# endpoint logic (pure functions of (state, body))


def handle_health(state: ServiceState) -> dict:
    from .backend import ACTIVE_BACKEND

    return {"status": "ok", "checkpoint_hash": state.checkpoint_hash,
            "backend": ACTIVE_BACKEND}


def handle_skeleton(state: ServiceState) -> dict:
    return {
        "template": state.template.to_dict(),
        "template_id": state.template.template_id,
        "checkpoint_hash": state.checkpoint_hash,
    }


def handle_solve(state: ServiceState, body: dict) -> dict:
    shape = shape_from_wire(body.get("shape", {}))
    effectors = effector_set_from_wire(body.get("effectors", []))
    try:
        effectors.check_joint_range(state.template.n_joints)
    except StructureError as e:
        raise SchemaError("effectors", str(e)) from e
    pose = state.model.solve(IKInput(effectors=effectors, shape=shape), state.template)
    # world joint positions ride along so clients never run kinematics locally
    positions = forward_kinematics(state.template, shape, pose)
    return {"pose": pose_to_wire(pose), "positions": positions.tolist(),
            "checkpoint_hash": state.checkpoint_hash}


def handle_invert_shape(state: ServiceState, body: dict) -> dict:
    if "features" in body:
        features = _vector(body["features"], N_FEATURES, "features")
        estimate = invert_shape(state.bank, features)
    elif "skeleton" in body:
        if not isinstance(body["skeleton"], dict):
            raise SchemaError("skeleton", "must be a skeleton JSON object")
        mapping = body.get("map")
        if not isinstance(mapping, dict):
            raise SchemaError("map", "required with 'skeleton': user->canonical joint names")
        template = template_from_dict(body["skeleton"], source="request")
        user = UserSkeleton(template=template, joint_map=JointMap(mapping))
        estimate = invert_shape(state.bank, user_rest_features(user))
    else:
        raise SchemaError("", "body needs either 'features' or 'skeleton' + 'map'")
    return {
        "betas": estimate.betas.tolist(),
        "scale": estimate.scale,
        "ess": estimate.effective_sample_size,
        "fallback": estimate.fallback_used,
        "checkpoint_hash": state.checkpoint_hash,
    }


def handle_recover(state: ServiceState, body: dict) -> dict:
    shape = shape_from_wire(body.get("shape", {}))
    pose = pose_from_wire(body.get("pose"), state.template.n_joints)
    config = recovery_config_from_wire(
        {k: body[k] for k in ("max", "threshold") if k in body} or None,
        "", max_key="max", threshold_key="threshold")
    try:
        result = recover_effectors(state.model, state.template, shape, pose, config)
        exhausted = False
    except RecoveryExhaustedError as e:
        result, exhausted = e.result, True
    out = recovery_to_wire(result, exhausted)
    out["checkpoint_hash"] = state.checkpoint_hash
    return out


def handle_bootstrap(state: ServiceState, body: dict) -> dict:
    scene = scene_from_dict(body.get("scene"), state.template.n_joints)
    user = None
    character = body.get("character")
    if character is not None:
        if not isinstance(character, dict) or "skeleton" not in character:
            raise SchemaError("character", "must be an object with 'skeleton' and 'map'")
        mapping = character.get("map")
        if not isinstance(mapping, dict):
            raise SchemaError("character.map", "required: user->canonical joint names")
        template = template_from_dict(character["skeleton"], source="request")
        user = UserSkeleton(template=template, joint_map=JointMap(mapping))
    config = recovery_config_from_wire(body.get("recovery"), "recovery")
    persons = []
    for person in scene.persons:
        try:
            result = bootstrap_person(person, user, state.model, state.bank,
                                      state.template, config)
            recovery = recovery_to_wire(result.recovery)
        except RecoveryExhaustedError as e:
            # keep the best effector set found; the client sees the flag
            result = None
            recovery = recovery_to_wire(e.result, exhausted=True)
        if result is not None:
            positions = forward_kinematics(state.template, result.shape, result.pose)
            persons.append({
                "shape": shape_to_wire(result.shape),
                "pose": pose_to_wire(result.pose),
                "positions": positions.tolist(),
                "recovery": recovery,
                "used_user_character": result.used_user_character,
            })
        else:
            persons.append({"recovery": recovery})
    return {
        "persons": persons,
        "source": scene.source,
        "checkpoint_hash": state.checkpoint_hash,
    }


# ---------------------------------------------------------------------------
# HTTP plumbing


_GET_ROUTES = {
    "/health": handle_health,
    "/skeleton": handle_skeleton,
}
_POST_ROUTES = {
    "/solve": handle_solve,
    "/invert-shape": handle_invert_shape,
    "/recover-effectors": handle_recover,
    "/scene/bootstrap": handle_bootstrap,
}


class _Handler(BaseHTTPRequestHandler):
    server_version = "shapeik"
    protocol_version = "HTTP/1.1"

    @property
    def state(self) -> ServiceState:
        return self.server.state  # type: ignore[attr-defined]

    # -- responses -----------------------------------------------------------

    def _send(self, code: int, obj: dict) -> None:
        body = canonical_json(obj).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, code: int, kind: str, path: str, message: str) -> None:
        self._send(code, {"error": {"type": kind, "path": path, "message": message}})

    # -- request body --------------------------------------------------------

    def _read_json(self):
        length = self.headers.get("Content-Length")
        if length is None:
            self.close_connection = True
            self._send_error(411, "protocol", "", "Content-Length required")
            return None
        try:
            n = int(length)
        except ValueError:
            self.close_connection = True
            self._send_error(400, "protocol", "", "malformed Content-Length")
            return None
        # enforced before any parsing work happens; the unread body forces
        # the connection closed so it cannot masquerade as a next request
        if n > self.state.config.max_request_bytes:
            self.close_connection = True
            self._send_error(413, "protocol", "",
                             f"request of {n} bytes exceeds the "
                             f"{self.state.config.max_request_bytes} byte limit")
            return None
        raw = self.rfile.read(n)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as e:
            self._send_error(400, "schema", "", f"body is not valid JSON: {e}")
            return None
        if not isinstance(body, dict):
            self._send_error(400, "schema", "", "body must be a JSON object")
            return None
        return body

    # -- verbs ---------------------------------------------------------------

    def do_GET(self):
        handler = _GET_ROUTES.get(self.path)
        if handler is None:
            self._send_error(404, "protocol", "", f"unknown endpoint {self.path}")
            return
        self._run(lambda: handler(self.state))

    def do_POST(self):
        handler = _POST_ROUTES.get(self.path)
        if handler is None:
            self._send_error(404, "protocol", "", f"unknown endpoint {self.path}")
            return
        body = self._read_json()
        if body is None:
            return
        self._run(lambda: handler(self.state, body))

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _run(self, fn) -> None:
        try:
            self._send(200, fn())
        except SchemaError as e:
            self._send_error(400, "schema", e.path, str(e))
        except ShapeIKError as e:
            self._send_error(400, "domain", "", str(e))
        except Exception as e:  # never crash the worker thread
            log.exception("unhandled error serving %s", self.path)
            self._send_error(500, "internal", "", f"{type(e).__name__}")

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)


def make_server(config: ServiceConfig) -> ThreadingHTTPServer:
    """Loads artifacts and binds the socket; caller decides when to serve."""
    state = load_state(config)
    server = ThreadingHTTPServer((config.host, config.port), _Handler)
    server.state = state  # type: ignore[attr-defined]
    return server


def serve(config: ServiceConfig) -> None:
    logging.basicConfig(level=getattr(logging, config.log_level.upper(), logging.INFO))
    server = make_server(config)
    host, port = server.server_address[:2]
    log.info("serving on http://%s:%s (checkpoint %s)", host, port,
             server.state.checkpoint_hash[:12])  # type: ignore[attr-defined]
    try:
        server.serve_forever()
    finally:
        server.server_close()
