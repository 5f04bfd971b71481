"""Command-line front end for every pipeline stage.

Exit codes: 0 success, 1 domain error (bad data, failed invariants,
unreadable artifacts), 2 usage error. All results print as JSON so runs can
be diffed and piped; identical seeds give identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import RecoveryExhaustedError, SchemaError, ShapeIKError
from .ik import TrainConfig, evaluate, load_model, mpjpe_by_effector_count, save_model, train
from .ik.effectors import IKInput
from .inversion import build_shape_bank, invert_shape, load_bank, save_bank
from .recovery import recover_effectors
from .retarget import JointMap, UserSkeleton, load_joint_map, user_rest_features
from .scene import export_scene, import_scene, scene_to_dict
from .service import (
    CONFIG_ENV,
    effector_set_from_wire,
    pose_from_wire,
    pose_to_wire,
    recovery_config_from_wire,
    recovery_to_wire,
    resolve_config,
    serve,
    shape_from_wire,
)
from .skeleton import default_template, load_skeleton


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _load_template(path):
    return default_template() if path is None else load_skeleton(path)


def _read_json_arg(path, what: str) -> dict:
    """JSON from a file path, or from stdin when the path is '-'."""
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as e:
        raise ShapeIKError(f"cannot read {what} from {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("", f"{what} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError("", f"{what} must be a JSON object")
    return data


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    template = _load_template(args.skeleton)
    overrides = {
        "dataset_size": args.dataset_size, "steps": args.steps,
        "batch_size": args.batch_size, "learning_rate": args.learning_rate,
        "lr_schedule": args.lr_schedule, "seed": args.seed,
        "token_dim": args.token_dim, "token_layers": args.token_layers,
        "decoder_width": args.decoder_width, "decoder_blocks": args.decoder_blocks,
        "eval_every": args.eval_every, "eval_size": args.eval_size,
        "beta_variance": args.beta_variance,
    }
    if args.no_beta_augment:
        overrides["beta_augment"] = False
    config = TrainConfig(**{k: v for k, v in overrides.items() if v is not None})
    model, trace = train(template, config)
    save_model(model, args.out, extra={"train_config": config.to_dict(),
                                       "final": trace[-1]})
    if args.trace_out:
        Path(args.trace_out).write_text(json.dumps(trace, indent=2))
    _emit({"checkpoint": str(args.out), "steps": config.steps,
           "template_id": template.template_id, "final": trace[-1]})
    return 0


def cmd_eval(args) -> int:
    template = _load_template(args.skeleton)
    model, extra, content_hash = load_model(args.checkpoint)
    if isinstance(extra, dict) and "train_config" in extra:
        config = TrainConfig.from_dict(extra["train_config"])
    else:
        config = TrainConfig()
    out = {"checkpoint_hash": content_hash, "seed": args.seed,
           "n_poses": args.poses,
           "metrics": evaluate(model, template, config,
                               n_poses=args.poses, seed=args.seed).to_dict()}
    if args.by_count:
        ks = tuple(int(k) for k in args.by_count.split(","))
        by = mpjpe_by_effector_count(model, template, config, ks=ks,
                                     n_poses=args.poses, seed=args.seed)
        out["median_mpjpe_by_effector_count"] = {str(k): v for k, v in by.items()}
    _emit(out)
    return 0


def cmd_solve(args) -> int:
    template = _load_template(args.skeleton)
    model, _, content_hash = load_model(args.checkpoint)
    body = _read_json_arg(args.input, "solve input")
    shape = shape_from_wire(body.get("shape", {}))
    effectors = effector_set_from_wire(body.get("effectors", []))
    effectors.check_joint_range(template.n_joints)
    pose = model.solve(IKInput(effectors=effectors, shape=shape), template)
    _emit({"pose": pose_to_wire(pose), "checkpoint_hash": content_hash})
    return 0


def cmd_invert_shape(args) -> int:
    bank = load_bank(args.bank)
    if args.features is not None:
        if len(args.features) != bank.features.shape[1]:
            raise SchemaError("features",
                              f"expected {bank.features.shape[1]} values, "
                              f"got {len(args.features)}")
        features = np.asarray(args.features, dtype=np.float64)
    elif args.skeleton is not None:
        if args.map is None:
            raise SchemaError("map", "--map is required with --skeleton")
        user = UserSkeleton(template=load_skeleton(args.skeleton),
                            joint_map=load_joint_map(args.map))
        features = user_rest_features(user)
    else:
        raise SchemaError("features", "provide --features or --skeleton/--map")
    estimate = invert_shape(bank, features)
    _emit({"betas": estimate.betas.tolist(), "scale": estimate.scale,
           "ess": estimate.effective_sample_size,
           "fallback": estimate.fallback_used})
    return 0


def cmd_recover(args) -> int:
    template = _load_template(args.skeleton)
    model, _, content_hash = load_model(args.checkpoint)
    body = _read_json_arg(args.input, "recover input")
    shape = shape_from_wire(body.get("shape", {}))
    pose = pose_from_wire(body.get("pose"), template.n_joints)
    config = recovery_config_from_wire(
        {k: v for k, v in (("max_effectors", args.max),
                           ("error_threshold", args.threshold)) if v is not None}
        or None, "")
    try:
        result = recover_effectors(model, template, shape, pose, config)
        exhausted = False
    except RecoveryExhaustedError as e:
        result, exhausted = e.result, True
    out = recovery_to_wire(result, exhausted)
    out["checkpoint_hash"] = content_hash
    _emit(out)
    return 0


def cmd_import_scene(args) -> int:
    scene = import_scene(args.scene)
    if args.out:
        export_scene(scene, args.out)
    _emit({"persons": len(scene.persons), "source": scene.source,
           "normalized": scene_to_dict(scene) if not args.out else str(args.out)})
    return 0


def cmd_build_bank(args) -> int:
    template = _load_template(args.skeleton)
    bank = build_shape_bank(template, size=args.size, seed=args.seed,
                            kernel_width=args.kernel_width)
    save_bank(bank, args.out)
    _emit({"bank": str(args.out), "size": bank.size,
           "kernel_width": bank.kernel_width, "seed": args.seed,
           "template_id": bank.template_id})
    return 0


def cmd_serve(args) -> int:
    config = resolve_config({
        "checkpoint_path": args.checkpoint, "bank_path": args.bank,
        "skeleton_path": args.skeleton, "host": args.host, "port": args.port,
        "max_request_bytes": args.max_request_bytes,
        "log_level": args.log_level,
    }, config_path=args.config)
    serve(config)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapeik",
        description="Shape-conditioned inverse kinematics toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_skeleton(p):
        p.add_argument("--skeleton", default=None,
                       help="skeleton JSON (default: bundled template)")

    p = sub.add_parser("train", help="train a pose decoder")
    add_skeleton(p)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--dataset-size", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--lr-schedule", choices=("constant", "cosine"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--token-dim", type=int, default=None)
    p.add_argument("--token-layers", type=int, default=None)
    p.add_argument("--decoder-width", type=int, default=None)
    p.add_argument("--decoder-blocks", type=int, default=None)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--eval-size", type=int, default=None)
    p.add_argument("--beta-variance", type=float, default=None)
    p.add_argument("--no-beta-augment", action="store_true")
    p.add_argument("--trace-out", default=None, help="write the full training trace JSON")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="held-out metrics for a checkpoint")
    add_skeleton(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--poses", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--by-count", default=None,
                   help="comma-separated effector counts for a median-MPJPE sweep")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("solve", help="solve one effector set to a pose")
    add_skeleton(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True,
                   help="JSON file with {shape, effectors}; '-' for stdin")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("invert-shape", help="shape parameters from bone features")
    p.add_argument("--bank", required=True)
    p.add_argument("--features", type=float, nargs="+", default=None)
    p.add_argument("--skeleton", default=None, help="user rig JSON")
    p.add_argument("--map", default=None, help="joint map JSON for the rig")
    p.set_defaults(fn=cmd_invert_shape)

    p = sub.add_parser("recover-effectors",
                       help="greedy effector set that preserves a pose")
    add_skeleton(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True,
                   help="JSON file with {shape, pose}; '-' for stdin")
    p.add_argument("--max", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(fn=cmd_recover)

    p = sub.add_parser("import-scene", help="validate and normalize a scene file")
    p.add_argument("scene")
    p.add_argument("--out", default=None, help="write the normalized scene here")
    p.set_defaults(fn=cmd_import_scene)

    p = sub.add_parser("build-bank", help="sample a shape bank for inversion")
    add_skeleton(p)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel-width", type=float, default=0.02)
    p.set_defaults(fn=cmd_build_bank)

    p = sub.add_parser("serve", help="run the JSON service")
    p.add_argument("--config", default=None,
                   help=f"service config JSON (or ${CONFIG_ENV})")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--bank", default=None)
    p.add_argument("--skeleton", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--max-request-bytes", type=int, default=None)
    p.add_argument("--log-level", default=None)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ShapeIKError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
