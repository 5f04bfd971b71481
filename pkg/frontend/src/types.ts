/** Wire types mirroring the service's JSON formats. */

export type Gender = "female" | "male" | "neutral";

export interface ShapeWire {
  betas: number[];
  gender: Gender;
  scale: number;
}

export type EffectorKind = "position" | "rotation" | "lookat";

/** One constraint. The payload field depends on the kind:
 * position -> `position` [x,y,z], rotation -> `rotation` [w,x,y,z] unit
 * quaternion, lookat -> `target` [x,y,z]. */
export interface EffectorWire {
  kind: EffectorKind;
  joint: number;
  position?: number[];
  rotation?: number[];
  target?: number[];
  tolerance?: number;
}

export interface PoseWire {
  root: number[];
  rotations: number[][];
}

export interface SolveResponse {
  pose: PoseWire;
  positions: number[][];
  checkpoint_hash: string;
}

export interface RecoveryWire {
  effectors: EffectorWire[];
  error_trace: { step: number; effector: EffectorWire; error: number }[];
  terminated_by: string;
  empty_set_error: number;
  final_error: number;
  solve_calls: number;
  exhausted: boolean;
}

export interface BootstrapPersonWire {
  shape?: ShapeWire;
  pose?: PoseWire;
  positions?: number[][];
  recovery: RecoveryWire;
  used_user_character?: boolean;
}

export interface BootstrapResponse {
  persons: BootstrapPersonWire[];
  source: string;
  checkpoint_hash: string;
}

export interface SkeletonJoint {
  name: string;
  parent: string | null;
  offset: number[];
  forward_axis: number[];
}

export interface SkeletonResponse {
  template_id: string;
  template: { name: string; joints: SkeletonJoint[] };
  checkpoint_hash: string;
}

export interface HealthResponse {
  status: string;
  checkpoint_hash: string;
  backend: string;
}

/** What undo/redo snapshots and the renderer consume. */
export interface PersonState {
  shape: ShapeWire;
  effectors: EffectorWire[];
  pose: PoseWire | null;
  positions: number[][] | null;
}

export function neutralShape(): ShapeWire {
  return { betas: new Array(10).fill(0), gender: "neutral", scale: 1.0 };
}

export function clonePerson(p: PersonState): PersonState {
  return JSON.parse(JSON.stringify(p)) as PersonState;
}
