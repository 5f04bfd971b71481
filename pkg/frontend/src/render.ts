/** Canvas renderer. Draws against a structural subset of
 * CanvasRenderingContext2D so tests can count primitives without a DOM.
 */

import type { OrbitCamera, Vec3 } from "./camera.js";
import type { PersonState, SkeletonJoint } from "./types.js";

/** What we actually call on the 2d context. */
export interface Draw2D {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
}

export interface RenderOptions {
  boneColor?: string;
  jointColor?: string;
  /** effector markers; purple unless overridden */
  effectorColor?: string;
  selectedOutline?: string;
  background?: string;
}

const DEFAULTS: Required<RenderOptions> = {
  boneColor: "#94a3b8",
  jointColor: "#e2e8f0",
  effectorColor: "#a855f7",
  selectedOutline: "#38bdf8",
  background: "#0f172a",
};

export interface SceneView {
  persons: PersonState[];
  selected: number;
  joints: SkeletonJoint[];
}

export function renderScene(
  ctx: Draw2D,
  width: number,
  height: number,
  camera: OrbitCamera,
  view: SceneView,
  options: RenderOptions = {},
): void {
  const opts = { ...DEFAULTS, ...options };
  ctx.fillStyle = opts.background;
  ctx.clearRect(0, 0, width, height);
  drawGround(ctx, width, height, camera, opts.boneColor);
  view.persons.forEach((person, index) => {
    drawPerson(ctx, width, height, camera, view.joints, person, index === view.selected, opts);
  });
}

function drawPerson(
  ctx: Draw2D,
  width: number,
  height: number,
  camera: OrbitCamera,
  joints: SkeletonJoint[],
  person: PersonState,
  selected: boolean,
  opts: Required<RenderOptions>,
): void {
  const positions = person.positions;
  if (!positions) {
    return;
  }
  const screen = positions.map((p) => camera.project(p as unknown as Vec3, width, height));
  const indexByName = new Map(joints.map((joint, i) => [joint.name, i]));

  ctx.strokeStyle = selected ? opts.selectedOutline : opts.boneColor;
  ctx.lineWidth = selected ? 2 : 1.25;
  joints.forEach((joint, j) => {
    const parent = joint.parent === null ? -1 : indexByName.get(joint.parent) ?? -1;
    if (parent < 0) {
      return;
    }
    const a = screen[parent];
    const b = screen[j];
    if (!a || !b) {
      return;
    }
    ctx.beginPath();
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.stroke();
  });

  ctx.fillStyle = opts.jointColor;
  for (const s of screen) {
    if (!s) {
      continue;
    }
    ctx.beginPath();
    ctx.arc(s[0], s[1], 3, 0, 2 * Math.PI);
    ctx.fill();
  }

  drawEffectors(ctx, width, height, camera, person, opts);
}

function drawEffectors(
  ctx: Draw2D,
  width: number,
  height: number,
  camera: OrbitCamera,
  person: PersonState,
  opts: Required<RenderOptions>,
): void {
  ctx.strokeStyle = opts.effectorColor;
  ctx.fillStyle = opts.effectorColor;
  ctx.lineWidth = 1.5;
  for (const effector of person.effectors) {
    const anchor = effectorPoint(effector.kind, effector, person);
    if (!anchor) {
      continue;
    }
    const s = camera.project(anchor, width, height);
    if (!s) {
      continue;
    }
    if (effector.kind === "lookat") {
      // tether from the watching joint to its target
      const jointPos = person.positions?.[effector.joint];
      const js = jointPos
        ? camera.project(jointPos as unknown as Vec3, width, height)
        : null;
      if (js) {
        ctx.beginPath();
        ctx.moveTo(js[0], js[1]);
        ctx.lineTo(s[0], s[1]);
        ctx.stroke();
      }
    }
    ctx.beginPath();
    if (effector.kind === "rotation") {
      ctx.arc(s[0], s[1], 8, 0, 2 * Math.PI);
      ctx.stroke();
    } else {
      ctx.arc(s[0], s[1], 5, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

/** World anchor a given effector is manipulated at. */
export function effectorPoint(
  kind: string,
  effector: { position?: number[]; target?: number[]; joint: number },
  person: PersonState,
): Vec3 | null {
  if (kind === "position" && effector.position) {
    return effector.position as Vec3;
  }
  if (kind === "lookat" && effector.target) {
    return effector.target as Vec3;
  }
  if (kind === "rotation") {
    const pos = person.positions?.[effector.joint];
    return pos ? (pos as Vec3) : null;
  }
  return null;
}

/** Nearest effector marker within radiusPx of a screen point, or -1. */
export function pickEffector(
  camera: OrbitCamera,
  person: PersonState,
  width: number,
  height: number,
  sx: number,
  sy: number,
  radiusPx = 12,
): number {
  let best = -1;
  let bestDist = radiusPx;
  person.effectors.forEach((effector, i) => {
    const anchor = effectorPoint(effector.kind, effector, person);
    if (!anchor) {
      return;
    }
    const s = camera.project(anchor, width, height);
    if (!s) {
      return;
    }
    const d = Math.hypot(s[0] - sx, s[1] - sy);
    if (d <= bestDist) {
      best = i;
      bestDist = d;
    }
  });
  return best;
}

function drawGround(
  ctx: Draw2D,
  width: number,
  height: number,
  camera: OrbitCamera,
  color: string,
): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 0.5;
  const extent = 2;
  for (let i = -extent; i <= extent; i++) {
    line3(ctx, width, height, camera, [i, 0, -extent], [i, 0, extent]);
    line3(ctx, width, height, camera, [-extent, 0, i], [extent, 0, i]);
  }
}

function line3(
  ctx: Draw2D,
  width: number,
  height: number,
  camera: OrbitCamera,
  a: Vec3,
  b: Vec3,
): void {
  const pa = camera.project(a, width, height);
  const pb = camera.project(b, width, height);
  if (!pa || !pb) {
    return;
  }
  ctx.beginPath();
  ctx.moveTo(pa[0], pa[1]);
  ctx.lineTo(pb[0], pb[1]);
  ctx.stroke();
}
