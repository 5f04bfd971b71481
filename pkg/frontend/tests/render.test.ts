import { describe, expect, it } from "vitest";
import { OrbitCamera } from "../src/camera.js";
import { pickEffector, renderScene } from "../src/render.js";
import type { Draw2D } from "../src/render.js";
import type { PersonState, SkeletonJoint } from "../src/types.js";
import { neutralShape } from "../src/types.js";

const W = 800;
const H = 600;

interface Op {
  kind: "line" | "arcStroke" | "arcFill";
  lineWidth: number;
  style: string;
  r?: number;
}

class RecordingCtx implements Draw2D {
  strokeStyle = "";
  fillStyle = "";
  lineWidth = 1;
  ops: Op[] = [];
  private arcR: number | undefined;

  clearRect(): void {}
  beginPath(): void {
    this.arcR = undefined;
  }
  moveTo(): void {}
  lineTo(): void {}
  arc(_x: number, _y: number, r: number): void {
    this.arcR = r;
  }
  stroke(): void {
    this.ops.push({
      kind: this.arcR === undefined ? "line" : "arcStroke",
      lineWidth: this.lineWidth,
      style: this.strokeStyle,
      r: this.arcR,
    });
  }
  fill(): void {
    this.ops.push({
      kind: "arcFill",
      lineWidth: this.lineWidth,
      style: this.fillStyle,
      r: this.arcR,
    });
  }
}

/** 24-joint chain rig near the default camera target; every joint visible. */
function chainJoints(): SkeletonJoint[] {
  return Array.from({ length: 24 }, (_, i) => ({
    name: `j${i}`,
    parent: i === 0 ? null : `j${i - 1}`,
    offset: [0, 0.05, 0],
    forward_axis: [0, 0, 1],
  }));
}

function tPosePerson(): PersonState {
  return {
    shape: neutralShape(),
    effectors: [],
    pose: null,
    positions: Array.from({ length: 24 }, (_, i) => [
      (i % 4) * 0.1 - 0.15,
      0.4 + Math.floor(i / 4) * 0.12,
      0,
    ]),
  };
}

const GROUND_LINES = 10; // 5 + 5 grid lines at lineWidth 0.5

describe("renderScene", () => {
  it("draws 24 joints and 23 bones for a full-body rest pose", () => {
    const ctx = new RecordingCtx();
    renderScene(ctx, W, H, new OrbitCamera(), {
      persons: [tPosePerson()],
      selected: 0,
      joints: chainJoints(),
    });

    const joints = ctx.ops.filter((op) => op.kind === "arcFill" && op.r === 3);
    const bones = ctx.ops.filter((op) => op.kind === "line" && op.lineWidth > 1);
    expect(joints).toHaveLength(24);
    expect(bones).toHaveLength(23);
  });

  it("draws effector markers purple by default and recolors on request", () => {
    const person = tPosePerson();
    person.effectors.push({
      kind: "position",
      joint: 7,
      position: [0.1, 0.9, 0],
    });
    const view = { persons: [person], selected: 0, joints: chainJoints() };

    const ctx = new RecordingCtx();
    renderScene(ctx, W, H, new OrbitCamera(), view);
    const marker = ctx.ops.find((op) => op.kind === "arcFill" && op.r === 5);
    expect(marker?.style).toBe("#a855f7");

    const recolored = new RecordingCtx();
    renderScene(recolored, W, H, new OrbitCamera(), view, {
      effectorColor: "#ff0000",
    });
    const marker2 = recolored.ops.find((op) => op.kind === "arcFill" && op.r === 5);
    expect(marker2?.style).toBe("#ff0000");
  });

  it("draws a tether from a watching joint to its look-at target", () => {
    const person = tPosePerson();
    person.effectors.push({
      kind: "lookat",
      joint: 15,
      target: [0.4, 1.0, 0.5],
    });
    const ctx = new RecordingCtx();
    renderScene(ctx, W, H, new OrbitCamera(), {
      persons: [person],
      selected: 0,
      joints: chainJoints(),
    });

    const purple = ctx.ops.filter((op) => op.style === "#a855f7");
    expect(purple.some((op) => op.kind === "line")).toBe(true); // tether
    expect(purple.some((op) => op.kind === "arcFill" && op.r === 5)).toBe(true);
  });

  it("marks rotation effectors as rings around the joint", () => {
    const person = tPosePerson();
    person.effectors.push({ kind: "rotation", joint: 3, rotation: [1, 0, 0, 0] });
    const ctx = new RecordingCtx();
    renderScene(ctx, W, H, new OrbitCamera(), {
      persons: [person],
      selected: 0,
      joints: chainJoints(),
    });
    const ring = ctx.ops.find((op) => op.kind === "arcStroke" && op.r === 8);
    expect(ring?.style).toBe("#a855f7");
  });

  it("renders only the ground grid before the first solve arrives", () => {
    const ctx = new RecordingCtx();
    renderScene(ctx, W, H, new OrbitCamera(), {
      persons: [{ shape: neutralShape(), effectors: [], pose: null, positions: null }],
      selected: 0,
      joints: chainJoints(),
    });
    expect(ctx.ops).toHaveLength(GROUND_LINES);
    expect(ctx.ops.every((op) => op.kind === "line")).toBe(true);
  });
});

describe("pickEffector", () => {
  it("hits the marker under the cursor and misses elsewhere", () => {
    const cam = new OrbitCamera();
    const person = tPosePerson();
    person.effectors.push(
      { kind: "position", joint: 7, position: [0.1, 0.9, 0] },
      { kind: "position", joint: 20, position: [-0.2, 1.2, 0] },
    );
    const joints = chainJoints();

    const s = cam.project([-0.2, 1.2, 0], W, H)!;
    expect(pickEffector(cam, person, W, H, s[0] + 3, s[1] - 2)).toBe(1);
    expect(pickEffector(cam, person, W, H, s[0] + 200, s[1])).toBe(-1);
  });
});
