/** Orbit camera over a target point, plus the projection used by the canvas
 * renderer. Right-handed, y-up; azimuth 0 looks down -z.
 */

export type Vec3 = [number, number, number];

const EPS = 1e-9;

export class OrbitCamera {
  target: Vec3 = [0, 0.9, 0];
  radius = 3.5;
  azimuth = 0.5;
  /** clamped away from the poles so the view basis never degenerates */
  elevation = 0.25;
  fov = Math.PI / 4;
  near = 0.05;

  eye(): Vec3 {
    const ce = Math.cos(this.elevation);
    return [
      this.target[0] + this.radius * ce * Math.sin(this.azimuth),
      this.target[1] + this.radius * Math.sin(this.elevation),
      this.target[2] + this.radius * ce * Math.cos(this.azimuth),
    ];
  }

  orbit(dAzimuth: number, dElevation: number): void {
    this.azimuth = (this.azimuth + dAzimuth) % (2 * Math.PI);
    const limit = Math.PI / 2 - 0.05;
    this.elevation = clamp(this.elevation + dElevation, -limit, limit);
  }

  zoom(factor: number): void {
    this.radius = clamp(this.radius * factor, 0.2, 50);
  }

  pan(dxWorld: number, dyWorld: number): void {
    const [right, up] = this.basis();
    this.target = [
      this.target[0] + right[0] * dxWorld + up[0] * dyWorld,
      this.target[1] + right[1] * dxWorld + up[1] * dyWorld,
      this.target[2] + right[2] * dxWorld + up[2] * dyWorld,
    ];
  }

  /** camera-space right and up unit vectors */
  basis(): [Vec3, Vec3, Vec3] {
    const eye = this.eye();
    const fwd = normalize(sub(this.target, eye));
    const worldUp: Vec3 = [0, 1, 0];
    const right = normalize(cross(fwd, worldUp));
    const up = cross(right, fwd);
    return [right, up, fwd];
  }

  /**
   * World point -> [sx, sy, depth] in pixels, or null when behind the camera.
   * depth is distance along the view axis, usable for painter's sorting.
   */
  project(p: Vec3, width: number, height: number): [number, number, number] | null {
    const eye = this.eye();
    const [right, up, fwd] = this.basis();
    const d = sub(p, eye);
    const z = dot(d, fwd);
    if (z < this.near) {
      return null;
    }
    const f = height / 2 / Math.tan(this.fov / 2);
    const sx = width / 2 + (dot(d, right) / z) * f;
    const sy = height / 2 - (dot(d, up) / z) * f;
    return [sx, sy, z];
  }

  /**
   * Pixel delta -> world delta in the camera plane through `anchor`.
   * This is how effector drags map a mouse move onto a 3d point move.
   */
  unprojectDrag(
    anchor: Vec3,
    dxPx: number,
    dyPx: number,
    width: number,
    height: number,
  ): Vec3 {
    void width;
    const eye = this.eye();
    const [right, up, fwd] = this.basis();
    const z = Math.max(dot(sub(anchor, eye), fwd), this.near);
    const f = height / 2 / Math.tan(this.fov / 2);
    const wx = (dxPx * z) / f;
    const wy = (-dyPx * z) / f;
    return [
      anchor[0] + right[0] * wx + up[0] * wy,
      anchor[1] + right[1] * wx + up[1] * wy,
      anchor[2] + right[2] * wx + up[2] * wy,
    ];
  }
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  if (n < EPS) {
    return [0, 0, 1];
  }
  return [v[0] / n, v[1] / n, v[2] / n];
}
