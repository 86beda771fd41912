/** Turntable orbit around an extracted object's centroid.
 *
 * Cameras are world-to-camera: a pose (R, t) places the camera center
 * at p = -R^T t. Orbiting by angle a about a world axis through the
 * centroid c applies the rotation Q to the camera as a rigid body:
 *
 *   p' = Q (p - c) + c      R' = R Q^T      t' = -R' p'
 *
 * At a = 0, Q is the exact identity and the pose is returned bitwise
 * unchanged, so the zero position of an orbit slider reproduces the
 * original view exactly.
 */

import type { Pose } from "./api.js";

export type Vec3 = [number, number, number];

/** Row-major 3x3 matrix product a b. */
export function matMul(a: number[], b: number[]): number[] {
  const out = new Array<number>(9).fill(0);
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      let s = 0;
      for (let k = 0; k < 3; k++) s += (a[3 * i + k] ?? 0) * (b[3 * k + j] ?? 0);
      out[3 * i + j] = s;
    }
  }
  return out;
}

export function transpose(a: number[]): number[] {
  const out = new Array<number>(9).fill(0);
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) out[3 * i + j] = a[3 * j + i] ?? 0;
  }
  return out;
}

export function matVec(a: number[], v: Vec3): Vec3 {
  return [
    (a[0] ?? 0) * v[0] + (a[1] ?? 0) * v[1] + (a[2] ?? 0) * v[2],
    (a[3] ?? 0) * v[0] + (a[4] ?? 0) * v[1] + (a[5] ?? 0) * v[2],
    (a[6] ?? 0) * v[0] + (a[7] ?? 0) * v[1] + (a[8] ?? 0) * v[2],
  ];
}

/** Rodrigues rotation about a (normalized internally) axis. */
export function axisAngle(axis: Vec3, angle: number): number[] {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  if (n === 0) throw new Error("orbit axis must be nonzero");
  const [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const k = 1 - c;
  return [
    c + x * x * k, x * y * k - z * s, x * z * k + y * s,
    y * x * k + z * s, c + y * y * k, y * z * k - x * s,
    z * x * k - y * s, z * y * k + x * s, c + z * z * k,
  ];
}

export const WORLD_UP: Vec3 = [0, 1, 0];

export function cameraCenter(pose: Pose): Vec3 {
  const rt = transpose(pose.rotation);
  const t = pose.translation;
  const mt = matVec(rt, [t[0] ?? 0, t[1] ?? 0, t[2] ?? 0]);
  return [-mt[0], -mt[1], -mt[2]];
}

/**
 * Pose after orbiting `angle` radians about `axis` through `centroid`.
 * angle 0 returns the input pose values unchanged.
 */
export function orbitPose(
  base: Pose,
  centroid: Vec3,
  angle: number,
  axis: Vec3 = WORLD_UP,
): Pose {
  if (angle === 0) {
    return { rotation: [...base.rotation], translation: [...base.translation] };
  }
  const q = axisAngle(axis, angle);
  const p = cameraCenter(base);
  const rel: Vec3 = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
  const moved = matVec(q, rel);
  const pNew: Vec3 = [moved[0] + centroid[0], moved[1] + centroid[1], moved[2] + centroid[2]];
  const rNew = matMul(base.rotation, transpose(q));
  const tNew = matVec(rNew, pNew);
  return { rotation: rNew, translation: [-tNew[0], -tNew[1], -tNew[2]] };
}
