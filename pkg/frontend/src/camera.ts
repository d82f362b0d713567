// Minimal orbit camera over a Z-up world with a hand-rolled perspective
// projection; no rendering dependency needed for a stick figure.

export interface Camera {
  target: [number, number, number];
  azimuth: number; // radians around +z
  altitude: number; // radians above the horizon
  distance: number;
  fov: number; // vertical, radians
}

export function defaultCamera(): Camera {
  return {
    target: [0, 0, 0.8],
    azimuth: Math.PI,
    altitude: 0.35,
    distance: 4.5,
    fov: Math.PI / 4,
  };
}

export function cameraEye(cam: Camera): [number, number, number] {
  const ca = Math.cos(cam.altitude);
  return [
    cam.target[0] + cam.distance * ca * Math.cos(cam.azimuth),
    cam.target[1] + cam.distance * ca * Math.sin(cam.azimuth),
    cam.target[2] + cam.distance * Math.sin(cam.altitude),
  ];
}

/**
 * World point to canvas pixels. Returns null when the point is behind the
 * eye. Screen x grows right, y grows down.
 */
export function project(
  cam: Camera,
  p: [number, number, number],
  width: number,
  height: number
): [number, number] | null {
  const eye = cameraEye(cam);
  // view basis: forward toward the target, right, up
  const f = norm3(sub3(cam.target, eye));
  const r = norm3(cross3(f, [0, 0, 1]));
  const u = cross3(r, f);
  const d = sub3(p, eye);
  const zc = dot3(d, f);
  if (zc <= 1e-6) return null;
  const xc = dot3(d, r);
  const yc = dot3(d, u);
  const scale = height / 2 / Math.tan(cam.fov / 2);
  return [width / 2 + (xc / zc) * scale, height / 2 - (yc / zc) * scale];
}

function sub3(a: number[], b: number[]): [number, number, number] {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function dot3(a: number[], b: number[]): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross3(a: number[], b: number[]): [number, number, number] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function norm3(a: [number, number, number]): [number, number, number] {
  const n = Math.hypot(a[0], a[1], a[2]) || 1;
  return [a[0] / n, a[1] / n, a[2] / n];
}

// Forward kinematics for the overlay when the server does not send body
// positions: single-axis revolute joints, body 0 is the root.
import { SkeletonInfo } from "./messages.js";

type Quat = [number, number, number, number];

function quatMul(a: Quat, b: Quat): Quat {
  return [
    a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
    a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
    a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
    a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
  ];
}

function quatRotate(q: Quat, v: [number, number, number]): [number, number, number] {
  const u: [number, number, number] = [q[1], q[2], q[3]];
  const w = q[0];
  const uv = cross3(u, v);
  const uuv = cross3(u, uv);
  return [
    v[0] + 2 * (w * uv[0] + uuv[0]),
    v[1] + 2 * (w * uv[1] + uuv[1]),
    v[2] + 2 * (w * uv[2] + uuv[2]),
  ];
}

function axisAngle(axis: [number, number, number], angle: number): Quat {
  const h = angle / 2;
  const s = Math.sin(h);
  return [Math.cos(h), axis[0] * s, axis[1] * s, axis[2] * s];
}

export function forwardKinematics(
  skeleton: SkeletonInfo,
  rootPos: [number, number, number],
  rootQuat: Quat,
  theta: number[]
): [number, number, number][] {
  const pos: [number, number, number][] = [rootPos];
  const quat: Quat[] = [rootQuat];
  skeleton.joints.forEach((j, i) => {
    const p = j.parent + 1;
    const off = quatRotate(quat[p], j.offset);
    pos.push([pos[p][0] + off[0], pos[p][1] + off[1], pos[p][2] + off[2]]);
    quat.push(quatMul(quat[p], axisAngle(j.axis, theta[i] ?? 0)));
  });
  return pos;
}
