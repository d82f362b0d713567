// Canvas rendering: ground grid, terrain boxes, stick-figure skeleton,
// predicted-trajectory dots, badges, and the event feed. Reads the view
// state; draws nothing stateful of its own except the 2D context.

import { Camera, forwardKinematics, project } from "./camera.js";
import { TerrainBox } from "./messages.js";
import { ViewState } from "./viewmodel.js";

const BONE_COLOR = "#e8e8f0";
const TERRAIN_COLOR = "rgba(214, 143, 60, 0.55)";
const TRAIL_COLOR = "#53d769";

export function render(
  ctx: CanvasRenderingContext2D,
  state: ViewState,
  cam: Camera,
  width: number,
  height: number
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, width, height);
  drawGrid(ctx, cam, width, height);
  for (const box of state.terrain) drawBox(ctx, cam, box, width, height);

  const frame = state.frame;
  if (frame !== null) {
    const bodies =
      frame.bodies ??
      (state.skeleton !== null
        ? forwardKinematics(state.skeleton, frame.p, frame.q, frame.theta)
        : null);
    if (bodies !== null && state.skeleton !== null) {
      drawSkeleton(ctx, cam, state, bodies as [number, number, number][], width, height);
    } else {
      drawMarker(ctx, cam, frame.p, width, height);
    }
    if (frame.query_t) {
      for (const [x, y] of frame.query_t) {
        dot(ctx, cam, [x, y, 0.02], width, height, TRAIL_COLOR, 3.5);
      }
    }
  }
}

function drawGrid(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  w: number,
  h: number
): void {
  ctx.strokeStyle = "#262a33";
  ctx.lineWidth = 1;
  const cx = Math.round(cam.target[0]);
  const cy = Math.round(cam.target[1]);
  for (let k = -8; k <= 8; k++) {
    line3(ctx, cam, [cx + k, cy - 8, 0], [cx + k, cy + 8, 0], w, h);
    line3(ctx, cam, [cx - 8, cy + k, 0], [cx + 8, cy + k, 0], w, h);
  }
}

function drawSkeleton(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  state: ViewState,
  bodies: [number, number, number][],
  w: number,
  h: number
): void {
  if (state.skeleton === null) return;
  ctx.strokeStyle = state.mode === "locomotion" ? BONE_COLOR : "#7fc8ff";
  ctx.lineWidth = 2.5;
  state.skeleton.joints.forEach((j, i) => {
    line3(ctx, cam, bodies[j.parent + 1], bodies[i + 1], w, h);
  });
  dot(ctx, cam, bodies[0], w, h, "#ffcf5c", 4);
}

function drawMarker(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  p: [number, number, number],
  w: number,
  h: number
): void {
  dot(ctx, cam, p, w, h, "#ffcf5c", 5);
  line3(ctx, cam, [p[0], p[1], 0], p, w, h);
}

function drawBox(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  box: TerrainBox,
  w: number,
  h: number
): void {
  const [sx, sy, sz] = box.size;
  const c = Math.cos(box.yaw);
  const s = Math.sin(box.yaw);
  const corners: [number, number, number][] = [];
  for (const dz of [0, sz]) {
    for (const [ux, uy] of [[-1, -1], [1, -1], [1, 1], [-1, 1]] as const) {
      const lx = (ux * sx) / 2;
      const ly = (uy * sy) / 2;
      corners.push([box.x + c * lx - s * ly, box.y + s * lx + c * ly, box.z + dz]);
    }
  }
  ctx.strokeStyle = TERRAIN_COLOR;
  ctx.lineWidth = 2;
  for (let i = 0; i < 4; i++) {
    line3(ctx, cam, corners[i], corners[(i + 1) % 4], w, h);
    line3(ctx, cam, corners[4 + i], corners[4 + ((i + 1) % 4)], w, h);
    line3(ctx, cam, corners[i], corners[4 + i], w, h);
  }
}

function line3(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  a: [number, number, number],
  b: [number, number, number],
  w: number,
  h: number
): void {
  const pa = project(cam, a, w, h);
  const pb = project(cam, b, w, h);
  if (pa === null || pb === null) return;
  ctx.beginPath();
  ctx.moveTo(pa[0], pa[1]);
  ctx.lineTo(pb[0], pb[1]);
  ctx.stroke();
}

function dot(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  p: [number, number, number],
  w: number,
  h: number,
  color: string,
  radius: number
): void {
  const pp = project(cam, p, w, h);
  if (pp === null) return;
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(pp[0], pp[1], radius, 0, 2 * Math.PI);
  ctx.fill();
}
