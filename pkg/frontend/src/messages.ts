// Session protocol: UTF-8 JSON, one document per message. Mirrors the
// server's /ws schema; parseServerMessage rejects anything malformed so a
// bad message can never poison the view model.

export interface TerrainBox {
  size: [number, number, number];
  x: number;
  y: number;
  z: number;
  yaw: number;
}

export interface FrameMsg {
  type: "frame";
  time: number;
  p: [number, number, number];
  q: [number, number, number, number];
  theta: number[];
  mode: string;
  terrain: TerrainBox[];
  bodies?: number[][];
  query_t?: [number, number][];
}

export interface EventMsg {
  type: "event";
  event: string;
  [key: string]: unknown;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMessage = FrameMsg | EventMsg | ErrorMsg;

export type ClientMessage =
  | { type: "command"; u: [number, number] }
  | { type: "skill"; id: string }
  | { type: "reset"; seed: number }
  | { type: "config"; key: string; value: unknown };

export interface SkeletonJoint {
  name: string;
  parent: number;
  offset: [number, number, number];
  axis: [number, number, number];
}

export interface SkeletonInfo {
  joints: SkeletonJoint[];
  left_foot: number;
  right_foot: number;
}

function isNumberArray(v: unknown, n?: number): v is number[] {
  return (
    Array.isArray(v) &&
    (n === undefined || v.length === n) &&
    v.every((x) => typeof x === "number" && Number.isFinite(x))
  );
}

export function parseServerMessage(text: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const msg = doc as Record<string, unknown>;
  switch (msg.type) {
    case "frame": {
      if (
        !isNumberArray(msg.p, 3) ||
        !isNumberArray(msg.q, 4) ||
        !isNumberArray(msg.theta) ||
        typeof msg.time !== "number" ||
        typeof msg.mode !== "string" ||
        !Array.isArray(msg.terrain)
      ) {
        return null;
      }
      return msg as unknown as FrameMsg;
    }
    case "event":
      return typeof msg.event === "string" ? (msg as unknown as EventMsg) : null;
    case "error":
      return typeof msg.message === "string" ? (msg as unknown as ErrorMsg) : null;
    default:
      return null;
  }
}

export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
