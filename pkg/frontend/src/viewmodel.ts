// The view model is a pure reducer over (received messages, local input):
// replaying a captured message log reproduces the identical state sequence.
// Rendering reads the state; nothing here touches the DOM or the network.

import {
  EventMsg,
  FrameMsg,
  ServerMessage,
  SkeletonInfo,
  TerrainBox,
} from "./messages.js";

export const EVENT_FEED_CAPACITY = 64;
export const FRAME_BUFFER_CAPACITY = 4;

export interface ViewState {
  connected: boolean;
  frame: FrameMsg | null;
  frameBuffer: FrameMsg[]; // bounded; rendering never blocks on input
  mode: string;
  terrain: TerrainBox[];
  events: EventMsg[]; // ring buffer of recent events, newest last
  lastMatch: { index: number; distance2: number } | null;
  lastError: string | null;
  skeleton: SkeletonInfo | null;
  frameCount: number;
}

export type ViewAction =
  | { kind: "connected" }
  | { kind: "disconnected" }
  | { kind: "message"; msg: ServerMessage }
  | { kind: "skeleton"; skeleton: SkeletonInfo };

export function initialState(): ViewState {
  return {
    connected: false,
    frame: null,
    frameBuffer: [],
    mode: "locomotion",
    terrain: [],
    events: [],
    lastMatch: null,
    lastError: null,
    skeleton: null,
    frameCount: 0,
  };
}

export function reduce(state: ViewState, action: ViewAction): ViewState {
  switch (action.kind) {
    case "connected":
      return { ...state, connected: true, lastError: null };
    case "disconnected":
      return { ...state, connected: false };
    case "skeleton":
      return { ...state, skeleton: action.skeleton };
    case "message":
      return applyMessage(state, action.msg);
  }
}

function applyMessage(state: ViewState, msg: ServerMessage): ViewState {
  switch (msg.type) {
    case "frame": {
      const frameBuffer = [...state.frameBuffer, msg].slice(-FRAME_BUFFER_CAPACITY);
      return {
        ...state,
        frame: msg,
        frameBuffer,
        mode: msg.mode,
        terrain: msg.terrain,
        frameCount: state.frameCount + 1,
      };
    }
    case "event": {
      const events = [...state.events, msg].slice(-EVENT_FEED_CAPACITY);
      let lastMatch = state.lastMatch;
      if (
        msg.event === "searched" &&
        typeof msg.index === "number" &&
        typeof msg.distance2 === "number"
      ) {
        lastMatch = { index: msg.index, distance2: msg.distance2 };
      }
      if (msg.event === "reset") {
        return { ...initialState(), connected: state.connected, skeleton: state.skeleton, events };
      }
      return { ...state, events, lastMatch };
    }
    case "error":
      return { ...state, lastError: msg.message };
  }
}

/** Replay a captured log from scratch; used by tests and the log loader. */
export function replay(actions: ViewAction[]): ViewState[] {
  const states: ViewState[] = [];
  let state = initialState();
  for (const action of actions) {
    state = reduce(state, action);
    states.push(state);
  }
  return states;
}
