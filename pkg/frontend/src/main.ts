// Wiring: connection, input polling, render loop, and the control panel.
// All state lives in the pure view model; input is sampled once per render
// frame so a device change reaches the wire within one frame.

import { defaultCamera } from "./camera.js";
import {
  CommandSender,
  DeviceState,
  commandFromDevice,
  emptyDevice,
  HEADING_PRESETS_DEG,
  SPEED_LEVELS,
} from "./input.js";
import { SkeletonInfo } from "./messages.js";
import { Connection } from "./net.js";
import { render } from "./render.js";
import { initialState, reduce, ViewState } from "./viewmodel.js";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const modeBadge = document.getElementById("mode")!;
const matchBadge = document.getElementById("match")!;
const connBadge = document.getElementById("conn")!;
const eventFeed = document.getElementById("events")!;
const skillBar = document.getElementById("skills")!;
const presetBar = document.getElementById("presets")!;
const joystick = document.getElementById("joystick") as HTMLDivElement;
const knob = document.getElementById("knob") as HTMLDivElement;

let state: ViewState = initialState();
const device: DeviceState = emptyDevice();
let stickSpeed = 1.0;
const cam = defaultCamera();
const sender = new CommandSender();

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const conn = new Connection(wsUrl, {
  onMessage: (msg) => {
    state = reduce(state, { kind: "message", msg });
  },
  onOpen: () => {
    state = reduce(state, { kind: "connected" });
  },
  onClose: () => {
    state = reduce(state, { kind: "disconnected" });
  },
});

fetch("/skeleton")
  .then((r) => r.json())
  .then((skeleton: SkeletonInfo) => {
    state = reduce(state, { kind: "skeleton", skeleton });
  })
  .catch(() => undefined);

fetch("/info")
  .then((r) => r.json())
  .then((info: { skills: string[] }) => {
    for (const skill of info.skills) {
      const btn = document.createElement("button");
      btn.textContent = skill;
      btn.onclick = () => conn.send({ type: "skill", id: skill });
      skillBar.appendChild(btn);
    }
  })
  .catch(() => undefined);

// keyboard
window.addEventListener("keydown", (e) => {
  device.keys.add(e.code);
  if (e.code === "KeyR") conn.send({ type: "reset", seed: 0 });
});
window.addEventListener("keyup", (e) => device.keys.delete(e.code));

// presets: the synthesis command set, two speeds x five headings
for (const speed of SPEED_LEVELS) {
  for (const heading of HEADING_PRESETS_DEG) {
    const btn = document.createElement("button");
    btn.textContent = `${speed} m/s ${heading}°`;
    btn.onclick = () => {
      device.preset = { speed, headingDeg: heading };
      device.stick = null;
    };
    presetBar.appendChild(btn);
  }
}
const stopBtn = document.createElement("button");
stopBtn.textContent = "stop";
stopBtn.onclick = () => {
  device.preset = null;
  device.stick = null;
};
presetBar.appendChild(stopBtn);

// virtual joystick (pointer events on the pad)
function stickFromPointer(e: PointerEvent): [number, number] {
  const rect = joystick.getBoundingClientRect();
  const x = ((e.clientX - rect.left) / rect.width) * 2 - 1;
  const y = ((e.clientY - rect.top) / rect.height) * 2 - 1;
  const m = Math.hypot(x, y);
  return m > 1 ? [x / m, y / m] : [x, y];
}
joystick.addEventListener("pointerdown", (e) => {
  joystick.setPointerCapture(e.pointerId);
  device.stick = stickFromPointer(e);
});
joystick.addEventListener("pointermove", (e) => {
  if (device.stick !== null) device.stick = stickFromPointer(e);
});
const releaseStick = () => {
  device.stick = null;
  knob.style.transform = "translate(-50%, -50%)";
};
joystick.addEventListener("pointerup", releaseStick);
joystick.addEventListener("pointercancel", releaseStick);

window.addEventListener("keydown", (e) => {
  if (e.code === "Digit1") stickSpeed = 1.0;
  if (e.code === "Digit2") stickSpeed = 2.0;
});

function pollGamepad(): void {
  const pads = navigator.getGamepads ? navigator.getGamepads() : [];
  const pad = pads && pads[0];
  device.gamepadAxes = pad ? [pad.axes[0] ?? 0, pad.axes[1] ?? 0] : null;
  if (pad && pad.buttons[0]?.pressed) {
    const firstSkill = skillBar.querySelector("button");
    firstSkill?.click();
  }
}

function refreshHud(): void {
  modeBadge.textContent = state.mode;
  modeBadge.className = state.mode === "locomotion" ? "badge" : "badge skill";
  matchBadge.textContent = state.lastMatch
    ? `match #${state.lastMatch.index} d²=${state.lastMatch.distance2.toFixed(3)}`
    : "match —";
  connBadge.textContent = state.connected ? "connected" : "reconnecting…";
  connBadge.className = state.connected ? "badge ok" : "badge bad";
  const lines = state.events.slice(-12).map((e) => {
    const extra = Object.entries(e)
      .filter(([k]) => !["type", "event", "time", "frame", "terrain"].includes(k))
      .map(([k, v]) => `${k}=${typeof v === "number" ? (v as number).toFixed ? Number(v).toFixed(2) : v : v}`)
      .join(" ");
    return `<div>${e.event} ${extra}</div>`;
  });
  eventFeed.innerHTML = lines.join("");
  if (device.stick !== null) {
    knob.style.transform = `translate(calc(-50% + ${device.stick[0] * 40}px), calc(-50% + ${device.stick[1] * 40}px))`;
  }
}

function tick(): void {
  pollGamepad();
  const u = commandFromDevice(device, stickSpeed);
  const due = sender.poll(u, performance.now());
  if (due !== null) conn.send({ type: "command", u: due });
  if (state.frame !== null) {
    cam.target = [state.frame.p[0], state.frame.p[1], 0.8];
  }
  const w = (canvas.width = canvas.clientWidth);
  const h = (canvas.height = canvas.clientHeight);
  render(ctx, state, cam, w, h);
  refreshHud();
  requestAnimationFrame(tick);
}

conn.send({ type: "config", key: "overlay.query", value: true });
requestAnimationFrame(tick);
