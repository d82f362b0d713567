// Device state -> 2D velocity command. Sources merge with priority
// joystick > gamepad > keyboard > preset; a stick inside the dead zone
// yields exactly (0, 0). Commands are world-frame: +x is "up" on screen
// sticks, +y is left. Send rate is capped at 30 messages per second, but a
// change always goes out on the next poll (within one render frame).

export const DEAD_ZONE = 0.1;
export const MAX_SEND_HZ = 30;
export const SPEED_LEVELS = [1.0, 2.0] as const;
export const HEADING_PRESETS_DEG = [-90, -45, 0, 45, 90] as const;

export interface DeviceState {
  keys: Set<string>; // KeyboardEvent.code values currently held
  stick: [number, number] | null; // virtual joystick deflection, |v| <= 1
  gamepadAxes: [number, number] | null; // raw left-stick axes (right, down)
  preset: { speed: number; headingDeg: number } | null;
}

export function emptyDevice(): DeviceState {
  return { keys: new Set(), stick: null, gamepadAxes: null, preset: null };
}

function applyDeadZone(x: number, y: number): [number, number] {
  const mag = Math.hypot(x, y);
  if (mag < DEAD_ZONE) return [0, 0];
  // rescale so the usable range starts at zero just outside the dead zone
  const scale = Math.min((mag - DEAD_ZONE) / (1 - DEAD_ZONE), 1) / mag;
  return [x * scale, y * scale];
}

/** Stick deflection (right, down) to a world command at `speed` m/s. */
export function stickToCommand(
  axes: [number, number],
  speed: number
): [number, number] {
  const [dx, dy] = applyDeadZone(axes[0], axes[1]);
  // screen-up -> world +x (forward), screen-left -> world +y
  return [-dy * speed, -dx * speed];
}

export function presetCommand(speed: number, headingDeg: number): [number, number] {
  const h = (headingDeg * Math.PI) / 180;
  return [speed * Math.cos(h), speed * Math.sin(h)];
}

export function keyboardCommand(keys: Set<string>): [number, number] {
  let x = 0;
  let y = 0;
  if (keys.has("KeyW") || keys.has("ArrowUp")) x += 1;
  if (keys.has("KeyS") || keys.has("ArrowDown")) x -= 1;
  if (keys.has("KeyA") || keys.has("ArrowLeft")) y += 1;
  if (keys.has("KeyD") || keys.has("ArrowRight")) y -= 1;
  const mag = Math.hypot(x, y);
  if (mag === 0) return [0, 0];
  const speed = keys.has("ShiftLeft") || keys.has("ShiftRight") ? 2.0 : 1.0;
  return [(x / mag) * speed, (y / mag) * speed];
}

export function commandFromDevice(dev: DeviceState, stickSpeed: number): [number, number] {
  if (dev.stick !== null) {
    const [x, y] = dev.stick;
    if (Math.hypot(x, y) >= DEAD_ZONE) {
      return stickToCommand([x, y], stickSpeed);
    }
  }
  if (dev.gamepadAxes !== null) {
    const [gx, gy] = dev.gamepadAxes;
    if (Math.hypot(gx, gy) >= DEAD_ZONE) {
      return stickToCommand([gx, gy], stickSpeed);
    }
  }
  const kb = keyboardCommand(dev.keys);
  if (kb[0] !== 0 || kb[1] !== 0) return kb;
  if (dev.preset !== null) return presetCommand(dev.preset.speed, dev.preset.headingDeg);
  return [0, 0];
}

/** Rate limiter: send when the command changed or the keepalive is due. */
export class CommandSender {
  private last: [number, number] | null = null;
  private lastSentAt = -Infinity;

  constructor(private minIntervalMs: number = 1000 / MAX_SEND_HZ) {}

  poll(u: [number, number], nowMs: number): [number, number] | null {
    const changed =
      this.last === null || u[0] !== this.last[0] || u[1] !== this.last[1];
    if (nowMs - this.lastSentAt < this.minIntervalMs) return null;
    if (!changed && nowMs - this.lastSentAt < 500) return null; // idle keepalive at 2 Hz
    this.last = [u[0], u[1]];
    this.lastSentAt = nowMs;
    return this.last;
  }
}
