// Driver input handling: binary keys approximate analog pedals by ramping
// 0 -> 1 over 300 ms while held and releasing over 150 ms. Every user action
// maps to exactly one wire message; nothing is simulated client side.

import type { ClientMsg } from "./wire.js";

export const RAMP_UP_MS = 300;
export const RAMP_DOWN_MS = 150;

export class PedalRamp {
  private value = 0;
  private pressed = false;
  private lastMs: number | null = null;

  press(): void {
    this.pressed = true;
  }

  release(): void {
    this.pressed = false;
  }

  get isPressed(): boolean {
    return this.pressed;
  }

  /** Advance the ramp to `nowMs` and return the pedal position in [0, 1]. */
  sample(nowMs: number): number {
    if (this.lastMs === null) this.lastMs = nowMs;
    const dt = Math.max(nowMs - this.lastMs, 0);
    this.lastMs = nowMs;
    if (this.pressed) {
      this.value = Math.min(this.value + dt / RAMP_UP_MS, 1);
    } else {
      this.value = Math.max(this.value - dt / RAMP_DOWN_MS, 0);
    }
    return this.value;
  }
}

export type UiAction =
  | { kind: "pedals"; gas: number; brake: number }
  | { kind: "lever"; deltaKmh: number }
  | { kind: "reactivate" }
  | { kind: "start_lap" }
  | { kind: "abort_lap" }
  | { kind: "apply_spaa" }
  | { kind: "reset_learning" }
  | { kind: "load_route"; name: string };

export function actionToMessage(action: UiAction): ClientMsg {
  switch (action.kind) {
    case "pedals":
      return { type: "input", gas: round3(action.gas), brake: round3(action.brake) };
    case "lever":
      return { type: "lever", delta_kmh: action.deltaKmh };
    case "reactivate":
      return { type: "reactivate" };
    case "start_lap":
      return { type: "start_lap" };
    case "abort_lap":
      return { type: "abort_lap" };
    case "apply_spaa":
      return { type: "apply_spaa" };
    case "reset_learning":
      return { type: "reset_learning" };
    case "load_route":
      return { type: "load_route", name: action.name };
  }
}

function round3(x: number): number {
  return Math.round(x * 1000) / 1000;
}

export interface PedalKeymap {
  gas: string[];
  brake: string[];
}

export const DEFAULT_KEYMAP: PedalKeymap = {
  gas: ["ArrowUp", "KeyW"],
  brake: ["ArrowDown", "KeyS"],
};

/** Keyboard pedal pair; call `sample` once per animation frame. */
export class KeyboardPedals {
  readonly gas = new PedalRamp();
  readonly brake = new PedalRamp();
  private lastSent: { gas: number; brake: number } | null = null;

  constructor(private keymap: PedalKeymap = DEFAULT_KEYMAP) {}

  keyDown(code: string): boolean {
    if (this.keymap.gas.includes(code)) {
      this.gas.press();
      return true;
    }
    if (this.keymap.brake.includes(code)) {
      this.brake.press();
      return true;
    }
    return false;
  }

  keyUp(code: string): boolean {
    if (this.keymap.gas.includes(code)) {
      this.gas.release();
      return true;
    }
    if (this.keymap.brake.includes(code)) {
      this.brake.release();
      return true;
    }
    return false;
  }

  /** One pedal action per frame, only when the sampled values changed. */
  sample(nowMs: number): UiAction | null {
    const gas = round3(this.gas.sample(nowMs));
    const brake = round3(this.brake.sample(nowMs));
    if (this.lastSent && this.lastSent.gas === gas && this.lastSent.brake === brake) {
      return null;
    }
    this.lastSent = { gas, brake };
    return { kind: "pedals", gas, brake };
  }
}
