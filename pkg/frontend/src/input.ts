/**
 * Keyboard and gamepad mapping to the commanded input [u1, u2] in [-1, 1]^2.
 *
 * Default keyboard convention (configurable): ArrowLeft commands positive
 * angular acceleration u1 (rolls the vehicle counterclockwise, which
 * accelerates it to the left), ArrowRight negative; W is full thrust
 * (u2 = +1), S is negative thrust. Keys are binary; proportionality comes
 * from the episode's first-order smoothing filter.
 */

import { Vec } from "./dynamics.js";

export interface KeyMap {
  rollPositive: string;
  rollNegative: string;
  thrustPositive: string;
  thrustNegative: string;
}

export const DEFAULT_KEYS: KeyMap = {
  rollPositive: "ArrowLeft",
  rollNegative: "ArrowRight",
  thrustPositive: "KeyW",
  thrustNegative: "KeyS",
};

export class InputSource {
  private pressed = new Set<string>();

  constructor(private keys: KeyMap = DEFAULT_KEYS) {}

  keyDown(code: string): void {
    this.pressed.add(code);
  }

  keyUp(code: string): void {
    this.pressed.delete(code);
  }

  attach(target: EventTarget): void {
    target.addEventListener("keydown", (e) => this.keyDown((e as KeyboardEvent).code));
    target.addEventListener("keyup", (e) => this.keyUp((e as KeyboardEvent).code));
  }

  /** Current commanded input from keyboard plus an optional gamepad. */
  read(gamepad: Gamepad | null = null): Vec {
    let u1 = 0;
    let u2 = 0;
    if (this.pressed.has(this.keys.rollPositive)) u1 += 1;
    if (this.pressed.has(this.keys.rollNegative)) u1 -= 1;
    if (this.pressed.has(this.keys.thrustPositive)) u2 += 1;
    if (this.pressed.has(this.keys.thrustNegative)) u2 -= 1;
    if (gamepad) {
      // left stick X -> u1 (push left = positive roll), right trigger axis -> u2
      u1 += -(gamepad.axes[0] ?? 0);
      u2 += -(gamepad.axes[1] ?? 0);
    }
    return [Math.min(1, Math.max(-1, u1)), Math.min(1, Math.max(-1, u2))];
  }
}
