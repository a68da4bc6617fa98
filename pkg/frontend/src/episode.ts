/**
 * Episode state machine with fixed-timestep physics decoupled from the render
 * rate through an accumulator: no matter the display refresh, the plant
 * advances exactly once per dt of simulated time.
 */

import {
  clampInput,
  Plant,
  Scenario,
  smooth,
  step,
  Vec,
} from "./dynamics.js";

export type Status = "flying" | "landed" | "crashed" | "out_of_domain";

export interface EpisodeConfig {
  plant: Plant;
  scenario: Scenario;
  /** touchdown altitude in meters */
  yLand?: number;
  /** input smoothing time constant in seconds; 0 disables smoothing */
  tau?: number;
}

export class Episode {
  readonly plant: Plant;
  readonly scenario: Scenario;
  readonly initialState: Vec;
  readonly inputs: Vec[] = [];
  /** full client-side state history x_0..x_N; reported on upload so the
   * server can verify the client integration against its own */
  readonly states: Vec[];
  state: Vec;
  status: Status = "flying";
  private accumulator = 0;
  private smoothed: Vec;
  private readonly yLand: number;
  private readonly tau: number;

  constructor(cfg: EpisodeConfig, initialState: Vec) {
    this.plant = cfg.plant;
    this.scenario = cfg.scenario;
    this.initialState = initialState.slice();
    this.state = initialState.slice();
    this.states = [this.state.slice()];
    this.smoothed = new Array(cfg.plant.B[0].length).fill(0);
    this.yLand = cfg.yLand ?? 0.02;
    this.tau = cfg.tau ?? 0.1;
  }

  get elapsedSteps(): number {
    return this.inputs.length;
  }

  /** Advance by a render-frame duration; integrates zero or more fixed steps. */
  advance(frameSeconds: number, target: Vec): number {
    if (this.status !== "flying") return 0;
    this.accumulator += frameSeconds;
    let steps = 0;
    while (this.accumulator >= this.plant.dt && this.status === "flying") {
      this.accumulator -= this.plant.dt;
      this.tick(target);
      steps++;
    }
    return steps;
  }

  /** One fixed physics step with the commanded (pre-smoothing) input. */
  tick(target: Vec): void {
    if (this.status !== "flying") return;
    this.smoothed = smooth(this.smoothed, clampInput(target), this.plant.dt, this.tau);
    const u = clampInput(this.smoothed);
    this.inputs.push(u);
    this.state = step(this.plant, this.state, u);
    this.states.push(this.state.slice());
    this.updateStatus();
  }

  private updateStatus(): void {
    const [x, y, phi, vx, vy] = this.state;
    const sc = this.scenario;
    if (x < sc.x_domain[0] || x > sc.x_domain[1] || y > sc.y_domain[1]) {
      this.status = "out_of_domain";
      return;
    }
    if (y <= this.yLand) {
      const speed = Math.hypot(vx, vy);
      const attitudeDeg = Math.abs((phi * 180) / Math.PI);
      const onPad = Math.abs(x) <= sc.pad_halfwidth;
      this.status =
        onPad && speed < sc.max_speed && attitudeDeg < sc.max_attitude_deg
          ? "landed"
          : "crashed";
      return;
    }
    if (this.inputs.length >= sc.max_steps) {
      this.status = "out_of_domain";
    }
  }
}

export function speedOf(state: Vec): number {
  return Math.hypot(state[3], state[4]);
}

export function attitudeDegOf(state: Vec): number {
  return Math.abs((state[2] * 180) / Math.PI);
}
