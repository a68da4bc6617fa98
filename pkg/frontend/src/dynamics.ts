/**
 * Client-side plant integration. The matrices are never hard-coded in the UI:
 * they arrive from GET /api/scenario so the browser and the ingestion server
 * integrate exactly the same dynamics.
 *
 * The state is [x, y, phi, xdot, ydot, phidot]; the inputs are
 * [angular acceleration, thrust], both clamped to [-1, 1].
 */

export interface Scenario {
  x_domain: [number, number];
  y_domain: [number, number];
  x0_range: [number, number];
  y0_range: [number, number];
  pad_halfwidth: number;
  max_speed: number;
  max_attitude_deg: number;
  max_steps: number;
}

export interface Plant {
  A: number[][];
  B: number[][];
  dt: number;
}

export interface ScenarioResponse {
  scenario: Scenario;
  plant: Plant;
  n_states: number;
  n_inputs: number;
  input_lo: number;
  input_hi: number;
}

export type Vec = number[];

export function clampInput(u: Vec, lo = -1, hi = 1): Vec {
  return u.map((v) => Math.min(hi, Math.max(lo, v)));
}

/** One integration step x <- A x + B u, in double precision, row by row. */
export function step(plant: Plant, x: Vec, u: Vec): Vec {
  const n = plant.A.length;
  const m = plant.B[0].length;
  const next = new Array<number>(n);
  for (let i = 0; i < n; i++) {
    let acc = 0;
    for (let j = 0; j < n; j++) acc += plant.A[i][j] * x[j];
    for (let j = 0; j < m; j++) acc += plant.B[i][j] * u[j];
    next[i] = acc;
  }
  return next;
}

/** Re-integrate a whole input history from an initial state (the same
 * computation the server performs to produce the canonical episode). */
export function integrate(plant: Plant, x0: Vec, inputs: Vec[]): Vec[] {
  const states = [x0.slice()];
  for (const u of inputs) {
    states.push(step(plant, states[states.length - 1], u));
  }
  return states;
}

/** First-order input smoothing, u' = u + (target - u) * (1 - exp(-dt/tau)),
 * emulating joystick proportionality for binary keyboard input. Applied
 * before recording, so the recorded input is what the plant saw. */
export function smooth(current: Vec, target: Vec, dt: number, tau: number): Vec {
  if (tau <= 0) return target.slice();
  const a = 1 - Math.exp(-dt / tau);
  return current.map((v, i) => v + (target[i] - v) * a);
}
