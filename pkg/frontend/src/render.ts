/** 2-D side-view rendering: vehicle sprite with attitude, landing pad,
 * domain bounds, and threshold gauges for touchdown speed and attitude. */

import { Scenario, Vec } from "./dynamics.js";
import { attitudeDegOf, speedOf, Status } from "./episode.js";

export interface Viewport {
  width: number;
  height: number;
}

/** World (meters) to canvas pixel coordinates; y up in world, down on canvas. */
export function worldToCanvas(
  sc: Scenario,
  vp: Viewport,
  x: number,
  y: number,
): [number, number] {
  const [x0, x1] = sc.x_domain;
  const [y0, y1] = sc.y_domain;
  const px = ((x - x0) / (x1 - x0)) * vp.width;
  const py = vp.height - ((y - y0) / (y1 - y0)) * vp.height;
  return [px, py];
}

/** Gauge color: green strictly below the threshold, red at or above it. */
export function gaugeColor(value: number, threshold: number): string {
  return value < threshold ? "#2e9e44" : "#c3392e";
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  sc: Scenario,
  state: Vec,
  status: Status,
): void {
  const vp = { width: ctx.canvas.width, height: ctx.canvas.height };
  ctx.clearRect(0, 0, vp.width, vp.height);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, vp.width, vp.height);

  // ground and pad
  const [, groundY] = worldToCanvas(sc, vp, 0, 0);
  ctx.strokeStyle = "#3a4354";
  ctx.beginPath();
  ctx.moveTo(0, groundY);
  ctx.lineTo(vp.width, groundY);
  ctx.stroke();
  const [padL] = worldToCanvas(sc, vp, -sc.pad_halfwidth, 0);
  const [padR] = worldToCanvas(sc, vp, sc.pad_halfwidth, 0);
  ctx.fillStyle = "#d8a531";
  ctx.fillRect(padL, groundY - 3, padR - padL, 6);

  // vehicle: body rotated by the attitude angle
  const [vx, vy] = worldToCanvas(sc, vp, state[0], state[1]);
  ctx.save();
  ctx.translate(vx, vy);
  ctx.rotate(-state[2]); // world phi is counterclockwise; canvas y is flipped
  ctx.fillStyle = status === "crashed" ? "#c3392e" : "#7db3e8";
  ctx.fillRect(-16, -4, 32, 8);
  ctx.fillRect(-18, -8, 6, 4);
  ctx.fillRect(12, -8, 6, 4);
  ctx.restore();

  // gauges
  const speed = speedOf(state);
  const att = attitudeDegOf(state);
  ctx.font = "13px monospace";
  ctx.fillStyle = gaugeColor(speed, sc.max_speed);
  ctx.fillText(`speed ${speed.toFixed(3)} m/s (< ${sc.max_speed})`, 10, 20);
  ctx.fillStyle = gaugeColor(att, sc.max_attitude_deg);
  ctx.fillText(`attitude ${att.toFixed(2)} deg (< ${sc.max_attitude_deg})`, 10, 38);
  ctx.fillStyle = "#aab4c4";
  ctx.fillText(`status: ${status}`, 10, 56);
}
