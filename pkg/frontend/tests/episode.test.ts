import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { Plant, Scenario, Vec } from "../src/dynamics";
import { Episode } from "../src/episode";
import { InputSource } from "../src/input";
import { gaugeColor, worldToCanvas } from "../src/render";

const here = dirname(fileURLToPath(import.meta.url));
const { plant } = JSON.parse(
  readFileSync(join(here, "fixture_episode.json"), "utf-8"),
) as { plant: Plant };

const scenario: Scenario = {
  x_domain: [-3, 3],
  y_domain: [0, 3.5],
  x0_range: [-2, 2],
  y0_range: [2.5, 3],
  pad_halfwidth: 0.5,
  max_speed: 0.1,
  max_attitude_deg: 5,
  max_steps: 600,
};

function makeEpisode(x0: Vec, tau = 0): Episode {
  return new Episode({ plant, scenario, tau }, x0);
}

describe("fixed-timestep accumulator", () => {
  it("one second of render frames yields exactly 20 physics steps", () => {
    const ep = makeEpisode([0, 3, 0, 0, 0, 0]);
    let steps = 0;
    // 60 fps: sixty frames of 1/60 s
    for (let f = 0; f < 60; f++) steps += ep.advance(1 / 60, [0, 0.1]);
    expect(steps).toBe(20);
    expect(ep.elapsedSteps).toBe(20);
  });

  it("input history length always equals elapsed steps", () => {
    const ep = makeEpisode([0, 3, 0, 0, 0, 0]);
    for (let f = 0; f < 45; f++) {
      ep.advance(0.017, [0.1, 0]);
      expect(ep.inputs.length).toBe(ep.elapsedSteps);
      expect(ep.states.length).toBe(ep.elapsedSteps + 1);
    }
  });

  it("a frame shorter than dt integrates zero steps", () => {
    const ep = makeEpisode([0, 3, 0, 0, 0, 0]);
    expect(ep.advance(0.01, [0, 0])).toBe(0);
    expect(ep.elapsedSteps).toBe(0);
  });
});

describe("status transitions", () => {
  it("gentle touchdown on the pad is landed", () => {
    const ep = makeEpisode([0, 0.021, 0, 0, -0.01, 0]);
    for (let k = 0; k < 10 && ep.status === "flying"; k++) ep.tick([0, 0]);
    expect(ep.status).toBe("landed");
  });

  it("fast touchdown is crashed", () => {
    const ep = makeEpisode([0, 0.03, 0, 0, -0.5, 0]);
    ep.tick([0, 0]);
    expect(ep.status).toBe("crashed");
  });

  it("touchdown off the pad is crashed", () => {
    const ep = makeEpisode([2.0, 0.021, 0, 0, -0.01, 0]);
    for (let k = 0; k < 10 && ep.status === "flying"; k++) ep.tick([0, 0]);
    expect(ep.status).toBe("crashed");
  });

  it("leaving the domain ends the episode", () => {
    const ep = makeEpisode([2.99, 1.0, 0, 5.0, 0, 0]);
    ep.tick([0, 0]);
    expect(ep.status).toBe("out_of_domain");
  });

  it("no integration after the episode ends", () => {
    const ep = makeEpisode([0, 0.021, 0, 0, -0.01, 0]);
    for (let k = 0; k < 10 && ep.status === "flying"; k++) ep.tick([0, 0]);
    expect(ep.status).not.toBe("flying");
    const steps = ep.elapsedSteps;
    ep.advance(1.0, [1, 1]);
    expect(ep.elapsedSteps).toBe(steps);
  });

  it("inputs are clamped before recording", () => {
    const ep = makeEpisode([0, 3, 0, 0, 0, 0]);
    ep.tick([5, -5]);
    expect(ep.inputs[0][0]).toBe(1);
    expect(ep.inputs[0][1]).toBe(-1);
  });
});

describe("keyboard mapping", () => {
  it("full thrust key gives u2 = 1 exactly", () => {
    const src = new InputSource();
    src.keyDown("KeyW");
    expect(src.read()[1]).toBe(1);
    src.keyUp("KeyW");
    expect(src.read()[1]).toBe(0);
  });

  it("roll keys map to +/-1 on u1 and cancel when both held", () => {
    const src = new InputSource();
    src.keyDown("ArrowLeft");
    expect(src.read()[0]).toBe(1);
    src.keyDown("ArrowRight");
    expect(src.read()[0]).toBe(0);
  });
});

describe("render helpers", () => {
  it("gauges flip from green to red exactly at the threshold", () => {
    expect(gaugeColor(0.0999, 0.1)).toBe("#2e9e44");
    expect(gaugeColor(0.1, 0.1)).toBe("#c3392e");
    expect(gaugeColor(4.99, 5)).toBe("#2e9e44");
    expect(gaugeColor(5.0, 5)).toBe("#c3392e");
  });

  it("domain corners map inside the canvas", () => {
    const vp = { width: 840, height: 490 };
    for (const [wx, wy] of [
      [-3, 0],
      [3, 0],
      [-3, 3.5],
      [3, 3.5],
      [0, 1.7],
    ]) {
      const [px, py] = worldToCanvas(scenario, vp, wx, wy);
      expect(px).toBeGreaterThanOrEqual(0);
      expect(px).toBeLessThanOrEqual(vp.width);
      expect(py).toBeGreaterThanOrEqual(0);
      expect(py).toBeLessThanOrEqual(vp.height);
    }
  });
});
