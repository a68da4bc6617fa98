/** App wiring: fetch the scenario, run the game loop, upload on episode end. */

import {
  fetchScenario,
  listDemonstrations,
  uploadEpisode,
  ApiError,
} from "./api.js";
import { ScenarioResponse, Vec } from "./dynamics.js";
import { Episode } from "./episode.js";
import { InputSource } from "./input.js";
import { drawFrame } from "./render.js";

function randomInitialState(cfg: ScenarioResponse): Vec {
  const sc = cfg.scenario;
  const x = sc.x0_range[0] + Math.random() * (sc.x0_range[1] - sc.x0_range[0]);
  const y = sc.y0_range[0] + Math.random() * (sc.y0_range[1] - sc.y0_range[0]);
  return [x, y, 0, 0, 0, 0];
}

function setText(id: string, text: string): void {
  const el = document.getElementById(id);
  if (el) el.textContent = text;
}

async function refreshHistory(): Promise<void> {
  try {
    const entries = await listDemonstrations();
    setText(
      "history",
      entries
        .map((e) => `${e.id}  steps=${e.n_steps}  ${e.meta.strategy ?? ""}`)
        .join("\n") || "(no uploads yet)",
    );
  } catch {
    setText("history", "(history unavailable)");
  }
}

async function main(): Promise<void> {
  const cfg = await fetchScenario();
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const input = new InputSource();
  input.attach(window);

  let episode = new Episode(
    { plant: cfg.plant, scenario: cfg.scenario },
    randomInitialState(cfg),
  );
  let uploading = false;
  let uploaded = false;

  document.getElementById("reset")!.addEventListener("click", () => {
    episode = new Episode(
      { plant: cfg.plant, scenario: cfg.scenario },
      randomInitialState(cfg),
    );
    uploaded = false;
    setText("verdict", "");
  });

  async function tryUpload(): Promise<void> {
    if (uploading || uploaded || episode.elapsedSteps === 0) return;
    uploading = true;
    const strategy =
      (document.getElementById("strategy") as HTMLSelectElement).value;
    try {
      const ack = await uploadEpisode({
        initial_state: episode.initialState,
        inputs: episode.inputs,
        states: episode.states,
        dt: cfg.plant.dt,
        meta: { strategy, source: "landing-ui" },
      });
      uploaded = true;
      const o = ack.landing_outcome;
      setText(
        "verdict",
        `uploaded ${ack.id} — ${o.landed ? "LANDED" : "not landed"} ` +
          `(speed ${o.final_speed.toFixed(3)} m/s, ` +
          `attitude ${o.final_attitude_deg.toFixed(2)} deg, ` +
          `on pad: ${o.on_pad})`,
      );
      void refreshHistory();
    } catch (err) {
      if (err instanceof ApiError) {
        // 400/409: show the server's rejection reason to the pilot
        setText("verdict", `rejected (${err.status}): ${err.detail}`);
        uploaded = true; // server will reject a resend identically
      } else {
        // network failure: keep the episode and offer a retry
        setText("verdict", "upload failed (network) — press U to retry");
      }
    } finally {
      uploading = false;
    }
  }

  window.addEventListener("keydown", (e) => {
    if (e.code === "KeyU") void tryUpload();
  });

  let last = performance.now();
  function frame(now: number): void {
    const dt = Math.min((now - last) / 1000, 0.25);
    last = now;
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const target = input.read(pads && pads[0] ? pads[0] : null);
    episode.advance(dt, target);
    drawFrame(ctx, cfg.scenario, episode.state, episode.status);
    if (episode.status !== "flying") void tryUpload();
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
  void refreshHistory();
}

main().catch((err) => setText("verdict", `failed to start: ${err}`));
