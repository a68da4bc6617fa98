"""HTTP ingestion service for demonstrations recorded by the browser UI.

The server re-integrates every uploaded episode through the plant and rejects
uploads whose client-side final state drifts from the authoritative
re-integration, so persisted data always satisfies the plant equation exactly.
Storage is append-only with content-hash ids.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .lti import LtiSystem, Trajectory
from .quadrotor import (
    INPUT_HI,
    INPUT_LO,
    N_INPUTS,
    N_STATES,
    ScenarioConfig,
    landing_outcome,
    quadrotor_system,
)

STATE_MATCH_TOL = 1e-6


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _parse_upload(body: dict, sys: LtiSystem):
    """Validate the POST body and return (x0, inputs, client_final, dt, meta)."""
    if not isinstance(body, dict):
        raise ValueError("body must be a JSON object")
    try:
        x0 = np.array(body["initial_state"], dtype=float)
        inputs = np.array(body["inputs"], dtype=float)
        dt = float(body["dt"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed body: {exc}") from exc
    if x0.shape != (sys.n,):
        raise ValueError(f"initial_state must have {sys.n} components")
    if inputs.ndim != 2 or inputs.shape[1] != sys.m or len(inputs) < 1:
        raise ValueError(f"inputs must be an (N, {sys.m}) array with N >= 1")
    if not np.all(np.isfinite(x0)) or not np.all(np.isfinite(inputs)):
        raise ValueError("non-finite values in upload")
    if abs(dt - sys.dt) > 1e-12:
        raise ValueError(f"dt must equal the plant timestep {sys.dt}")
    if inputs.min() < INPUT_LO - 1e-9 or inputs.max() > INPUT_HI + 1e-9:
        raise ValueError(f"inputs outside the admissible box [{INPUT_LO}, {INPUT_HI}]")
    client_final = None
    if "states" in body and body["states"] is not None:
        states = np.array(body["states"], dtype=float)
        if states.ndim != 2 or states.shape != (len(inputs) + 1, sys.n):
            raise ValueError("states must be an (N+1, n) array matching the inputs")
        if not np.all(np.isfinite(states)):
            raise ValueError("non-finite values in upload")
        client_final = states[-1]
    meta = body.get("meta", {})
    if not isinstance(meta, dict):
        raise ValueError("meta must be an object")
    meta = {str(k): str(v) for k, v in meta.items()}
    return x0, inputs, client_final, dt, meta


def _reintegrate(sys: LtiSystem, x0, inputs) -> np.ndarray:
    states = [np.asarray(x0, dtype=float)]
    for u in inputs:
        states.append(sys.A @ states[-1] + sys.B @ u)
    return np.array(states)


def create_app(
    data_dir,
    scenario: ScenarioConfig | None = None,
    system: LtiSystem | None = None,
    static_dir=None,
) -> FastAPI:
    data_dir = Path(data_dir)
    scenario = scenario or ScenarioConfig()
    sys = system or quadrotor_system()
    app = FastAPI(title="hbm demonstration service")

    @app.get("/healthz")
    def healthz():
        return JSONResponse(content="ok")

    @app.get("/api/scenario")
    def get_scenario():
        return {
            "scenario": scenario.to_json_dict(),
            "plant": {"A": sys.A.tolist(), "B": sys.B.tolist(), "dt": sys.dt},
            "n_states": N_STATES,
            "n_inputs": N_INPUTS,
            "input_lo": INPUT_LO,
            "input_hi": INPUT_HI,
        }

    @app.get("/api/demonstrations")
    def list_demonstrations():
        entries = []
        for path in sorted(data_dir.glob("demo_*.json")):
            try:
                with open(path) as f:
                    doc = json.load(f)
            except (OSError, json.JSONDecodeError):
                continue
            entries.append(
                {
                    "id": path.stem.removeprefix("demo_"),
                    "n_steps": len(doc.get("inputs", [])),
                    "meta": doc.get("meta", {}),
                }
            )
        return {"demonstrations": entries, "count": len(entries)}

    @app.post("/api/demonstrations")
    async def post_demonstration(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body is not valid JSON")
        try:
            x0, inputs, client_final, dt, meta = _parse_upload(body, sys)
        except ValueError as exc:
            return _error(400, str(exc))
        states = _reintegrate(sys, x0, inputs)
        if client_final is not None:
            drift = np.abs(states[-1] - client_final)
            if drift.max() > STATE_MATCH_TOL:
                return _error(
                    409,
                    "client final state drifts from server re-integration by "
                    f"{drift.max():.3e} (tolerance {STATE_MATCH_TOL:.0e}); "
                    "episode rejected",
                )
        traj = Trajectory(states=states, inputs=inputs, dt=dt, meta=meta)
        doc = traj.to_json_dict()
        payload = json.dumps(doc, sort_keys=True).encode()
        demo_id = hashlib.sha256(payload).hexdigest()[:16]
        path = data_dir / f"demo_{demo_id}.json"
        try:
            data_dir.mkdir(parents=True, exist_ok=True)
            if not path.exists():  # append-only: identical content keeps one copy
                tmp = path.with_suffix(".tmp")
                tmp.write_bytes(payload)
                tmp.rename(path)
        except OSError as exc:
            return _error(507, f"storage failure: {exc}")
        outcome = landing_outcome(traj, scenario)
        return {"id": demo_id, "landing_outcome": outcome, "n_steps": traj.n_steps}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
