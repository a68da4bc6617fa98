"""Command-line entry points: dataset synthesis, training, prediction,
evaluation with plot-data export, and the demonstration ingestion service.

Every subcommand reads an optional JSON config file (--config) whose keys are
validated against the subcommand's known options; command-line flags override
config-file values. HBM_DATA_DIR provides the default storage root.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys as _sys
from pathlib import Path

import numpy as np

from . import pipeline
from .lti import DemonstrationSet, Trajectory
from .quadrotor import (
    DEFAULT_Q_DIAG,
    DEFAULT_R_DIAG,
    ScenarioConfig,
    VariabilitySpec,
    landing_outcome,
    quadrotor_system,
    sample_initial_state,
    synth_demonstrate,
)
from .lti import lqr_gain

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "hbm-dataset/1"


def _data_root() -> Path:
    return Path(os.environ.get("HBM_DATA_DIR", "."))


def _load_config(path, known_keys):
    if path is None:
        return {}
    with open(path) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise SystemExit(f"config {path} must be a JSON object")
    unknown = sorted(set(cfg) - set(known_keys))
    if unknown:
        raise SystemExit(f"unknown config keys in {path}: {', '.join(unknown)}")
    return cfg


def _merge(cfg: dict, args: argparse.Namespace, keys) -> dict:
    """Config-file values overridden by explicitly passed flags."""
    out = dict(cfg)
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

_SYNTH_KEYS = (
    "out", "M", "seed", "q_diag", "r_diag", "vspec", "y_land", "max_steps",
    "scenario",
)


def cmd_synth(args) -> int:
    cfg = _merge(_load_config(args.config, _SYNTH_KEYS), args, ("out", "M", "seed"))
    out = Path(cfg.get("out") or _data_root() / "dataset")
    M = int(cfg.get("M", 30))
    if M < 1:
        raise SystemExit("M must be >= 1")
    seed = int(cfg.get("seed", 0))
    q_diag = tuple(cfg.get("q_diag", DEFAULT_Q_DIAG))
    r_diag = tuple(cfg.get("r_diag", DEFAULT_R_DIAG))
    vspec = VariabilitySpec.from_json_dict(cfg["vspec"]) if "vspec" in cfg else VariabilitySpec()
    scenario = (
        ScenarioConfig.from_json_dict(cfg["scenario"])
        if "scenario" in cfg
        else ScenarioConfig()
    )
    y_land = float(cfg.get("y_land", 0.02))
    max_steps = int(cfg.get("max_steps", scenario.max_steps))

    sys = quadrotor_system()
    K = lqr_gain(sys, np.diag(q_diag), np.diag(r_diag))
    rng = np.random.default_rng(seed)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for j in range(M):
        x0 = sample_initial_state(scenario, rng)
        traj = synth_demonstrate(
            sys, K, vspec, x0, seed=seed * 100_000 + j,
            max_steps=max_steps, y_land=y_land,
        )
        name = f"demo_{j:04d}.json"
        with open(out / name, "w") as f:
            json.dump(traj.to_json_dict(), f, sort_keys=True)
        files.append(name)
    manifest = {
        "format": MANIFEST_FORMAT,
        "count": M,
        "seed": seed,
        "q_diag": list(q_diag),
        "r_diag": list(r_diag),
        "vspec": vspec.to_json_dict(),
        "scenario": scenario.to_json_dict(),
        "y_land": y_land,
        "max_steps": max_steps,
        "files": files,
    }
    with open(out / MANIFEST_NAME, "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
    print(f"wrote {M} demonstrations to {out}")
    return 0


def load_dataset(path) -> DemonstrationSet:
    """Load every demo_*.json in a dataset directory against the landing plant."""
    path = Path(path)
    sys = quadrotor_system()
    files = sorted(path.glob("demo_*.json"))
    if not files:
        raise FileNotFoundError(f"no demo_*.json files in {path}")
    trajs = tuple(Trajectory.load(p) for p in files)
    return DemonstrationSet(trajectories=trajs, system=sys)


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

_TRAIN_KEYS = (
    "dataset", "out", "method", "G", "seed", "eps_reg", "em_max_iter", "em_tol",
    "restarts", "tp_mode", "frames", "report",
)


def cmd_train(args) -> int:
    cfg = _merge(
        _load_config(args.config, _TRAIN_KEYS),
        args,
        ("dataset", "out", "method", "G", "seed"),
    )
    if "dataset" not in cfg:
        raise SystemExit("train requires --dataset")
    demos = load_dataset(cfg["dataset"])
    tc = pipeline.TrainConfig(
        method=cfg.get("method", "proposed"),
        G=int(cfg.get("G", 5)),
        eps_reg=float(cfg.get("eps_reg", 1e-6)),
        em_max_iter=int(cfg.get("em_max_iter", 200)),
        em_tol=float(cfg.get("em_tol", 1e-6)),
        seed=int(cfg.get("seed", 0)),
        restarts=int(cfg.get("restarts", 5)),
        tp_mode=cfg.get("tp_mode", "joint"),
        frames=cfg.get("frames", "quadrotor"),
    )
    model = pipeline.train(demos.system, demos, tc)
    out = Path(cfg.get("out") or _data_root() / f"model_{tc.method}.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(pipeline.serialize_model(model))

    report = {
        "method": tc.method,
        "n_demonstrations": len(demos),
        "gain": model.gain.K_hat.tolist(),
        "gain_stabilizing": model.gain.stabilizing,
        "data_rank": model.gain.data_rank,
    }
    if model.objective is not None:
        norm = model.objective.normalized()
        report["objective_normalized"] = {
            "Q": norm["Q"].tolist(),
            "R": norm["R"].tolist(),
            "S": norm["S"].tolist(),
            "alpha": model.objective.alpha,
        }
    if model.tpgmm is not None:
        report["mixture"] = {
            "G": model.tpgmm.n_components,
            "weights": model.tpgmm.weights.tolist(),
        }
    report_path = Path(cfg.get("report") or out.with_name(out.stem + "_report.json"))
    with open(report_path, "w") as f:
        json.dump(report, f, sort_keys=True, indent=2)
    print(f"wrote model to {out} and report to {report_path}")
    return 0


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

_PREDICT_KEYS = ("model", "test", "out", "N_h")


def cmd_predict(args) -> int:
    cfg = _merge(
        _load_config(args.config, _PREDICT_KEYS), args, ("model", "test", "out", "N_h")
    )
    for key in ("model", "test"):
        if key not in cfg:
            raise SystemExit(f"predict requires --{key}")
    model = pipeline.deserialize_model(Path(cfg["model"]).read_bytes())
    test = Trajectory.load(cfg["test"])
    N_h = int(cfg.get("N_h", 60))
    if N_h > test.n_steps:
        print(
            f"warning: horizon {N_h} exceeds test length {test.n_steps}; trimming",
            file=_sys.stderr,
        )
        N_h = test.n_steps
    pred = pipeline.predict_trajectory(model, test.states[0], N_h)
    out = Path(cfg.get("out") or _data_root() / "prediction.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        json.dump(pred.to_json_dict(), f, sort_keys=True)
    print(f"wrote {N_h}-step prediction to {out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

_EVAL_KEYS = ("models", "model", "dataset", "out", "N_h", "n_sigma")


def cmd_eval(args) -> int:
    cfg = _merge(
        _load_config(args.config, _EVAL_KEYS), args, ("dataset", "out", "N_h")
    )
    if getattr(args, "model", None):
        cfg["models"] = list(args.model)
    if "models" not in cfg and "model" in cfg:
        cfg["models"] = [cfg["model"]]
    if "models" not in cfg or "dataset" not in cfg:
        raise SystemExit("eval requires --model (one or more) and --dataset")
    models = [
        pipeline.deserialize_model(Path(p).read_bytes()) for p in cfg["models"]
    ]
    demos = load_dataset(cfg["dataset"])
    N_h = int(cfg.get("N_h", 60))
    n_sigma = float(cfg.get("n_sigma", 3.0))
    out = Path(cfg.get("out") or _data_root() / "eval")
    out.mkdir(parents=True, exist_ok=True)

    rmse_rows = []
    summary = {}
    for model in models:
        pos_list, vel_list = [], []
        for j, traj in enumerate(demos):
            horizon = min(N_h, traj.n_steps)
            pred = pipeline.predict_trajectory(model, traj.states[0], horizon)
            pos = pipeline.rmse(pred, traj, pipeline.POSITION_DIMS)
            vel = pipeline.rmse(pred, traj, pipeline.VELOCITY_DIMS)
            pos_list.append(pos)
            vel_list.append(vel)
            rmse_rows.append([model.method_tag, j, horizon, pos, vel])
        summary[model.method_tag] = {
            "rmse_position_mean": float(np.mean(pos_list)),
            "rmse_velocity_mean": float(np.mean(vel_list)),
            "n_test": len(demos),
        }
    with open(out / "rmse.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "test_index", "horizon", "rmse_position", "rmse_velocity"])
        w.writerows(rmse_rows)

    coverage_table = {}
    for model in models:
        if model.method_tag != "proposed":
            continue
        records = []
        for traj in demos:
            records.extend(pipeline.one_step_bounds(model, traj, n_sigma=n_sigma))
        cov = pipeline.coverage(records, n_sigma=n_sigma)
        coverage_table[model.method_tag] = {
            "per_axis": cov.tolist(),
            "n_steps": len(records),
            "n_sigma": n_sigma,
        }
        with open(out / "bounds.csv", "w", newline="") as f:
            w = csv.writer(f)
            m = len(records[0]["mu"])
            header = ["k"]
            for i in range(m):
                header += [f"w{i}", f"mu{i}", f"sigma{i}"]
            w.writerow(header)
            for rec in records:
                row = [rec["k"]]
                for i in range(m):
                    row += [rec["w_hat"][i], rec["mu"][i],
                            float(np.sqrt(max(rec["sigma_diag"][i], 0.0)))]
                w.writerow(row)

    metrics = {"rmse": summary, "coverage": coverage_table, "N_h": N_h}
    with open(out / "metrics.json", "w") as f:
        json.dump(metrics, f, sort_keys=True, indent=2)
    for tag, vals in summary.items():
        print(
            f"{tag}: position RMSE {vals['rmse_position_mean']:.4f}, "
            f"velocity RMSE {vals['rmse_velocity_mean']:.4f}"
        )
    for tag, cov in coverage_table.items():
        print(f"{tag}: {n_sigma:g}-sigma coverage {cov['per_axis']}")
    print(f"wrote metrics to {out}")
    return 0


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

_SERVE_KEYS = ("port", "host", "data_dir", "static_dir", "scenario")


def cmd_serve(args) -> int:
    cfg = _merge(
        _load_config(args.config, _SERVE_KEYS), args, ("port", "host", "data_dir", "static_dir")
    )
    import uvicorn

    from .server import create_app

    scenario = (
        ScenarioConfig.from_json_dict(cfg["scenario"]) if "scenario" in cfg else None
    )
    app = create_app(
        data_dir=Path(cfg.get("data_dir") or _data_root() / "uploads"),
        scenario=scenario,
        static_dir=cfg.get("static_dir"),
    )
    uvicorn.run(app, host=cfg.get("host", "127.0.0.1"), port=int(cfg.get("port", 8000)))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hbm",
        description="Human behavior modeling: objective recovery plus learned variability.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic demonstration dataset")
    sp.add_argument("--config", help="JSON config file")
    sp.add_argument("--out", help="output dataset directory")
    sp.add_argument("--M", type=int, help="number of demonstrations")
    sp.add_argument("--seed", type=int, help="RNG seed")
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("train", help="train a behavior model from a dataset")
    tp.add_argument("--config", help="JSON config file")
    tp.add_argument("--dataset", help="dataset directory")
    tp.add_argument("--out", help="output model file")
    tp.add_argument("--method", choices=pipeline.METHODS)
    tp.add_argument("--G", type=int, help="number of mixture components")
    tp.add_argument("--seed", type=int)
    tp.set_defaults(func=cmd_train)

    pp = sub.add_parser("predict", help="predict a trajectory from an initial state")
    pp.add_argument("--config", help="JSON config file")
    pp.add_argument("--model", help="model file")
    pp.add_argument("--test", help="test trajectory file (initial state only is used)")
    pp.add_argument("--out", help="output prediction file")
    pp.add_argument("--N_h", type=int, help="prediction horizon in steps")
    pp.set_defaults(func=cmd_predict)

    ep = sub.add_parser("eval", help="evaluate models on a test dataset")
    ep.add_argument("--config", help="JSON config file")
    ep.add_argument("--model", action="append", help="model file (repeatable)")
    ep.add_argument("--dataset", help="test dataset directory")
    ep.add_argument("--out", help="output directory for metrics and CSVs")
    ep.add_argument("--N_h", type=int, help="prediction horizon in steps")
    ep.set_defaults(func=cmd_eval)

    vp = sub.add_parser("serve", help="run the demonstration ingestion service")
    vp.add_argument("--config", help="JSON config file")
    vp.add_argument("--port", type=int)
    vp.add_argument("--host")
    vp.add_argument("--data-dir", dest="data_dir")
    vp.add_argument("--static-dir", dest="static_dir")
    vp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
