"""Training orchestration, the three trajectory predictors, and evaluation
(RMSE, one-step variability bounds, coverage)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NotStabilizing
from .gmm import moment_merge
from .ioc import GainEstimate, TaskObjective, estimate_gain, recover_objective
from .lti import DemonstrationSet, LtiSystem, Trajectory
from .quadrotor import build_frames, frames_for_trajectory
from .tp import (
    TaskFrame,
    TpGmm,
    VariabilityModel,
    extract_variability,
    fit_tp_gmm,
    merge_frames,
)

MODEL_FORMAT = "hbm-model/1"
METHODS = ("proposed", "ioc_only", "gmr_only")

POSITION_DIMS = (0, 1)
VELOCITY_DIMS = (3, 4)


@dataclass(frozen=True)
class TrainConfig:
    method: str = "proposed"
    G: int = 5
    eps_reg: float = 1e-6
    em_max_iter: int = 200
    em_tol: float = 1e-6
    seed: int = 0
    restarts: int = 5
    tp_mode: str = "joint"
    frames: str = "quadrotor"  # "quadrotor" (start + pad frames) or "identity"
    input_lo: float = -1.0
    input_hi: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.frames not in ("quadrotor", "identity"):
            raise ValueError("frames must be 'quadrotor' or 'identity'")

    def training_frames(self, traj: Trajectory) -> list:
        if self.frames == "quadrotor":
            return frames_for_trajectory(traj)
        return [TaskFrame.identity(traj.state_dim, traj.input_dim)]

    def prediction_frames(self, x0, n: int, m: int) -> list:
        if self.frames == "quadrotor":
            return build_frames(x0)  # landing frame at the pad, zero attitude
        return [TaskFrame.identity(n, m)]


@dataclass(frozen=True)
class BehaviorModel:
    """Trained bundle: plant, gain, objective, and variability mixture."""

    system: LtiSystem
    method_tag: str
    config: TrainConfig
    gain: GainEstimate | None = None
    objective: TaskObjective | None = None
    tpgmm: TpGmm | None = None

    def __post_init__(self):
        if self.method_tag in ("proposed", "ioc_only"):
            if self.gain is None or not self.gain.stabilizing:
                raise ValueError(f"{self.method_tag} model requires a stabilizing gain")
        if self.method_tag in ("proposed", "gmr_only") and self.tpgmm is None:
            raise ValueError(f"{self.method_tag} model requires a fitted mixture")

    def variability_for(self, x0) -> VariabilityModel:
        """Merge the task-parameterized mixture for a new situation anchored at x0."""
        frames = self.config.prediction_frames(x0, self.system.n, self.system.m)
        merged = merge_frames(self.tpgmm, frames)
        n = self.system.n
        return VariabilityModel(
            gmm=merged,
            input_dims=np.arange(n),
            output_dims=np.arange(n, n + self.system.m),
            tpgmm=self.tpgmm,
            frames=tuple(frames),
        )


@dataclass(frozen=True)
class PredictedTrajectory:
    states: np.ndarray  # (N_h + 1, n)
    inputs: np.ndarray  # (N_h, m)
    input_covs: np.ndarray  # (N_h, m, m)
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.inputs)

    def to_json_dict(self) -> dict:
        return {
            "states": self.states.tolist(),
            "inputs": self.inputs.tolist(),
            "input_covs": self.input_covs.tolist(),
            "meta": self.meta,
        }


def train(sys: LtiSystem, demos: DemonstrationSet, config: TrainConfig) -> BehaviorModel:
    """Run the full modeling pipeline for the configured method."""
    gain = estimate_gain(sys, demos)
    objective = None
    tpgmm = None
    if config.method in ("proposed", "ioc_only"):
        if not gain.stabilizing:
            raise NotStabilizing("estimated gain is destabilizing; cannot train")
        objective = recover_objective(sys, gain.K_hat)
    if config.method in ("proposed", "gmr_only"):
        if config.method == "proposed":
            outputs = extract_variability(demos, gain)
        else:  # encode the raw input directly (GMR-only baseline)
            outputs = [traj.inputs for traj in demos]
        xi_data = [
            np.hstack([traj.states[:-1], w]) for traj, w in zip(demos, outputs)
        ]
        frames = [config.training_frames(traj) for traj in demos]
        tpgmm, _ = fit_tp_gmm(
            xi_data,
            frames,
            config.G,
            eps_reg=config.eps_reg,
            max_iter=config.em_max_iter,
            tol=config.em_tol,
            seed=config.seed,
            restarts=config.restarts,
            mode=config.tp_mode,
        )
    return BehaviorModel(
        system=sys,
        method_tag=config.method,
        config=config,
        gain=gain,
        objective=objective,
        tpgmm=tpgmm,
    )


def predict_trajectory(model: BehaviorModel, x0, N_h: int) -> PredictedTrajectory:
    """Propagate the predicted inputs through the plant for N_h steps."""
    sys = model.system
    x = np.asarray(x0, dtype=float).reshape(sys.n)
    vm = model.variability_for(x) if model.tpgmm is not None else None
    lo, hi = model.config.input_lo, model.config.input_hi
    states = [x]
    inputs, input_covs = [], []
    clamped, far_field = [], []
    m = sys.m
    for k in range(N_h):
        if model.method_tag == "ioc_only":
            u = model.gain.K_hat @ x
            cov = np.zeros((m, m))
        else:
            weights, conds, ff = vm.condition(x)
            merged = moment_merge(weights, conds)
            if ff:
                far_field.append(k)
            if model.method_tag == "proposed":
                u = model.gain.K_hat @ x + merged.mean
            else:  # gmr_only: the mixture encodes u directly
                u = merged.mean
            cov = merged.cov
        u_clamped = np.clip(u, lo, hi)
        if np.any(u_clamped != u):
            clamped.append(k)
        inputs.append(u_clamped)
        input_covs.append(cov)
        x = sys.A @ x + sys.B @ u_clamped
        states.append(x)
    return PredictedTrajectory(
        states=np.array(states),
        inputs=np.array(inputs),
        input_covs=np.array(input_covs),
        meta={"clamped_steps": clamped, "far_field_steps": far_field,
              "method": model.method_tag},
    )


def rmse(predicted: PredictedTrajectory, truth: Trajectory, dims) -> float:
    """sqrt(sum_{k=1}^{N_h} |x_hat_k - x_k|^2 / N_h) restricted to dims."""
    N_h = predicted.horizon
    if len(truth.states) < N_h + 1:
        raise ValueError("truth trajectory shorter than the prediction horizon")
    dims = np.asarray(dims, dtype=int)
    diff = predicted.states[1 : N_h + 1][:, dims] - truth.states[1 : N_h + 1][:, dims]
    return float(np.sqrt((diff**2).sum() / N_h))


def one_step_bounds(model: BehaviorModel, test_traj: Trajectory, n_sigma: float = 3.0):
    """Per-step variability residuals against the one-step-ahead GMR bound.

    The state is conditioned one step ahead of the recorded data: the plant is
    applied to the recorded (x_{k-1}, u_{k-1}), and the residual at k is
    compared with mu(x_k) +/- n_sigma * sqrt(diag(Sigma(x_k))).
    """
    if model.method_tag != "proposed":
        raise ValueError("one-step bounds require a proposed-method model")
    sys = model.system
    vm = model.variability_for(test_traj.states[0])
    K = model.gain.K_hat
    records = []
    for k in range(1, test_traj.n_steps):
        x_pred = sys.A @ test_traj.states[k - 1] + sys.B @ test_traj.inputs[k - 1]
        weights, conds, ff = vm.condition(x_pred)
        merged = moment_merge(weights, conds)
        w_hat = test_traj.inputs[k] - K @ test_traj.states[k]
        band = n_sigma * np.sqrt(np.maximum(np.diag(merged.cov), 0.0))
        inside = np.abs(w_hat - merged.mean) <= band
        records.append(
            {
                "k": k,
                "w_hat": w_hat,
                "mu": merged.mean,
                "sigma_diag": np.diag(merged.cov).copy(),
                "inside": inside,
                "far_field": ff,
            }
        )
    return records


def coverage(bounds_report, n_sigma: float = 3.0) -> np.ndarray:
    """Per-axis fraction of steps whose residual lies inside the n-sigma band."""
    if not bounds_report:
        raise ValueError("empty bounds report")
    inside = []
    for rec in bounds_report:
        band = n_sigma * np.sqrt(np.maximum(rec["sigma_diag"], 0.0))
        inside.append(np.abs(rec["w_hat"] - rec["mu"]) <= band)
    return np.mean(inside, axis=0)


# ---------------------------------------------------------------------------
# Model bundle serialization
# ---------------------------------------------------------------------------


def _gain_to_json(g: GainEstimate) -> dict:
    return {
        "K_hat": g.K_hat.tolist(),
        "lsq_residual": g.lsq_residual,
        "data_rank": g.data_rank,
        "stabilizing": g.stabilizing,
    }


def _gain_from_json(d: dict) -> GainEstimate:
    return GainEstimate(
        K_hat=np.array(d["K_hat"], dtype=float),
        lsq_residual=float(d["lsq_residual"]),
        data_rank=int(d["data_rank"]),
        stabilizing=bool(d["stabilizing"]),
    )


def serialize_model(model: BehaviorModel) -> bytes:
    doc = {
        "format": MODEL_FORMAT,
        "method_tag": model.method_tag,
        "system": {
            "A": model.system.A.tolist(),
            "B": model.system.B.tolist(),
            "dt": model.system.dt,
        },
        "config": asdict(model.config),
        "gain": _gain_to_json(model.gain) if model.gain is not None else None,
        "objective": model.objective.to_json_dict() if model.objective else None,
        "tpgmm": model.tpgmm.to_json_dict() if model.tpgmm is not None else None,
    }
    return json.dumps(doc, sort_keys=True).encode()


def deserialize_model(payload: bytes) -> BehaviorModel:
    doc = json.loads(payload)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    sys = LtiSystem(
        A=np.array(doc["system"]["A"], dtype=float),
        B=np.array(doc["system"]["B"], dtype=float),
        dt=float(doc["system"]["dt"]),
    )
    return BehaviorModel(
        system=sys,
        method_tag=doc["method_tag"],
        config=TrainConfig(**doc["config"]),
        gain=_gain_from_json(doc["gain"]) if doc.get("gain") else None,
        objective=TaskObjective.from_json_dict(doc["objective"])
        if doc.get("objective")
        else None,
        tpgmm=TpGmm.from_json_dict(doc["tpgmm"]) if doc.get("tpgmm") else None,
    )
