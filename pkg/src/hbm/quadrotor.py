"""3-DOF quadrotor landing benchmark: plant, scenario sampling, synthetic
demonstrators with configurable ground-truth variability, and the two landing
task frames (initial state and pad)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnstableRollout
from .lti import LtiSystem, Trajectory
from .tp import TaskFrame

N_STATES = 6  # [x, y, phi, xdot, ydot, phidot]
N_INPUTS = 2  # [angular acceleration, thrust]
INPUT_LO, INPUT_HI = -1.0, 1.0


@dataclass(frozen=True)
class QuadrotorParams:
    dt: float = 0.05
    g: float = 9.8
    k1: float = -0.1
    k2: float = -1.0
    k3: float = -30.0
    mass: float = 0.25
    Ix: float = 0.01

    def __post_init__(self):
        if min(self.dt, self.g, self.mass, self.Ix) <= 0:
            raise ValueError("dt, g, mass, Ix must be positive")
        if max(self.k1, self.k2, self.k3) >= 0:
            raise ValueError("stabilizer constants k1..k3 must be negative")


def quadrotor_system(params: QuadrotorParams = QuadrotorParams()) -> LtiSystem:
    """Linearized landing plant: A = I6 + dt * [kinematics | stabilizer]."""
    p = params
    inner = np.array(
        [
            [0, 0, 0, 1, 0, 0],
            [0, 0, 0, 0, 1, 0],
            [0, 0, 0, 0, 0, 1],
            [0, 0, p.g, 0, 0, 0],
            [0, 0, 0, 0, p.k1, 0],
            [0, 0, p.k2, 0, 0, p.k3],
        ],
        dtype=float,
    )
    A = np.eye(N_STATES) + p.dt * inner
    B = p.dt * np.array(
        [
            [0, 0],
            [0, 0],
            [0, 0],
            [0, 0],
            [0, 1.0 / p.mass],
            [1.0 / p.Ix, 0],
        ]
    )
    return LtiSystem(A=A, B=B, dt=p.dt)


@dataclass(frozen=True)
class ScenarioConfig:
    x_domain: tuple = (-3.0, 3.0)
    y_domain: tuple = (0.0, 3.5)
    x0_range: tuple = (-2.0, 2.0)
    y0_range: tuple = (2.5, 3.0)
    pad_halfwidth: float = 0.5
    max_speed: float = 0.1  # m/s at touchdown
    max_attitude_deg: float = 5.0
    max_steps: int = 600

    def __post_init__(self):
        if not (
            self.x_domain[0] <= self.x0_range[0] <= self.x0_range[1] <= self.x_domain[1]
            and self.y_domain[0] <= self.y0_range[0] <= self.y0_range[1] <= self.y_domain[1]
        ):
            raise ValueError("initial ranges must lie inside the position domain")

    def to_json_dict(self) -> dict:
        return {
            "x_domain": list(self.x_domain),
            "y_domain": list(self.y_domain),
            "x0_range": list(self.x0_range),
            "y0_range": list(self.y0_range),
            "pad_halfwidth": self.pad_halfwidth,
            "max_speed": self.max_speed,
            "max_attitude_deg": self.max_attitude_deg,
            "max_steps": self.max_steps,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(
            x_domain=tuple(d["x_domain"]),
            y_domain=tuple(d["y_domain"]),
            x0_range=tuple(d["x0_range"]),
            y0_range=tuple(d["y0_range"]),
            pad_halfwidth=float(d["pad_halfwidth"]),
            max_speed=float(d["max_speed"]),
            max_attitude_deg=float(d["max_attitude_deg"]),
            max_steps=int(d["max_steps"]),
        )


@dataclass(frozen=True)
class VariabilitySpec:
    """Ground-truth variability injected by the synthetic demonstrator.

    kinds:
      none              -- w = 0
      gaussian_constant -- w ~ N(mean, cov)
      linear_state      -- w = L x + v, v ~ N(0, cov)
      gmm_state_dependent -- altitude-gated blend of two mean offsets plus
                             Gaussian noise: w = s(y) mean_hi + (1-s(y)) mean_lo + v
    """

    kind: str = "none"
    mean: tuple = (0.0, 0.0)
    cov: tuple = ((0.0, 0.0), (0.0, 0.0))
    L: tuple = ((0.0,) * N_STATES, (0.0,) * N_STATES)
    mean_lo: tuple = (0.0, 0.0)
    mean_hi: tuple = (0.0, 0.0)
    y_split: float = 1.5
    gate_width: float = 0.3

    def __post_init__(self):
        if self.kind not in ("none", "gaussian_constant", "linear_state", "gmm_state_dependent"):
            raise ValueError(f"unknown variability kind {self.kind!r}")
        cov = np.array(self.cov, dtype=float)
        if np.min(np.linalg.eigvalsh((cov + cov.T) / 2)) < -1e-12:
            raise ValueError("cov must be positive semidefinite")

    def mean_field(self, x) -> np.ndarray:
        """Deterministic part of w at state x."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros(N_INPUTS)
        if self.kind == "gaussian_constant":
            return np.array(self.mean, dtype=float)
        if self.kind == "linear_state":
            return np.array(self.L, dtype=float) @ x
        s = 1.0 / (1.0 + np.exp(-(x[1] - self.y_split) / self.gate_width))
        return s * np.array(self.mean_hi, float) + (1 - s) * np.array(self.mean_lo, float)

    def sample(self, x, rng) -> np.ndarray:
        w = self.mean_field(x)
        cov = np.array(self.cov, dtype=float)
        if self.kind != "none" and np.any(cov):
            w = w + rng.multivariate_normal(np.zeros(N_INPUTS), cov)
        return w

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mean": list(self.mean),
            "cov": np.array(self.cov, dtype=float).tolist(),
            "L": np.array(self.L, dtype=float).tolist(),
            "mean_lo": list(self.mean_lo),
            "mean_hi": list(self.mean_hi),
            "y_split": self.y_split,
            "gate_width": self.gate_width,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "VariabilitySpec":
        return cls(
            kind=d["kind"],
            mean=tuple(d.get("mean", (0.0, 0.0))),
            cov=tuple(map(tuple, d.get("cov", ((0.0, 0.0), (0.0, 0.0))))),
            L=tuple(map(tuple, d.get("L", ((0.0,) * N_STATES,) * N_INPUTS))),
            mean_lo=tuple(d.get("mean_lo", (0.0, 0.0))),
            mean_hi=tuple(d.get("mean_hi", (0.0, 0.0))),
            y_split=float(d.get("y_split", 1.5)),
            gate_width=float(d.get("gate_width", 0.3)),
        )


def sample_initial_state(config: ScenarioConfig, rng) -> np.ndarray:
    """Uniform initial position inside the declared ranges, other states zero."""
    x0 = np.zeros(N_STATES)
    x0[0] = rng.uniform(*config.x0_range)
    x0[1] = rng.uniform(*config.y0_range)
    return x0


# Default ground-truth objective for synthesis. Weights were tuned so the
# noiseless closed loop from mid-range initial conditions touches down in
# roughly 12 s of simulated time (spending most of the episode descending).
DEFAULT_Q_DIAG = (0.2, 0.11, 1.0, 0.6, 0.6, 0.1)
DEFAULT_R_DIAG = (6.0, 6.0)
# The second strategy population is identical except a 46x larger attitude weight.
ATTITUDE_WEIGHT_FACTOR = 46.0

# Base objective for the two-strategy discrimination experiment. With the
# default landing weights the recovered normalized attitude weight sits near
# its feasibility floor for both populations and the contrast washes out;
# these weights (cheap roll authority, dominant horizontal-velocity cost)
# keep the solution off the floor so the recovered attitude weights of the
# two populations separate by more than an order of magnitude, while the
# closed loop still touches down well inside the episode budget without
# saturating the inputs.
DISCRIMINATION_Q_DIAG = (0.012, 0.03, 0.09, 2.3, 0.47, 0.05)
DISCRIMINATION_R_DIAG = (0.011, 3.1)


def strategy_objective(strategy: str = "cs1", q_diag=DISCRIMINATION_Q_DIAG,
                       r_diag=DISCRIMINATION_R_DIAG):
    """(Q, R) for the two synthetic control-strategy populations."""
    Q = np.diag(q_diag).astype(float)
    R = np.diag(r_diag).astype(float)
    if strategy == "cs2":
        Q[2, 2] *= ATTITUDE_WEIGHT_FACTOR
    elif strategy != "cs1":
        raise ValueError(f"unknown strategy {strategy!r}")
    return Q, R


def synth_demonstrate(
    sys: LtiSystem,
    K_true,
    vspec: VariabilitySpec,
    x0,
    seed: int = 0,
    max_steps: int = 600,
    y_land: float = 0.02,
    domain_halfwidth: float = 3.0,
) -> Trajectory:
    """Closed-loop episode u = clamp(K x + w) ending at touchdown or max steps."""
    K_true = np.asarray(K_true, dtype=float)
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=float).reshape(sys.n)
    states, inputs = [x], []
    saturated = 0
    reason = "max_steps"
    for _ in range(max_steps):
        u_raw = K_true @ x + vspec.sample(x, rng)
        u = np.clip(u_raw, INPUT_LO, INPUT_HI)
        saturated += int(np.any(u != u_raw))
        inputs.append(u)
        x = sys.A @ x + sys.B @ u
        states.append(x)
        if np.max(np.abs(x[:2])) > 10 * domain_halfwidth:
            raise UnstableRollout("episode diverged far outside the position domain")
        if x[1] <= y_land:
            reason = "touchdown"
            break
    return Trajectory(
        states=np.array(states),
        inputs=np.array(inputs),
        dt=sys.dt,
        meta={
            "vspec": vspec.kind,
            "seed": str(seed),
            "truncation": reason,
            "saturated_steps": str(saturated),
        },
    )


def landing_outcome(traj: Trajectory, config: ScenarioConfig = ScenarioConfig()) -> dict:
    """Touchdown verdict from the final recorded state."""
    if traj.states.size == 0:
        raise ValueError("empty trajectory")
    xf = traj.states[-1]
    speed = float(np.hypot(xf[3], xf[4]))
    attitude_deg = float(np.degrees(abs(xf[2])))
    on_pad = bool(abs(xf[0]) <= config.pad_halfwidth and xf[1] <= 0.05)
    landed = bool(
        speed < config.max_speed
        and attitude_deg < config.max_attitude_deg
        and on_pad
    )
    return {
        "landed": landed,
        "final_speed": speed,
        "final_attitude_deg": attitude_deg,
        "on_pad": on_pad,
    }


def build_frames(x0, x_final=None, phi_final: float = 0.0) -> list:
    """The two landing task frames: start frame (identity transform, offset at
    the initial state) and landing frame (position block rotated by the final
    attitude, offset at the final state)."""
    x0 = np.asarray(x0, dtype=float).reshape(N_STATES)
    x_final = (
        np.zeros(N_STATES)
        if x_final is None
        else np.asarray(x_final, dtype=float).reshape(N_STATES)
    )
    b1 = np.concatenate([x0, np.zeros(N_INPUTS)])
    frame1 = TaskFrame(T=np.eye(N_STATES + N_INPUTS), b=b1, split=N_STATES)
    c, s = np.cos(phi_final), np.sin(phi_final)
    T2 = np.eye(N_STATES + N_INPUTS)
    T2[0:2, 0:2] = [[c, -s], [s, c]]
    b2 = np.concatenate([x_final, np.zeros(N_INPUTS)])
    frame2 = TaskFrame(T=T2, b=b2, split=N_STATES)
    return [frame1, frame2]


def frames_for_trajectory(traj: Trajectory) -> list:
    """Training-time frames from a demo's own initial and final states."""
    return build_frames(traj.states[0], traj.states[-1], float(traj.states[-1][2]))
