"""Discrete-time LTI plants, Riccati/LQR solvers, rollouts, and trajectory containers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError

_PBH_TOL = 1e-9
_DARE_DIFF_TOL = 1e-12
_DARE_MAX_ITER = 10_000


def spectral_radius(M) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _as_locked(a, shape=None):
    a = np.array(a, dtype=float)
    if shape is not None and a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LtiSystem:
    """x_{k+1} = A x_k + B u_k with time step dt, B full column rank, (A, B) stabilizable."""

    A: np.ndarray
    B: np.ndarray
    dt: float

    def __post_init__(self):
        A = _as_locked(self.A)
        n = A.shape[0]
        if A.ndim != 2 or A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        B = _as_locked(self.B)
        if B.ndim != 2 or B.shape[0] != n:
            raise ValueError(f"B must be {n}xm, got {B.shape}")
        m = B.shape[1]
        if not (0 < m < n):
            raise ValueError(f"need 0 < m < n, got n={n}, m={m}")
        if np.linalg.matrix_rank(B, tol=_PBH_TOL) != m:
            raise ValueError("B must have full column rank")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        # PBH test on every unstable mode
        for lam in np.linalg.eigvals(A):
            if abs(lam) >= 1.0 - _PBH_TOL:
                pbh = np.hstack([A - lam * np.eye(n), B])
                if np.linalg.matrix_rank(pbh, tol=_PBH_TOL) < n:
                    raise ValueError(f"(A, B) not stabilizable: mode {lam} uncontrollable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """Recorded state/input sequence: states x_0..x_N, inputs u_0..u_{N-1}."""

    states: np.ndarray
    inputs: np.ndarray
    dt: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        states = _as_locked(self.states)
        inputs = _as_locked(self.inputs)
        if states.ndim != 2 or inputs.ndim != 2:
            raise ValueError("states and inputs must be 2-D arrays")
        if len(states) != len(inputs) + 1:
            raise ValueError(
                f"length mismatch: {len(states)} states vs {len(inputs)} inputs"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def n_steps(self) -> int:
        return len(self.inputs)

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def check_input_box(self, lo: float = -1.0, hi: float = 1.0, atol: float = 1e-9):
        if self.inputs.size and (
            self.inputs.min() < lo - atol or self.inputs.max() > hi + atol
        ):
            raise ValueError(f"inputs leave the admissible box [{lo}, {hi}]")

    def to_json_dict(self) -> dict:
        return {
            "dt": self.dt,
            "states": self.states.tolist(),
            "inputs": self.inputs.tolist(),
            "meta": {str(k): str(v) for k, v in self.meta.items()},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Trajectory":
        return cls(
            states=np.array(d["states"], dtype=float),
            inputs=np.array(d["inputs"], dtype=float),
            dt=float(d["dt"]),
            meta=dict(d.get("meta", {})),
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f)

    @classmethod
    def load(cls, path) -> "Trajectory":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


@dataclass(frozen=True)
class DemonstrationSet:
    """M >= 1 trajectories sharing one plant (identical dims and dt)."""

    trajectories: tuple
    system: LtiSystem

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise ValueError("need at least one trajectory")
        for t in trajs:
            if t.state_dim != self.system.n or t.input_dim != self.system.m:
                raise ValueError("trajectory dimensions do not match the system")
            if abs(t.dt - self.system.dt) > 1e-12:
                raise ValueError("trajectory dt does not match the system")
        object.__setattr__(self, "trajectories", trajs)

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


def is_stabilizing(sys: LtiSystem, K) -> bool:
    """True iff the closed loop A + B K has spectral radius < 1."""
    K = np.asarray(K, dtype=float)
    if K.shape != (sys.m, sys.n):
        raise ValueError(f"K must be {sys.m}x{sys.n}, got {K.shape}")
    return spectral_radius(sys.A + sys.B @ K) < 1.0


def _check_dare_inputs(sys, Q, R, S):
    n, m = sys.n, sys.m
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    S = np.zeros((n, m)) if S is None else np.asarray(S, dtype=float)
    if Q.shape != (n, n) or R.shape != (m, m) or S.shape != (n, m):
        raise ValueError("objective matrix dimensions do not match the system")
    if np.linalg.norm(R - R.T) > 1e-8:
        raise ValueError("R must be symmetric")
    if np.min(np.linalg.eigvalsh((R + R.T) / 2)) <= 0:
        raise ValueError("R must be positive definite")
    aug = np.block([[Q, S], [S.T, R]])
    if np.min(np.linalg.eigvalsh((aug + aug.T) / 2)) < -1e-8:
        raise ValueError("[[Q, S], [S^T, R]] must be positive semidefinite")
    return Q, R, S


def _dare_rhs(A, B, Q, R, S, P):
    G = R + B.T @ P @ B
    W = A.T @ P @ B + S
    return A.T @ P @ A - W @ np.linalg.solve(G, W.T) + Q


def _dare_doubling(A, B, Q, R, S, max_iter=100):
    # Eliminate the cross term, then run the structure-preserving doubling iteration.
    Rinv = np.linalg.inv(R)
    Ah = A - B @ Rinv @ S.T
    Qh = Q - S @ Rinv @ S.T
    G = B @ Rinv @ B.T
    H = (Qh + Qh.T) / 2
    Ak = Ah
    for _ in range(max_iter):
        W = np.linalg.inv(np.eye(len(A)) + G @ H)
        A_next = Ak @ W @ Ak
        G_next = G + Ak @ W @ G @ Ak.T
        H_next = H + Ak.T @ H @ W @ Ak
        G_next = (G_next + G_next.T) / 2
        H_next = (H_next + H_next.T) / 2
        diff = np.linalg.norm(H_next - H, ord="fro")
        Ak, G, H = A_next, G_next, H_next
        if diff <= 1e-14 * max(1.0, np.linalg.norm(H, ord="fro")):
            return H
    raise ConvergenceError("doubling iteration did not converge")


def solve_dare(sys: LtiSystem, Q, R, S=None) -> np.ndarray:
    """Stabilizing solution P of the discrete-time algebraic Riccati equation.

    Fixed-point iteration from P = Q with re-symmetrization each step; falls back
    to a structure-preserving doubling iteration if progress stalls.
    """
    Q, R, S = _check_dare_inputs(sys, Q, R, S)
    A, B = sys.A, sys.B
    P = (Q + Q.T) / 2
    prev_diff = np.inf
    for it in range(_DARE_MAX_ITER):
        P_next = _dare_rhs(A, B, Q, R, S, P)
        P_next = (P_next + P_next.T) / 2
        diff = np.linalg.norm(P_next - P, ord="fro")
        P = P_next
        if diff <= _DARE_DIFF_TOL * max(1.0, np.linalg.norm(P, ord="fro")):
            break
        if it and it % 200 == 0:
            if diff > 0.5 * prev_diff:  # stalling: linear rate too slow
                P = _dare_doubling(A, B, Q, R, S)
                break
            prev_diff = diff
    else:
        raise ConvergenceError("DARE fixed-point iteration exhausted its budget")
    # residual tolerance is relative to ||P||: recovered objectives can scale P
    # far beyond unity, where an absolute 1e-8 is below machine precision
    scale = max(1.0, np.linalg.norm(P, ord="fro"))
    residual = np.linalg.norm(_dare_rhs(A, B, Q, R, S, P) - P, ord="fro")
    if residual > 1e-8 * scale:
        # one doubling pass cleans up borderline fixed-point exits
        P = _dare_doubling(A, B, Q, R, S)
        scale = max(1.0, np.linalg.norm(P, ord="fro"))
        residual = np.linalg.norm(_dare_rhs(A, B, Q, R, S, P) - P, ord="fro")
        if residual > 1e-8 * scale:
            raise ConvergenceError(f"DARE residual {residual:.2e} above tolerance")
    return (P + P.T) / 2


def lqr_gain(sys: LtiSystem, Q, R, S=None) -> np.ndarray:
    """Infinite-horizon LQR gain K = -(R + B'PB)^-1 (B'PA + S')."""
    Q, R, S = _check_dare_inputs(sys, Q, R, S)
    P = solve_dare(sys, Q, R, S)
    G = R + sys.B.T @ P @ sys.B
    K = -np.linalg.solve(G, sys.B.T @ P @ sys.A + S.T)
    assert is_stabilizing(sys, K), "LQR gain failed to stabilize a stabilizable plant"
    return K


def rollout(sys: LtiSystem, x0, policy, N: int, meta: dict | None = None) -> Trajectory:
    """Propagate x_{k+1} = A x_k + B u_k for N steps with u_k = policy(k, x_k)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    x = np.asarray(x0, dtype=float).reshape(sys.n)
    states = [x]
    inputs = []
    for k in range(N):
        u = np.asarray(policy(k, x), dtype=float).reshape(-1)
        if u.shape != (sys.m,):
            raise ValueError(f"policy returned shape {u.shape}, expected ({sys.m},)")
        inputs.append(u)
        x = sys.A @ x + sys.B @ u
        states.append(x)
    return Trajectory(
        states=np.array(states), inputs=np.array(inputs), dt=sys.dt, meta=meta or {}
    )


def pseudo_inverse(M) -> np.ndarray:
    """Moore-Penrose pseudo-inverse (SVD, relative singular-value cutoff 1e-12)."""
    M = np.asarray(M, dtype=float)
    return np.linalg.pinv(M, rcond=1e-12)
