"""Inverse optimal control: gain estimation from demonstrations and LMI-constrained
recovery of a consistent LQR objective {Q, R, S}."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    Infeasible,
    InsufficientData,
    NotStabilizing,
    RankDeficientWarning,
    SolverFailure,
)
from .lti import DemonstrationSet, LtiSystem, Trajectory, is_stabilizing, pseudo_inverse


@dataclass(frozen=True)
class GainEstimate:
    """Least-squares estimate of the task-objective-based control gain."""

    K_hat: np.ndarray
    lsq_residual: float
    data_rank: int
    stabilizing: bool


@dataclass(frozen=True)
class TaskObjective:
    """Recovered LQR objective with its Riccati solution and LMI scale alpha."""

    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    P: np.ndarray
    alpha: float

    def __post_init__(self):
        for name in ("Q", "R", "S", "P"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        tol = 1e-6
        aug = self.augmented()
        eigs = np.linalg.eigvalsh(aug)
        if eigs.min() < 1.0 - tol or eigs.max() > self.alpha + tol:
            raise ValueError("augmented objective eigenvalues leave [1, alpha]")
        if np.min(np.linalg.eigvalsh((self.P + self.P.T) / 2)) < -1e-8:
            raise ValueError("P must be positive semidefinite")
        if np.min(np.linalg.eigvalsh((self.R + self.R.T) / 2)) <= 0:
            raise ValueError("R must be positive definite")
        if self.alpha < 1.0 - 1e-8:
            raise ValueError("alpha must be >= 1")

    def augmented(self) -> np.ndarray:
        aug = np.block([[self.Q, self.S], [self.S.T, self.R]])
        return (aug + aug.T) / 2

    def normalized(self) -> dict:
        """{Q, R, S} divided by the largest eigenvalue of the augmented matrix
        (reporting convention)."""
        scale = float(np.max(np.linalg.eigvalsh(self.augmented())))
        return {"Q": self.Q / scale, "R": self.R / scale, "S": self.S / scale,
                "scale": scale}

    def to_json_dict(self) -> dict:
        return {
            "Q": self.Q.tolist(),
            "R": self.R.tolist(),
            "S": self.S.tolist(),
            "P": self.P.tolist(),
            "alpha": self.alpha,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TaskObjective":
        return cls(
            Q=np.array(d["Q"], dtype=float),
            R=np.array(d["R"], dtype=float),
            S=np.array(d["S"], dtype=float),
            P=np.array(d["P"], dtype=float),
            alpha=float(d["alpha"]),
        )


def stack_snapshots(demos: DemonstrationSet):
    """Stacked data matrices X (states 0..N-1) and X' (states 1..N), one column per step."""
    cols, cols_next = [], []
    for traj in demos:
        if traj.n_steps < 1:
            raise InsufficientData("every trajectory must contain at least one step")
        cols.append(traj.states[:-1].T)
        cols_next.append(traj.states[1:].T)
    return np.hstack(cols), np.hstack(cols_next)


def estimate_gain(sys: LtiSystem, demos: DemonstrationSet) -> GainEstimate:
    """Least-squares gain: A_tilde = X' X^+, K_hat = B^+ (A_tilde - A)."""
    X, X_next = stack_snapshots(demos)
    if X.shape[1] < sys.n:
        raise InsufficientData(
            f"{X.shape[1]} stacked snapshots < state dimension {sys.n}"
        )
    data_rank = int(np.linalg.matrix_rank(X, tol=1e-9))
    if data_rank < sys.n:
        warnings.warn(
            f"stacked data rank {data_rank} < n={sys.n}; gain estimate is a projection",
            RankDeficientWarning,
        )
    A_tilde = X_next @ pseudo_inverse(X)
    K_hat = pseudo_inverse(sys.B) @ (A_tilde - sys.A)
    residual = float(np.linalg.norm(X_next - A_tilde @ X, ord="fro"))
    return GainEstimate(
        K_hat=K_hat,
        lsq_residual=residual,
        data_rank=data_rank,
        stabilizing=is_stabilizing(sys, K_hat),
    )


def evaluate_cost(sys: LtiSystem, obj: TaskObjective, traj: Trajectory) -> float:
    """Sum over recorded steps of x'Qx + u'Ru + 2x'Su (terminal state excluded)."""
    if traj.state_dim != sys.n or traj.input_dim != sys.m:
        raise ValueError("trajectory dimensions do not match the system")
    X = traj.states[:-1]
    U = traj.inputs
    return float(
        np.einsum("ki,ij,kj->", X, obj.Q, X)
        + np.einsum("ki,ij,kj->", U, obj.R, U)
        + 2.0 * np.einsum("ki,ij,kj->", X, obj.S, U)
    )


# ---------------------------------------------------------------------------
# Objective recovery: minimize alpha subject to
#   I <= [[Q, S], [S', R]] <= alpha I,  P >= 0
# after eliminating the equality constraints
#   S = -A'PB - K'(R + B'PB),   Q = P - A'PA + K'(R + B'PB)K
# which leaves affine decision variables (P, R, alpha).
# ---------------------------------------------------------------------------


def _sym_basis(n):
    """Unnormalized symmetric basis: E_ii = e_i e_i', E_ij = e_i e_j' + e_j e_i'."""
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = 1.0
            E[j, i] = 1.0
            basis.append(E)
    return basis


class _RecoveryProblem:
    """Affine maps from (vec P, vec R, alpha) to the LMI blocks."""

    def __init__(self, sys: LtiSystem, K_hat: np.ndarray):
        A, B, K = sys.A, sys.B, K_hat
        self.n, self.m = sys.n, sys.m
        nm = self.n + self.m
        dM, dP = [], []
        for E in _sym_basis(self.n):
            BEB = B.T @ E @ B
            dQ = E - A.T @ E @ A + K.T @ BEB @ K
            dS = -A.T @ E @ B - K.T @ BEB
            M = np.zeros((nm, nm))
            M[: self.n, : self.n] = dQ
            M[: self.n, self.n :] = dS
            M[self.n :, : self.n] = dS.T
            dM.append(M)
            dP.append(E)
        for F in _sym_basis(self.m):
            M = np.zeros((nm, nm))
            M[: self.n, : self.n] = K.T @ F @ K
            M[: self.n, self.n :] = -K.T @ F
            M[self.n :, : self.n] = -F @ K
            M[self.n :, self.n :] = F
            dM.append(M)
            dP.append(np.zeros((self.n, self.n)))
        self.dM = np.array(dM)  # (d-1, nm, nm)
        self.dP = np.array(dP)  # (d-1, n, n)
        self.n_p = self.n * (self.n + 1) // 2
        self.n_r = self.m * (self.m + 1) // 2
        self.dim = self.n_p + self.n_r + 1  # + alpha

    def pack(self, P, R, alpha):
        x = []
        for i in range(self.n):
            for j in range(i, self.n):
                x.append(P[i, j])
        for i in range(self.m):
            for j in range(i, self.m):
                x.append(R[i, j])
        x.append(alpha)
        return np.array(x)

    def unpack(self, x):
        P = np.zeros((self.n, self.n))
        R = np.zeros((self.m, self.m))
        k = 0
        for i in range(self.n):
            for j in range(i, self.n):
                P[i, j] = P[j, i] = x[k]
                k += 1
        for i in range(self.m):
            for j in range(i, self.m):
                R[i, j] = R[j, i] = x[k]
                k += 1
        return P, R, float(x[-1])

    def blocks(self, x):
        """(M - I, alpha I - M, P) at x."""
        y = x[:-1]
        alpha = x[-1]
        M = np.tensordot(y, self.dM, axes=(0, 0))
        P = np.tensordot(y, self.dP, axes=(0, 0))
        nm = self.n + self.m
        return M - np.eye(nm), alpha * np.eye(nm) - M, P

    def feasible(self, x):
        for block in self.blocks(x):
            try:
                np.linalg.cholesky(block)
            except np.linalg.LinAlgError:
                return False
        return True

    def barrier_value(self, x, t):
        B1, B2, B3 = self.blocks(x)
        val = t * x[-1]
        for block in (B1, B2, B3):
            sign, logdet = np.linalg.slogdet(block)
            if sign <= 0:
                return np.inf
            val -= logdet
        return val

    def barrier_grad_hess(self, x, t):
        B1, B2, B3 = self.blocks(x)
        d = self.dim
        grad = np.zeros(d)
        grad[-1] = t
        H = np.zeros((d, d))
        nm = self.n + self.m
        # derivative stacks per block, alpha slot last
        dB1 = np.concatenate([self.dM, np.zeros((1, nm, nm))])
        dB2 = np.concatenate([-self.dM, np.eye(nm)[None, :, :]])
        dB3 = np.concatenate([self.dP, np.zeros((1, self.n, self.n))])
        for block, derivs in ((B1, dB1), (B2, dB2), (B3, dB3)):
            Binv = np.linalg.inv(block)
            V = Binv[None] @ derivs  # (d, s, s): B^-1 D_i
            grad -= np.einsum("aij,ji->a", derivs, Binv)
            H += np.einsum("aij,bji->ab", V, V)
        return grad, H


def _initial_point(sys, K_hat, prob):
    """Strictly feasible start: Lyapunov P with large R, scaled so lambda_min(M) = 2."""
    Acl = sys.A + sys.B @ K_hat
    P0 = scipy.linalg.solve_discrete_lyapunov(Acl.T, np.eye(sys.n))
    P0 = (P0 + P0.T) / 2
    W = Acl.T @ P0 @ sys.B
    c = 1.0 + 2.0 * float(np.max(np.linalg.eigvalsh(W @ W.T)))
    R0 = c * np.eye(sys.m)
    x = prob.pack(P0, R0, 0.0)
    M = np.tensordot(x[:-1], prob.dM, axes=(0, 0))
    lam_min = float(np.min(np.linalg.eigvalsh(M)))
    if lam_min <= 0:
        raise SolverFailure("initialization failed to produce a feasible interior point")
    s = 2.0 / lam_min
    x[:-1] *= s
    M *= s
    x[-1] = 1.5 * float(np.max(np.linalg.eigvalsh(M)))
    assert prob.feasible(x)
    return x


def recover_objective(sys: LtiSystem, K_hat, tol: float = 1e-5) -> TaskObjective:
    """Recover {Q, R, S, P, alpha} consistent with a stabilizing gain estimate.

    Primal log-det barrier with damped Newton steps over (P, R, alpha); the
    outer loop tightens the barrier weight until the duality-gap bound is
    below ``tol`` relative to alpha.
    """
    K_hat = np.asarray(K_hat, dtype=float)
    if not is_stabilizing(sys, K_hat):
        raise NotStabilizing("K_hat does not stabilize the plant")
    prob = _RecoveryProblem(sys, K_hat)
    x = _initial_point(sys, K_hat, prob)
    nu = 2 * (sys.n + sys.m) + sys.n  # total barrier parameter
    t = 1.0
    for _ in range(60):
        # Newton centering at barrier weight t
        for _ in range(100):
            grad, H = prob.barrier_grad_hess(x, t)
            try:
                step = np.linalg.solve(H, -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.solve(H + 1e-10 * np.eye(len(H)), -grad)
            decrement = float(-grad @ step)
            if decrement < 0:  # numerical loss of convexity near the optimum
                break
            if decrement / 2 <= 1e-10:
                break
            s = 1.0
            f0 = prob.barrier_value(x, t)
            for _ in range(60):
                cand = x + s * step
                if prob.feasible(cand) and prob.barrier_value(cand, t) <= f0 - 0.25 * s * decrement:
                    break
                s *= 0.5
            else:
                break
            x = x + s * step
        if nu / t <= tol * max(1.0, x[-1]):
            break
        t *= 10.0
    else:
        raise SolverFailure("barrier method exhausted its outer iteration budget")

    P, R, alpha = prob.unpack(x)
    G = R + sys.B.T @ P @ sys.B
    S = -sys.A.T @ P @ sys.B - K_hat.T @ G
    Q = P - sys.A.T @ P @ sys.A + K_hat.T @ G @ K_hat
    Q = (Q + Q.T) / 2
    # independent residual check on the eliminated equality constraints
    r1 = np.linalg.norm(G @ K_hat + sys.B.T @ P @ sys.A + S.T, ord="fro")
    r2 = np.linalg.norm(
        sys.A.T @ P @ sys.A - P + (sys.A.T @ P @ sys.B + S) @ K_hat + Q, ord="fro"
    )
    if max(r1, r2) > 1e-6:
        raise SolverFailure(f"equality residuals {r1:.2e}, {r2:.2e} above tolerance")
    return TaskObjective(Q=Q, R=R, S=S, P=P, alpha=alpha)


def min_alpha_oracle(sys: LtiSystem, K_hat, alpha_tol: float = 1e-4) -> float:
    """Smallest feasible alpha by bisection over convex feasibility queries.

    Independent of :func:`recover_objective`: each query solves a max-margin
    SDP (via cvxpy) at fixed alpha. ``alpha_tol`` is relative.
    """
    import cvxpy as cp

    K_hat = np.asarray(K_hat, dtype=float)
    if not is_stabilizing(sys, K_hat):
        raise NotStabilizing("K_hat does not stabilize the plant")
    A, B, K = sys.A, sys.B, K_hat
    n, m = sys.n, sys.m
    P = cp.Variable((n, n), symmetric=True)
    R = cp.Variable((m, m), symmetric=True)
    s = cp.Variable()
    alpha = cp.Parameter(nonneg=True)
    G = R + B.T @ P @ B
    S = -A.T @ P @ B - K.T @ G
    Q = P - A.T @ P @ A + K.T @ G @ K
    M = cp.bmat([[Q, S], [S.T, R]])
    I = np.eye(n + m)
    constraints = [
        M - I >> s * I,
        cp.multiply(alpha, I) - M >> s * I,
        P >> s * np.eye(n),
        s <= 1.0,
    ]
    problem = cp.Problem(cp.Maximize(s), constraints)

    def feasible(a):
        alpha.value = a
        try:
            problem.solve(solver=cp.CLARABEL)
        except cp.error.SolverError:
            problem.solve(solver=cp.SCS)
        return problem.status in ("optimal", "optimal_inaccurate") and s.value >= -1e-8

    if feasible(1.0):
        return 1.0
    hi = 2.0
    while not feasible(hi):
        hi *= 4.0
        if hi > 1e6:
            raise Infeasible("no feasible alpha below 1e6")
    lo = 1.0
    while hi - lo > alpha_tol * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)
