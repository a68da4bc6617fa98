"""Task-parameterized variability learning.

The joint vector xi = [x; w] (state and input-variability) is observed in P
task frames, a per-frame mixture is fit with shared responsibilities, and the
frames are merged by a product of Gaussians for a new situation. The merged
mixture answers state-conditional variability queries through GMR.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gmm import (
    ConditionalGaussian,
    GaussianComponent,
    Gmm,
    _em_multiview,
    gmr_condition,
    kmeans,
    moment_merge,
)
from .gmm import EPS_REG
from .ioc import GainEstimate
from .lti import DemonstrationSet

_COND_LIMIT = 1e8


@dataclass(frozen=True)
class TaskFrame:
    """Observer coordinate system: block-diagonal transform T and offset b.

    ``split`` is the boundary between the state block and the input block.
    """

    T: np.ndarray
    b: np.ndarray
    split: int

    def __post_init__(self):
        T = np.array(self.T, dtype=float)
        b = np.array(self.b, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or b.shape != (T.shape[0],):
            raise ValueError("T must be square and b a matching vector")
        s = self.split
        if not 0 < s < T.shape[0]:
            raise ValueError("split must lie strictly inside the dimension")
        if np.abs(T[:s, s:]).max() > 0 or np.abs(T[s:, :s]).max() > 0:
            raise ValueError("off-diagonal state/input blocks of T must be zero")
        if np.linalg.cond(T) > _COND_LIMIT:
            raise ValueError("T is near-singular")
        T.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_blocks(cls, T_state, T_input, b_state, b_input) -> "TaskFrame":
        T_state = np.atleast_2d(np.asarray(T_state, dtype=float))
        T_input = np.atleast_2d(np.asarray(T_input, dtype=float))
        n = T_state.shape[0]
        m = T_input.shape[0]
        T = np.zeros((n + m, n + m))
        T[:n, :n] = T_state
        T[n:, n:] = T_input
        b = np.concatenate([np.reshape(b_state, n), np.reshape(b_input, m)])
        return cls(T=T, b=b, split=n)

    @classmethod
    def identity(cls, n: int, m: int) -> "TaskFrame":
        return cls(T=np.eye(n + m), b=np.zeros(n + m), split=n)

    def to_json_dict(self) -> dict:
        return {"T": self.T.tolist(), "b": self.b.tolist(), "split": self.split}

    @classmethod
    def from_json_dict(cls, d: dict) -> "TaskFrame":
        return cls(
            T=np.array(d["T"], dtype=float),
            b=np.array(d["b"], dtype=float),
            split=int(d["split"]),
        )


@dataclass(frozen=True)
class TpGmm:
    """Per-frame mixture parameters sharing one set of weights."""

    weights: np.ndarray
    means: np.ndarray  # (P, G, dim) in frame-local coordinates
    covs: np.ndarray  # (P, G, dim, dim)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        means = np.array(self.means, dtype=float)
        covs = np.array(self.covs, dtype=float)
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must sum to 1")
        P, G, dim = means.shape
        if covs.shape != (P, G, dim, dim) or len(w) != G:
            raise ValueError("inconsistent TP-GMM parameter shapes")
        for a in (w, means, covs):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @property
    def n_frames(self) -> int:
        return self.means.shape[0]

    @property
    def n_components(self) -> int:
        return self.means.shape[1]

    @property
    def dim(self) -> int:
        return self.means.shape[2]

    def to_json_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covs": self.covs.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TpGmm":
        return cls(
            weights=np.array(d["weights"], dtype=float),
            means=np.array(d["means"], dtype=float),
            covs=np.array(d["covs"], dtype=float),
        )


def extract_variability(demos: DemonstrationSet, K_hat) -> list:
    """Per-demo residuals w_k = u_k - K_hat x_k, one (N_j, m) array per demo."""
    K_hat = K_hat.K_hat if isinstance(K_hat, GainEstimate) else np.asarray(K_hat, float)
    out = []
    for traj in demos:
        out.append(traj.inputs - traj.states[:-1] @ K_hat.T)
    return out


def transform_to_frame(xi_seq, frame: TaskFrame) -> np.ndarray:
    """Observe joint vectors in a frame: Z = T^-1 (xi - b)."""
    xi_seq = np.atleast_2d(np.asarray(xi_seq, dtype=float))
    return np.linalg.solve(frame.T, (xi_seq - frame.b).T).T


def fit_tp_gmm(
    xi_data,
    frames,
    G: int,
    eps_reg: float = EPS_REG,
    max_iter: int = 200,
    tol: float = 1e-6,
    seed: int = 0,
    restarts: int = 5,
    mode: str = "joint",
):
    """Fit a task-parameterized GMM from per-demo joint sequences.

    xi_data: list of (N_j, n+m) arrays; frames: per-demo lists of P TaskFrames.
    ``mode`` "joint" shares responsibilities across frames (component indices
    stay aligned, as the frame product requires); "per_frame" runs an
    independent M/E pass per frame from the shared k-means labels.
    Returns (TpGmm, log-likelihood history).
    """
    if len(xi_data) != len(frames):
        raise ValueError("one frame list per demonstration is required")
    P = len(frames[0])
    if any(len(f) != P for f in frames):
        raise ValueError("every demonstration must carry the same number of frames")
    views = []
    for p in range(P):
        views.append(
            np.vstack(
                [transform_to_frame(xi, fr[p]) for xi, fr in zip(xi_data, frames)]
            )
        )
    N, d = views[0].shape
    if N < G * (d + 1):
        raise ValueError(f"need at least G*(d+1)={G*(d+1)} points, got {N}")
    labels, _ = kmeans(np.hstack(views), G, seed=seed, restarts=restarts)
    if mode == "joint":
        weights, means, covs, history = _em_multiview(
            views, G, labels, eps_reg, max_iter, tol
        )
    elif mode == "per_frame":
        weights = None
        means, covs = [], []
        history = []
        for v in views:
            w, mu, cv, h = _em_multiview([v], G, labels, eps_reg, max_iter, tol)
            weights = w if weights is None else weights
            means.append(mu[0])
            covs.append(cv[0])
            history.append(h)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return TpGmm(weights=weights, means=np.array(means), covs=np.array(covs)), history


def merge_frames(tpgmm: TpGmm, new_frames) -> Gmm:
    """Product of per-frame Gaussians mapped through new frames (T, b)."""
    if len(new_frames) != tpgmm.n_frames:
        raise ValueError(
            f"expected {tpgmm.n_frames} frames, got {len(new_frames)}"
        )
    comps = []
    for g in range(tpgmm.n_components):
        if tpgmm.n_frames == 1:
            fr = new_frames[0]
            cov = fr.T @ tpgmm.covs[0, g] @ fr.T.T
            mean = fr.T @ tpgmm.means[0, g] + fr.b
        else:
            lam = np.zeros((tpgmm.dim, tpgmm.dim))
            eta = np.zeros(tpgmm.dim)
            for p, fr in enumerate(new_frames):
                cov_p = fr.T @ tpgmm.covs[p, g] @ fr.T.T
                prec = np.linalg.inv((cov_p + cov_p.T) / 2)
                lam += prec
                eta += prec @ (fr.T @ tpgmm.means[p, g] + fr.b)
            cov = np.linalg.inv(lam)
            mean = cov @ eta
        comps.append(GaussianComponent(mean=mean, cov=(cov + cov.T) / 2))
    return Gmm(weights=tpgmm.weights, components=tuple(comps))


@dataclass(frozen=True)
class VariabilityModel:
    """Merged state-conditional variability distribution with cached regression."""

    gmm: Gmm
    input_dims: np.ndarray
    output_dims: np.ndarray
    tpgmm: TpGmm | None = None
    frames: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        idx = np.array(self.input_dims, dtype=int)
        odx = np.array(self.output_dims, dtype=int)
        idx.setflags(write=False)
        odx.setflags(write=False)
        object.__setattr__(self, "input_dims", idx)
        object.__setattr__(self, "output_dims", odx)
        object.__setattr__(self, "frames", tuple(self.frames))
        # precompute per-component conditioning terms (online-GMR cache)
        gains, cond_covs, mu_i, mu_o, chol_i, logdet_i, log_prior = (
            [], [], [], [], [], [], [],
        )
        for w, c in zip(self.gmm.weights, self.gmm.components):
            S_ii = c.cov[np.ix_(idx, idx)]
            S_oi = c.cov[np.ix_(odx, idx)]
            S_oo = c.cov[np.ix_(odx, odx)]
            gain = S_oi @ np.linalg.inv(S_ii)
            cov = S_oo - gain @ S_oi.T
            L = np.linalg.cholesky(S_ii)
            gains.append(gain)
            cond_covs.append((cov + cov.T) / 2)
            mu_i.append(c.mean[idx])
            mu_o.append(c.mean[odx])
            chol_i.append(L)
            logdet_i.append(float(np.log(np.diag(L)).sum()))
            log_prior.append(float(np.log(max(w, 1e-300))))
        self._cache.update(
            gains=np.array(gains),
            cond_covs=np.array(cond_covs),
            mu_i=np.array(mu_i),
            mu_o=np.array(mu_o),
            chol_i=np.array(chol_i),
            logdet_i=np.array(logdet_i),
            log_prior=np.array(log_prior),
        )

    def condition(self, x):
        """(weights, per-component ConditionalGaussians, far_field) at state x."""
        c = self._cache
        x = np.asarray(x, dtype=float).reshape(len(self.input_dims))
        d_in = len(self.input_dims)
        diff = x - c["mu_i"]  # (G, d_in)
        G = self.gmm.n_components
        log_w = np.empty(G)
        conds = []
        for g in range(G):
            zg = np.linalg.solve(c["chol_i"][g], diff[g])
            log_w[g] = (
                c["log_prior"][g]
                - 0.5 * (d_in * np.log(2 * np.pi) + zg @ zg)
                - c["logdet_i"][g]
            )
            mean = c["mu_o"][g] + c["gains"][g] @ diff[g]
            conds.append(ConditionalGaussian(mean=mean, cov=c["cond_covs"][g]))
        far_field = bool(log_w.max() < -700.0)
        if far_field:
            weights = np.full(G, 1.0 / G)
        else:
            m = log_w.max()
            weights = np.exp(log_w - m)
            weights /= weights.sum()
        return weights, conds, far_field

    def to_json_dict(self) -> dict:
        return {
            "gmm": self.gmm.to_json_dict(),
            "input_dims": self.input_dims.tolist(),
            "output_dims": self.output_dims.tolist(),
            "tpgmm": self.tpgmm.to_json_dict() if self.tpgmm is not None else None,
            "frames": [f.to_json_dict() for f in self.frames],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "VariabilityModel":
        return cls(
            gmm=Gmm.from_json_dict(d["gmm"]),
            input_dims=np.array(d["input_dims"], dtype=int),
            output_dims=np.array(d["output_dims"], dtype=int),
            tpgmm=TpGmm.from_json_dict(d["tpgmm"]) if d.get("tpgmm") else None,
            frames=tuple(TaskFrame.from_json_dict(f) for f in d.get("frames", [])),
        )


def variability_distribution(model: VariabilityModel, x) -> ConditionalGaussian:
    """Merged conditional N(mu(x), Sigma(x)) of the variability at state x."""
    weights, conds, _ = model.condition(x)
    return moment_merge(weights, conds)
