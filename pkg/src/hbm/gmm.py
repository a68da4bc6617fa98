"""Gaussian mixture machinery: k-means init, EM, log-likelihood, Gaussian
mixture regression, and moment-matched merging.

The EM engine supports multiple aligned views of the same points (one view per
task frame, shared responsibilities); the single-view case is the ordinary GMM.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateDataWarning, FarFieldWarning

EPS_REG = 1e-6
_LOG_UNDERFLOW = -700.0


@dataclass(frozen=True)
class GaussianComponent:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if np.abs(cov - cov.T).max() > 1e-10:
            raise ValueError("covariance must be symmetric")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class Gmm:
    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-10 or (w < -1e-15).any():
            raise ValueError("weights must be nonnegative and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        comps = tuple(self.components)
        if not comps:
            raise ValueError("need at least one component")
        if len({c.dim for c in comps}) != 1 or len(comps) != len(w):
            raise ValueError("inconsistent component dimensions or count")
        object.__setattr__(self, "components", comps)

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def to_json_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": [c.mean.tolist() for c in self.components],
            "covs": [c.cov.tolist() for c in self.components],
            "dim": self.dim,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Gmm":
        comps = tuple(
            GaussianComponent(mean=np.array(m, dtype=float), cov=np.array(c, dtype=float))
            for m, c in zip(d["means"], d["covs"])
        )
        return cls(weights=np.array(d["weights"], dtype=float), components=comps)


@dataclass(frozen=True)
class ConditionalGaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if np.abs(cov - cov.T).max() > 1e-8:
            raise ValueError("covariance must be symmetric")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def _log_gauss(data, mean, cov):
    """Row-wise log N(data | mean, cov)."""
    d = len(mean)
    L = np.linalg.cholesky(cov)
    diff = data - mean
    z = np.linalg.solve(L, diff.T)
    return -0.5 * (d * np.log(2 * np.pi) + (z * z).sum(axis=0)) - np.log(
        np.diag(L)
    ).sum()


def kmeans(data, G: int, seed: int = 0, restarts: int = 5, max_iter: int = 300):
    """Lloyd's algorithm with farthest-point seeding; best of ``restarts`` runs."""
    data = np.asarray(data, dtype=float)
    N = len(data)
    if N < G:
        raise ValueError(f"{N} points < {G} clusters")
    if len(np.unique(data, axis=0)) < G:
        raise ValueError(f"fewer than {G} distinct points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        # k-means++-style seeding
        centers = [data[rng.integers(N)]]
        for _ in range(G - 1):
            d2 = np.min(
                ((data[:, None, :] - np.array(centers)[None]) ** 2).sum(-1), axis=1
            )
            total = d2.sum()
            if total <= 0:
                centers.append(data[rng.integers(N)])
            else:
                centers.append(data[rng.choice(N, p=d2 / total)])
        centers = np.array(centers)
        for _ in range(max_iter):
            d2 = ((data[:, None, :] - centers[None]) ** 2).sum(-1)
            labels = d2.argmin(axis=1)
            new_centers = centers.copy()
            for g in range(G):
                mask = labels == g
                if mask.any():
                    new_centers[g] = data[mask].mean(axis=0)
                else:  # re-seed empty cluster to the farthest point
                    new_centers[g] = data[d2.min(axis=1).argmax()]
            if np.array_equal(new_centers, centers):
                break
            centers = new_centers
        d2 = ((data[:, None, :] - centers[None]) ** 2).sum(-1)
        labels = d2.argmin(axis=1)
        ssq = d2[np.arange(N), labels].sum()
        if best is None or ssq < best[0]:
            best = (ssq, labels, centers)
    return best[1], best[2]


def _em_multiview(views, G, labels, eps_reg, max_iter, tol):
    """EM with shared responsibilities across aligned views.

    views: list of (N, d_p) arrays. Returns (weights, means[p], covs[p], history)
    where means[p] is (G, d_p) and covs[p] is (G, d_p, d_p).
    """
    N = len(views[0])
    P = len(views)
    resp = np.zeros((N, G))
    resp[np.arange(N), labels] = 1.0
    weights = None
    means = [np.zeros((G, v.shape[1])) for v in views]
    covs = [np.zeros((G, v.shape[1], v.shape[1])) for v in views]
    history = []
    for it in range(max_iter + 1):
        # M-step from current responsibilities
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        weights = nk / N
        for p, v in enumerate(views):
            means[p] = (resp.T @ v) / nk[:, None]
            for g in range(G):
                diff = v - means[p][g]
                covs[p][g] = (resp[:, g, None] * diff).T @ diff / nk[g]
                covs[p][g] = (covs[p][g] + covs[p][g].T) / 2 + eps_reg * np.eye(
                    v.shape[1]
                )
        # E-step at updated parameters
        log_comp = np.zeros((N, G))
        for g in range(G):
            for p, v in enumerate(views):
                log_comp[:, g] += _log_gauss(v, means[p][g], covs[p][g])
        log_joint = np.log(np.maximum(weights, 1e-300)) + log_comp
        lse = logsumexp(log_joint, axis=1)
        resp = np.exp(log_joint - lse[:, None])
        loglik = float(lse.sum())
        history.append(loglik)
        if it >= 1 and history[-1] - history[-2] < tol:
            break
    return weights, means, covs, history


def fit_em(
    data,
    G: int,
    init="auto",
    eps_reg: float = EPS_REG,
    max_iter: int = 200,
    tol: float = 1e-6,
    seed: int = 0,
    restarts: int = 5,
):
    """Fit a GMM by EM. Returns (Gmm, log-likelihood history).

    ``init`` is "auto" (k-means with ``seed``/``restarts``) or an explicit
    (G, d) array of centers.
    """
    data = np.asarray(data, dtype=float)
    N, d = data.shape
    if N < G * (d + 1):
        raise ValueError(f"need at least G*(d+1)={G*(d+1)} points, got {N}")
    if len(np.unique(data, axis=0)) < G:
        warnings.warn(
            "fewer distinct points than components; returning a point mass",
            DegenerateDataWarning,
        )
        mean = data.mean(axis=0)
        comp = GaussianComponent(mean=mean, cov=eps_reg * np.eye(d))
        return Gmm(weights=np.full(G, 1.0 / G), components=(comp,) * G), []
    if isinstance(init, str) and init == "auto":
        labels, _ = kmeans(data, G, seed=seed, restarts=restarts)
    else:
        centers = np.asarray(init, dtype=float)
        labels = ((data[:, None, :] - centers[None]) ** 2).sum(-1).argmin(axis=1)
    weights, means, covs, history = _em_multiview(
        [data], G, labels, eps_reg, max_iter, tol
    )
    comps = tuple(
        GaussianComponent(mean=means[0][g], cov=covs[0][g]) for g in range(G)
    )
    return Gmm(weights=weights, components=comps), history


def log_likelihood(gmm: Gmm, data) -> float:
    data = np.asarray(data, dtype=float)
    log_joint = np.stack(
        [
            np.log(max(w, 1e-300)) + _log_gauss(data, c.mean, c.cov)
            for w, c in zip(gmm.weights, gmm.components)
        ],
        axis=1,
    )
    return float(logsumexp(log_joint, axis=1).sum())


def gmr_condition(gmm: Gmm, input_dims, output_dims, x):
    """Condition the joint mixture on x over ``input_dims``.

    Returns (weights, per-component ConditionalGaussians, far_field) where
    far_field flags the uniform-weight fallback at underflowed queries.
    """
    input_dims = np.asarray(input_dims, dtype=int)
    output_dims = np.asarray(output_dims, dtype=int)
    if set(input_dims) & set(output_dims):
        raise ValueError("input and output dims must be disjoint")
    x = np.asarray(x, dtype=float).reshape(len(input_dims))
    G = gmm.n_components
    log_w = np.empty(G)
    conds = []
    for g, (w, c) in enumerate(zip(gmm.weights, gmm.components)):
        mu_i = c.mean[input_dims]
        mu_o = c.mean[output_dims]
        S_ii = c.cov[np.ix_(input_dims, input_dims)]
        S_oi = c.cov[np.ix_(output_dims, input_dims)]
        S_oo = c.cov[np.ix_(output_dims, output_dims)]
        gain = S_oi @ np.linalg.inv(S_ii)
        mean = mu_o + gain @ (x - mu_i)
        cov = S_oo - gain @ S_oi.T
        conds.append(ConditionalGaussian(mean=mean, cov=(cov + cov.T) / 2))
        log_w[g] = np.log(max(w, 1e-300)) + _log_gauss(x[None], mu_i, S_ii)[0]
    far_field = bool(log_w.max() < _LOG_UNDERFLOW)
    if far_field:
        warnings.warn("all input marginals underflowed; uniform weights", FarFieldWarning)
        weights = np.full(G, 1.0 / G)
    else:
        weights = np.exp(log_w - logsumexp(log_w))
        weights /= weights.sum()
    return weights, conds, far_field


def moment_merge(weights, conditionals) -> ConditionalGaussian:
    """Collapse a conditional mixture to a single Gaussian matching its first
    two moments."""
    weights = np.asarray(weights, dtype=float)
    if abs(weights.sum() - 1.0) > 1e-8:
        raise ValueError("weights must sum to 1")
    mean = sum(w * c.mean for w, c in zip(weights, conditionals))
    cov = sum(
        w * (c.cov + np.outer(c.mean, c.mean)) for w, c in zip(weights, conditionals)
    ) - np.outer(mean, mean)
    return ConditionalGaussian(mean=mean, cov=(cov + cov.T) / 2)
