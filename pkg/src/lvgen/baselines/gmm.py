"""Gaussian mixture baseline fitted by EM, component count chosen by BIC."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..container import load_container, save_container


class DegenerateFitError(ValueError):
    pass


@dataclass
class GmmModel:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, D)
    covariances: np.ndarray  # (K, D, D) full, or (K, D) diagonal
    covariance_type: str = "full"
    log_likelihood: float = float("nan")
    ll_trace: list[float] = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def n_parameters(self) -> int:
        k, d = self.n_components, self.dim
        cov = k * d * (d + 1) // 2 if self.covariance_type == "full" else k * d
        return (k - 1) + k * d + cov

    def bic(self, n: int) -> float:
        return self.n_parameters() * np.log(n) - 2.0 * self.log_likelihood

    def full_covariances(self) -> np.ndarray:
        if self.covariance_type == "full":
            return self.covariances
        return np.stack([np.diag(c) for c in self.covariances])

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def score_samples(self, x: np.ndarray) -> np.ndarray:
        return logsumexp(_log_component_density(x, self), axis=1)


def _log_component_density(x, model: GmmModel) -> np.ndarray:
    """(N, K) log w_k + log N(x | mu_k, Sigma_k)."""
    n, d = x.shape
    out = np.empty((n, model.n_components))
    for k in range(model.n_components):
        diff = x - model.means[k]
        if model.covariance_type == "full":
            chol = np.linalg.cholesky(model.covariances[k])
            sol = np.linalg.solve(chol, diff.T)
            maha = np.sum(sol * sol, axis=0)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        else:
            var = model.covariances[k]
            maha = np.sum(diff * diff / var, axis=1)
            logdet = np.sum(np.log(var))
        out[:, k] = np.log(model.weights[k]) - 0.5 * (d * np.log(2 * np.pi) + logdet + maha)
    return out


def _kmeans_pp(x, k, rng):
    centers = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = np.min(((x[:, None, :] - np.asarray(centers)[None]) ** 2).sum(-1), axis=1)
        p = d2 / d2.sum() if d2.sum() > 0 else None
        centers.append(x[rng.choice(len(x), p=p)])
    centers = np.asarray(centers)
    for _ in range(10):
        lab = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
        for j in range(k):
            if np.any(lab == j):
                centers[j] = x[lab == j].mean(0)
    return lab


def _m_step(x, resp, covariance_type, reg):
    nk = resp.sum(0) + 10 * np.finfo(float).eps
    weights = nk / nk.sum()
    means = (resp.T @ x) / nk[:, None]
    d = x.shape[1]
    if covariance_type == "full":
        covs = np.empty((len(nk), d, d))
        for k in range(len(nk)):
            diff = x - means[k]
            covs[k] = (resp[:, k, None] * diff).T @ diff / nk[k] + reg * np.eye(d)
    else:
        covs = np.stack([(resp[:, k, None] * (x - means[k]) ** 2).sum(0) / nk[k] + reg for k in range(len(nk))])
    return weights, means, covs


def fit_em(x, k, covariance_type="full", max_iter=200, tol=1e-6, reg=1e-6, rng=None) -> GmmModel:
    """Single EM run from a k-means++ initialisation."""
    rng = rng if rng is not None else np.random.default_rng()
    x = np.asarray(x, dtype=float)
    lab = _kmeans_pp(x, k, rng)
    resp = np.zeros((len(x), k))
    resp[np.arange(len(x)), lab] = 1.0
    model = GmmModel(*_m_step(x, resp, covariance_type, reg), covariance_type=covariance_type)
    trace = []
    prev = -np.inf
    for _ in range(max_iter):
        logp = _log_component_density(x, model)
        ll_rows = logsumexp(logp, axis=1)
        ll = float(ll_rows.sum())
        trace.append(ll)
        if ll - prev < tol * max(1.0, abs(ll)) and np.isfinite(prev):
            break
        prev = ll
        resp = np.exp(logp - ll_rows[:, None])
        model = GmmModel(*_m_step(x, resp, covariance_type, reg), covariance_type=covariance_type)
    model.log_likelihood = float(trace[-1])
    model.ll_trace = trace
    return model


def fit_gmm(
    profiles: np.ndarray,
    k_max: int = 6,
    covariance_type: str = "full",
    n_init: int = 10,
    max_iter: int = 200,
    tol: float = 1e-6,
    reg: float = 1e-6,
    seed: int = 0,
) -> tuple[GmmModel, np.ndarray]:
    """Fit K = 1..k_max (best of ``n_init`` restarts each); keep the BIC minimiser.

    Returns the selected model and the BIC curve indexed by K - 1.
    """
    x = np.asarray(profiles, dtype=float)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    n, d = x.shape
    if n < k_max:
        raise DegenerateFitError(f"{n} rows cannot support {k_max} components")
    if n < k_max * d:
        warnings.warn(f"only {n} rows for up to {k_max} components in {d} dimensions", RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(seed)
    bics, models = [], []
    for k in range(1, k_max + 1):
        best = None
        for _ in range(n_init if k > 1 else 1):
            m = fit_em(x, k, covariance_type, max_iter, tol, reg, rng)
            if best is None or m.log_likelihood > best.log_likelihood:
                best = m
        models.append(best)
        bics.append(best.bic(n))
    bics = np.asarray(bics)
    return models[int(np.argmin(bics))], bics


def _sqrt_psd(cov):
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def gmm_sample(model: GmmModel, n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    comp = rng.choice(model.n_components, size=n, p=model.weights)
    covs = model.full_covariances()
    out = np.empty((n, model.dim))
    for k in range(model.n_components):
        idx = np.flatnonzero(comp == k)
        if idx.size == 0:
            continue
        root = _sqrt_psd(covs[k])
        out[idx] = model.means[k] + rng.standard_normal((idx.size, model.dim)) @ root.T
    return out


@dataclass
class GmmBaseline:
    """Independent mixtures for the P and Q channels of (N, 2, 48) profiles."""

    channels: list[GmmModel]
    bic_curves: list[np.ndarray]

    @classmethod
    def fit(cls, profiles: np.ndarray, k_max: int = 6, seed: int = 0, **kw) -> "GmmBaseline":
        x = np.asarray(profiles, dtype=float)
        fitted = [fit_gmm(x[:, c], k_max=k_max, seed=seed + c, **kw) for c in range(x.shape[1])]
        return cls([f[0] for f in fitted], [f[1] for f in fitted])

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        return np.stack([gmm_sample(m, n, seed + 1009 * c) for c, m in enumerate(self.channels)], axis=1)

    def save(self, path):
        arrays, comps = {}, []
        for c, m in enumerate(self.channels):
            arrays[f"ch{c}/weights"] = m.weights
            arrays[f"ch{c}/means"] = m.means
            arrays[f"ch{c}/covariances"] = m.covariances
            arrays[f"ch{c}/bic"] = self.bic_curves[c]
            comps.append({"components": m.n_components, "covariance_type": m.covariance_type,
                          "log_likelihood": m.log_likelihood})
        return save_container(path, arrays, {"kind": "gmm", "channels": comps})

    @classmethod
    def load(cls, path) -> "GmmBaseline":
        arrays, header = load_container(path)
        if header.get("kind") != "gmm":
            raise ValueError(f"{path} holds a {header.get('kind')!r} model, not a GMM")
        models, curves = [], []
        for c, info in enumerate(header["channels"]):
            models.append(GmmModel(arrays[f"ch{c}/weights"], arrays[f"ch{c}/means"],
                                   arrays[f"ch{c}/covariances"], info["covariance_type"],
                                   info["log_likelihood"]))
            curves.append(arrays[f"ch{c}/bic"])
        return cls(models, curves)
