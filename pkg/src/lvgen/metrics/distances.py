"""Distance metrics between real and generated profile corpora.

Corpora are (N, 2, 48) arrays of scaled values. Channel-wise metrics are
averaged over channels without weighting.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import sqdist


@dataclass
class Corpus:
    label: str
    profiles: np.ndarray
    keys: list | None = field(default=None, compare=False)

    def __post_init__(self):
        self.profiles = np.asarray(self.profiles, dtype=float)
        if self.profiles.ndim != 3:
            raise ValueError(f"corpus {self.label!r} must be (N, C, L), got {self.profiles.shape}")
        if not np.all(np.isfinite(self.profiles)):
            raise ValueError(f"corpus {self.label!r} contains non-finite values")
        if self.keys is not None and len(self.keys) != len(self.profiles):
            raise ValueError(f"corpus {self.label!r}: {len(self.keys)} keys for {len(self.profiles)} rows")

    def __len__(self):
        return self.profiles.shape[0]

    @property
    def n_channels(self) -> int:
        return self.profiles.shape[1]


def _arr(x) -> np.ndarray:
    return x.profiles if isinstance(x, Corpus) else np.asarray(x, dtype=float)


def _check_paired(real, gen):
    r, g = _arr(real), _arr(gen)
    if r.shape != g.shape:
        raise ValueError(f"unpaired corpora: shapes {r.shape} vs {g.shape}")
    if isinstance(real, Corpus) and isinstance(gen, Corpus) and real.keys is not None and gen.keys is not None:
        if list(real.keys) != list(gen.keys):
            raise ValueError("unpaired corpora: pairing keys do not align")
    return r, g


def mse(real, gen) -> float:
    r, g = _check_paired(real, gen)
    return float(np.mean((r - g) ** 2))


def median_bandwidth(x: np.ndarray) -> float:
    d2 = sqdist(x, x)
    iu = np.triu_indices(x.shape[0], k=1)
    med = float(np.sqrt(np.median(d2[iu])))
    return med if med > 0 else 1.0


def mmd(real, gen, bandwidth: float | None = None, biased: bool = False) -> float:
    """Squared MMD, Gaussian kernel exp(-|x-y|^2 / (2 h^2)) on flattened days.

    ``h`` defaults to the median pairwise distance of the pooled sample.
    The unbiased estimate is clamped at zero.
    """
    x = _arr(real).reshape(len(_arr(real)), -1)
    y = _arr(gen).reshape(len(_arr(gen)), -1)
    n, m = x.shape[0], y.shape[0]
    if n < 2 or m < 2:
        raise ValueError("MMD needs at least two rows in each corpus")
    h = bandwidth if bandwidth is not None else median_bandwidth(np.vstack([x, y]))
    g = -0.5 / (h * h)
    kxx = np.exp(g * sqdist(x, x))
    kyy = np.exp(g * sqdist(y, y))
    kxy = np.exp(g * sqdist(x, y))
    if biased:
        value = kxx.mean() + kyy.mean() - 2.0 * kxy.mean()
    else:
        value = (
            (kxx.sum() - np.trace(kxx)) / (n * (n - 1))
            + (kyy.sum() - np.trace(kyy)) / (m * (m - 1))
            - 2.0 * kxy.mean()
        )
    return float(max(value, 0.0))


def mmd_permutation_interval(x, y, n_perm=200, level=0.95, seed=0, bandwidth=None):
    """Null interval of the unbiased estimate under random relabelling of the pool."""
    x = _arr(x).reshape(len(_arr(x)), -1)
    y = _arr(y).reshape(len(_arr(y)), -1)
    pool = np.vstack([x, y])
    h = bandwidth if bandwidth is not None else median_bandwidth(pool)
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n_perm):
        idx = rng.permutation(len(pool))
        vals.append(mmd(pool[idx[: len(x)]], pool[idx[len(x):]], bandwidth=h))
    lo, hi = np.quantile(vals, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def wasserstein1d(u, v) -> float:
    """W1 between empirical distributions via the quantile functions.

    Integrates |F^-1(s) - G^-1(s)| exactly over the merged breakpoints of
    both step quantile functions, so sample sizes may differ.
    """
    u = np.sort(np.asarray(u, dtype=float).ravel())
    v = np.sort(np.asarray(v, dtype=float).ravel())
    if u.size == 0 or v.size == 0:
        raise ValueError("wasserstein1d needs non-empty samples")
    if u.size == v.size:
        return float(np.mean(np.abs(u - v)))
    cuts = np.union1d(np.arange(1, u.size) / u.size, np.arange(1, v.size) / v.size)
    edges = np.concatenate([[0.0], cuts, [1.0]])
    mid = 0.5 * (edges[:-1] + edges[1:])
    qu = u[np.minimum((mid * u.size).astype(int), u.size - 1)]
    qv = v[np.minimum((mid * v.size).astype(int), v.size - 1)]
    return float(np.sum(np.diff(edges) * np.abs(qu - qv)))


def wasserstein(real, gen) -> float:
    """Per-channel W1 of pooled slot values, averaged over channels."""
    r, g = _arr(real), _arr(gen)
    return float(np.mean([wasserstein1d(r[:, c], g[:, c]) for c in range(r.shape[1])]))


def marginal_score(real, gen, bins: int = 50) -> float:
    """Total-variation distance between per-slot histograms on shared edges,
    averaged over slots and channels. Identical -> 0, disjoint -> 1."""
    if bins < 2:
        raise ValueError("marginal_score needs bins >= 2")
    r, g = _arr(real), _arr(gen)
    scores = []
    degenerate = False
    for c in range(r.shape[1]):
        for t in range(r.shape[2]):
            a, b = r[:, c, t], g[:, c, t]
            lo, hi = min(a.min(), b.min()), max(a.max(), b.max())
            if hi <= lo:
                degenerate = True
                scores.append(0.0)
                continue
            edges = np.linspace(lo, hi, bins + 1)
            ha = np.histogram(a, edges)[0] / a.size
            hb = np.histogram(b, edges)[0] / b.size
            scores.append(0.5 * np.abs(ha - hb).sum())
    if degenerate:
        warnings.warn("marginal_score: zero-range slot(s) treated as a single bin", RuntimeWarning, stacklevel=2)
    return float(np.mean(scores))


def volatility(x: np.ndarray) -> float:
    """Mean absolute first difference along time."""
    return float(np.mean(np.abs(np.diff(x, axis=-1))))


def mivo(real, gen) -> float:
    """|min gap| + |volatility gap| per channel, averaged over channels.

    This minimum-plus-volatility composite is an interpretation of MiVo,
    and every report footer says so.
    """
    r, g = _arr(real), _arr(gen)
    per = [
        abs(r[:, c].min() - g[:, c].min()) + abs(volatility(r[:, c]) - volatility(g[:, c]))
        for c in range(r.shape[1])
    ]
    return float(np.mean(per))
