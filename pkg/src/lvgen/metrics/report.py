"""Metric bundle, flat text serialisation and evaluation figures."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distances import Corpus, marginal_score, mivo, mmd, mmd_permutation_interval, mse, wasserstein
from .temporal import DECILE_LEVELS, corpus_acf, deciles

CHANNELS = ("p", "q")
SCALARS = ("mse", "mmd", "wasserstein", "marginal_score", "mivo")
FOOTER = (
    "# mivo = |min gap| + |mean |first difference| gap|, an interpretation of the MiVo composite\n"
    "# scalar metrics are unweighted means over channels " + ",".join(CHANNELS) + "\n"
)


@dataclass
class MetricsReport:
    real_label: str
    generated_label: str
    mse: float
    mmd: float
    wasserstein: float
    marginal_score: float
    mivo: float
    acf_real: np.ndarray
    acf_generated: np.ndarray
    deciles_real: np.ndarray
    deciles_generated: np.ndarray
    n_real: int = 0
    n_generated: int = 0
    extra: dict = field(default_factory=dict)

    def scalars(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in SCALARS}

    def to_text(self) -> str:
        lines = [f"real={self.real_label}", f"generated={self.generated_label}",
                 f"n_real={self.n_real}", f"n_generated={self.n_generated}"]
        lines += [f"{k}={_fmt(v)}" for k, v in self.scalars().items()]
        lines += [f"{k}={_fmt(v)}" for k, v in sorted(self.extra.items())]
        for c, name in enumerate(CHANNELS[: self.acf_real.shape[0]]):
            lines.append(f"acf_gap.{name}={_fmt(float(np.nanmean(np.abs(self.acf_real[c] - self.acf_generated[c]))))}")
            for i, lv in enumerate(DECILE_LEVELS):
                gap = float(np.mean(np.abs(self.deciles_real[i, c] - self.deciles_generated[i, c])))
                lines.append(f"decile_gap.{name}.q{int(round(lv * 100)):02d}={_fmt(gap)}")
        return "\n".join(lines) + "\n" + FOOTER

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text())
        return path


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def read_report_values(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line and not line.startswith("#") and "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def evaluate(real: Corpus, generated: Corpus, bins: int = 50, max_lag: int = 47,
             n_perm: int = 0, seed: int = 0) -> MetricsReport:
    """All metrics for one real/generated pair.

    MSE needs row pairing and is NaN for unpaired corpora. With ``n_perm``
    > 0 the report also carries a permutation null interval for the MMD.
    """
    r, g = real.profiles, generated.profiles
    try:
        err = mse(real, generated)
    except ValueError:
        err = float("nan")
    extra = {}
    if n_perm:
        lo, hi = mmd_permutation_interval(r, g, n_perm=n_perm, seed=seed)
        extra.update(mmd_null_lo=lo, mmd_null_hi=hi)
    return MetricsReport(
        real.label, generated.label,
        mse=err,
        mmd=mmd(r, g),
        wasserstein=wasserstein(r, g),
        marginal_score=marginal_score(r, g, bins),
        mivo=mivo(r, g),
        acf_real=corpus_acf(r, max_lag), acf_generated=corpus_acf(g, max_lag),
        deciles_real=deciles(r), deciles_generated=deciles(g),
        n_real=len(real), n_generated=len(generated), extra=extra,
    )


def slug(label: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-") or "corpus"


def plot_names(real_label: str, gen_label: str) -> dict[str, str]:
    stem = f"{slug(real_label)}_vs_{slug(gen_label)}"
    return {k: f"{stem}_{k}.png" for k in ("distribution", "deciles", "acf")}


def write_figures(out_dir, real: Corpus, generated: Corpus, report: MetricsReport | None = None) -> list[Path]:
    """Distribution overlays with a tail inset, decile grid and ACF overlay."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    report = report or evaluate(real, generated)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = plot_names(real.label, generated.label)
    r, g = real.profiles, generated.profiles
    n_ch = r.shape[1]
    paths = []

    fig, axes = plt.subplots(1, n_ch, figsize=(5 * n_ch, 3.5), squeeze=False)
    for c in range(n_ch):
        ax = axes[0, c]
        a, b = r[:, c].ravel(), g[:, c].ravel()
        edges = np.linspace(min(a.min(), b.min()), max(a.max(), b.max()) + 1e-12, 60)
        ax.hist(a, edges, density=True, alpha=0.5, label=real.label)
        ax.hist(b, edges, density=True, alpha=0.5, label=generated.label)
        ax.set_title(CHANNELS[c] if c < len(CHANNELS) else f"ch{c}")
        cut = np.quantile(a, 0.95)
        inset = ax.inset_axes([0.58, 0.5, 0.38, 0.42])
        tail = edges[edges >= cut]
        if tail.size >= 2:
            inset.hist(a[a >= cut], tail, density=False, alpha=0.5)
            inset.hist(b[b >= cut], tail, density=False, alpha=0.5)
        inset.set_title("upper 5%", fontsize=7)
        inset.tick_params(labelsize=6)
        ax.legend(fontsize=7, loc="upper left")
    paths.append(_save(fig, out_dir / names["distribution"], plt))

    fig, axes = plt.subplots(len(DECILE_LEVELS), n_ch, figsize=(5 * n_ch, 2.2 * len(DECILE_LEVELS)), squeeze=False)
    for i, lv in enumerate(DECILE_LEVELS):
        for c in range(n_ch):
            ax = axes[i, c]
            ax.plot(report.deciles_real[i, c], label=real.label)
            ax.plot(report.deciles_generated[i, c], label=generated.label)
            ax.set_title(f"{CHANNELS[c] if c < len(CHANNELS) else c} q{int(round(lv * 100))}", fontsize=8)
    axes[0, 0].legend(fontsize=7)
    paths.append(_save(fig, out_dir / names["deciles"], plt))

    fig, axes = plt.subplots(1, n_ch, figsize=(5 * n_ch, 3), squeeze=False)
    for c in range(n_ch):
        axes[0, c].plot(report.acf_real[c], label=real.label)
        axes[0, c].plot(report.acf_generated[c], label=generated.label)
        axes[0, c].set_xlabel("lag (slots)")
        axes[0, c].set_title(CHANNELS[c] if c < len(CHANNELS) else f"ch{c}")
    axes[0, 0].legend(fontsize=7)
    paths.append(_save(fig, out_dir / names["acf"], plt))
    return paths


def _save(fig, path, plt) -> Path:
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, dpi=90, metadata={"Software": None})
    plt.close(fig)
    return path
