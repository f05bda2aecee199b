"""Synthesis-quality metrics and evaluation artifacts."""
from .distances import (
    Corpus,
    marginal_score,
    median_bandwidth,
    mivo,
    mmd,
    mmd_permutation_interval,
    mse,
    volatility,
    wasserstein,
    wasserstein1d,
)
from .report import MetricsReport, evaluate, plot_names, read_report_values, write_figures
from .temporal import DECILE_LEVELS, UndefinedCorrelationError, acf, corpus_acf, deciles

__all__ = [
    "Corpus", "marginal_score", "median_bandwidth", "mivo", "mmd", "mmd_permutation_interval",
    "mse", "volatility", "wasserstein", "wasserstein1d", "MetricsReport", "evaluate",
    "plot_names", "read_report_values", "write_figures", "DECILE_LEVELS",
    "UndefinedCorrelationError", "acf", "corpus_acf", "deciles",
]
