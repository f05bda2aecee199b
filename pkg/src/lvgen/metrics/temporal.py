"""Autocorrelation and per-slot quantile curves."""
from __future__ import annotations

import warnings

import numpy as np

DECILE_LEVELS = (0.1, 0.5, 0.9)


class UndefinedCorrelationError(ValueError):
    pass


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelation r_0..r_max_lag, normalised by the lag-0 autocovariance."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size <= max_lag:
        raise ValueError(f"series length {x.size} must exceed max_lag {max_lag}")
    d = x - x.mean()
    c0 = float(d @ d)
    if c0 <= 1e-300:
        raise UndefinedCorrelationError("autocorrelation undefined for a constant series")
    return np.array([float(d[: x.size - k] @ d[k:]) / c0 for k in range(max_lag + 1)])


def corpus_acf(profiles, max_lag: int = 47) -> np.ndarray:
    """(N, C, L) -> (C, max_lag + 1): per-day ACF averaged over days.

    Constant days carry no correlation information and are skipped.
    """
    x = np.asarray(profiles, dtype=float)
    out = np.zeros((x.shape[1], max_lag + 1))
    for c in range(x.shape[1]):
        curves = []
        for day in x[:, c]:
            try:
                curves.append(acf(day, max_lag))
            except UndefinedCorrelationError:
                continue
        if curves:
            out[c] = np.mean(curves, axis=0)
        else:
            out[c] = np.nan
    return out


def deciles(profiles, levels=DECILE_LEVELS) -> np.ndarray:
    """(N, C, L) -> (len(levels), C, L) empirical quantile curves."""
    x = np.asarray(profiles, dtype=float)
    if x.shape[0] < 10:
        warnings.warn(f"deciles from only {x.shape[0]} rows; using exact order statistics",
                      RuntimeWarning, stacklevel=2)
        return np.quantile(x, levels, axis=0, method="inverted_cdf")
    return np.quantile(x, levels, axis=0, method="linear")
