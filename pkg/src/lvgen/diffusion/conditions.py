"""Condition channels for the three conditioning regimes.

``U``   no conditions
``WC``  calendar, daily weather and customer-count bin
``WCS`` WC plus the daily minimum, mean and maximum of scaled P and Q

Daily values are broadcast as constant channels across the 48 slots.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

import numpy as np
import torch

from ..ingest.calendar import N_CALENDAR, calendar_features
from ..ingest.cleanse import N_CUSTOMER_BINS, bin_customers
from ..ingest.records import SLOTS_PER_DAY
from ..ingest.weather import FIELDS as WEATHER_FIELDS

MODES = ("U", "WC", "WCS")
SIGNAL_CHANNELS = ("p", "q")
STAT_CHANNELS = ("p_min", "p_mean", "p_max", "q_min", "q_mean", "q_max")

_DOW = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


def condition_names(mode: str) -> list[str]:
    if mode not in MODES:
        raise ValueError(f"condition mode must be one of {MODES}, got {mode!r}")
    if mode == "U":
        return []
    names = [f"dow_{d}" for d in _DOW] + [f"month_{m}" for m in range(1, 13)] + ["weekend"]
    assert len(names) == N_CALENDAR
    names += [f"wx_{f}" for f in WEATHER_FIELDS]
    names += [f"bin_{b}" for b in range(N_CUSTOMER_BINS)]
    if mode == "WCS":
        names += list(STAT_CHANNELS)
    return names


def daily_stats(x_scaled: np.ndarray) -> np.ndarray:
    """(N, 2, L) -> (N, 6): min, mean, max of P then of Q."""
    x = np.asarray(x_scaled)
    return np.concatenate(
        [np.stack([x[:, c].min(-1), x[:, c].mean(-1), x[:, c].max(-1)], axis=1) for c in (0, 1)],
        axis=1,
    )


@dataclass
class ConditionEncoder:
    """Min-max maps training weather onto [-1, 1]; one-hots stay in {0, 1}."""

    mode: str
    weather_lo: np.ndarray = field(default_factory=lambda: np.zeros(len(WEATHER_FIELDS)))
    weather_hi: np.ndarray = field(default_factory=lambda: np.ones(len(WEATHER_FIELDS)))

    def __post_init__(self):
        condition_names(self.mode)
        self.weather_lo = np.asarray(self.weather_lo, dtype=float)
        self.weather_hi = np.asarray(self.weather_hi, dtype=float)

    @property
    def names(self) -> list[str]:
        return condition_names(self.mode)

    @property
    def channel_names(self) -> list[str]:
        return list(SIGNAL_CHANNELS) + self.names

    @property
    def mask(self) -> np.ndarray:
        return np.array([0.0] * len(SIGNAL_CHANNELS) + [1.0] * len(self.names))

    @classmethod
    def fit(cls, mode: str, weather: np.ndarray | None) -> "ConditionEncoder":
        if mode == "U" or weather is None or len(weather) == 0:
            return cls(mode)
        w = np.asarray(weather, dtype=float)
        lo, hi = w.min(0), w.max(0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        return cls(mode, lo, hi)

    def encode(
        self,
        dates: list[date],
        weather: np.ndarray | None,
        customer_counts: list[int] | np.ndarray | None,
        x_scaled: np.ndarray | None = None,
    ) -> np.ndarray:
        """Daily condition vectors, shape (N, n_conditions)."""
        n = len(dates)
        if self.mode == "U":
            return np.zeros((n, 0))
        cal = np.stack([calendar_features(d) for d in dates]) if n else np.zeros((0, N_CALENDAR))
        w = np.asarray(weather, dtype=float).reshape(n, len(WEATHER_FIELDS))
        w = 2.0 * (w - self.weather_lo) / (self.weather_hi - self.weather_lo) - 1.0
        bins = np.zeros((n, N_CUSTOMER_BINS))
        for i, c in enumerate(customer_counts):
            bins[i, bin_customers(int(c))] = 1.0
        parts = [cal, w, bins]
        if self.mode == "WCS":
            if x_scaled is None:
                raise ValueError("WCS conditioning needs the day's scaled profile for its statistics")
            parts.append(daily_stats(x_scaled))
        return np.concatenate(parts, axis=1)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "weather_lo": self.weather_lo.tolist(),
            "weather_hi": self.weather_hi.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConditionEncoder":
        return cls(d["mode"], np.array(d["weather_lo"]), np.array(d["weather_hi"]))


def assemble(x_signal: np.ndarray, cond: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """Stack signal (N, 2, L) and broadcast daily conditions (N, C) into (N, 2 + C, L)."""
    x_signal = np.asarray(x_signal, dtype=float)
    cond = np.asarray(cond, dtype=float)
    n, L = x_signal.shape[0], x_signal.shape[-1]
    if cond.shape[0] != n:
        raise ValueError(f"{cond.shape[0]} condition rows for {n} signals")
    full = np.concatenate([x_signal, np.repeat(cond[:, :, None], L, axis=2)], axis=1)
    return torch.as_tensor(full, dtype=dtype)


@dataclass
class ConditionedCorpus:
    """Scaled signals paired with their daily condition vectors."""

    x: np.ndarray  # (N, 2, 48) scaled
    cond: np.ndarray  # (N, C)
    keys: list[tuple[str, date]]
    encoder: ConditionEncoder

    def __post_init__(self):
        if self.x.ndim != 3 or self.x.shape[1:] != (2, SLOTS_PER_DAY):
            raise ValueError(f"signals must be (N, 2, {SLOTS_PER_DAY}), got {self.x.shape}")

    def __len__(self):
        return self.x.shape[0]

    def tensor(self, dtype=torch.float32) -> torch.Tensor:
        return assemble(self.x, self.cond, dtype)

    def subset(self, idx) -> "ConditionedCorpus":
        idx = np.asarray(idx, dtype=np.int64)
        return ConditionedCorpus(self.x[idx], self.cond[idx], [self.keys[i] for i in idx], self.encoder)


def build_corpus(
    x_scaled: np.ndarray,
    keys: list[tuple[str, date]],
    weather: np.ndarray | None,
    customer_counts,
    encoder: ConditionEncoder,
) -> ConditionedCorpus:
    cond = encoder.encode([k[1] for k in keys], weather, customer_counts, x_scaled)
    return ConditionedCorpus(np.asarray(x_scaled, dtype=float), cond, list(keys), encoder)
