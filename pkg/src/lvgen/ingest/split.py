"""Substation-disjoint stratified splitting and per-channel scaling."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .cleanse import bin_customers
from .records import DayProfile, SubstationMeta


class DegenerateScaleError(ValueError):
    pass


@dataclass
class ChannelScaler:
    """Per-channel affine map of the training range onto [-1, 1]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        spread = self.hi - self.lo
        if np.any(~np.isfinite(spread)) or np.any(spread <= 0):
            bad = np.flatnonzero(~(spread > 0)).tolist()
            raise DegenerateScaleError(f"degenerate-scale: zero spread on channel(s) {bad}")

    @classmethod
    def fit(cls, data: np.ndarray) -> "ChannelScaler":
        """``data`` is (N, C, L); statistics are taken over N and L."""
        data = np.asarray(data, dtype=float)
        if data.ndim != 3 or data.shape[0] == 0:
            raise ValueError(f"expected a non-empty (N, C, L) array, got {data.shape}")
        return cls(data.min(axis=(0, 2)), data.max(axis=(0, 2)))

    def _shape(self, arr):
        # broadcast the channel axis, which sits at -2 for (..., C, L) arrays
        return arr.reshape((-1, 1))

    def apply(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self._shape(self.lo), self._shape(self.hi)
        return 2.0 * (np.asarray(x, dtype=float) - lo) / (hi - lo) - 1.0

    def invert(self, y: np.ndarray) -> np.ndarray:
        lo, hi = self._shape(self.lo), self._shape(self.hi)
        return (np.asarray(y, dtype=float) + 1.0) * 0.5 * (hi - lo) + lo

    def apply_profile(self, day: DayProfile) -> DayProfile:
        s = self.apply(day.as_array())
        return DayProfile(day.substation_id, day.date, s[0], s[1], dict(day.meta))

    def invert_profile(self, day: DayProfile) -> DayProfile:
        s = self.invert(day.as_array())
        return DayProfile(day.substation_id, day.date, s[0], s[1], dict(day.meta))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelScaler":
        return cls(np.array(d["lo"]), np.array(d["hi"]))


def fit_scaler(train: list[DayProfile]) -> ChannelScaler:
    return ChannelScaler.fit(np.stack([d.as_array() for d in train]))


@dataclass
class DatasetSplit:
    train: list[DayProfile]
    test: list[DayProfile]
    scaler: ChannelScaler | None
    assignment: dict[str, str] = field(default_factory=dict)  # substation -> "train" | "test"

    @property
    def train_fraction(self) -> float:
        n = len(self.train) + len(self.test)
        return len(self.train) / n if n else 0.0


def split_train_test(
    days: list[DayProfile],
    meta: dict[str, SubstationMeta],
    threshold_days: int = 10,
    train_fraction: float = 0.7,
    forced_test_primaries: tuple[str, ...] = (),
    seed: int = 0,
    fit_scale: bool = True,
) -> DatasetSplit:
    """Split days so that no substation appears on both sides.

    Substations with fewer than ``threshold_days`` days, and every
    substation fed from one of ``forced_test_primaries``, go to test. The
    rest are assigned per customer bin aiming at ``train_fraction`` of the
    bin's days in train, with at least one substation on each side when the
    bin has two or more eligible substations.
    """
    if threshold_days < 1:
        raise ValueError(f"threshold_days must be >= 1, got {threshold_days}")
    counts = Counter(d.substation_id for d in days)
    missing = sorted(set(counts) - set(meta))
    if missing:
        raise ValueError(f"days without substation metadata: {missing[:5]}")

    assignment: dict[str, str] = {}
    by_bin: dict[int, list[str]] = defaultdict(list)
    bin_days: Counter = Counter()
    forced = set(forced_test_primaries)
    for sid in sorted(counts):
        b = bin_customers(meta[sid].customer_count)
        bin_days[b] += counts[sid]
        if counts[sid] < threshold_days or meta[sid].primary_id in forced:
            assignment[sid] = "test"
        else:
            by_bin[b].append(sid)

    rng = np.random.default_rng(seed)
    for b in sorted(by_bin):
        eligible = list(by_bin[b])
        rng.shuffle(eligible)
        target = train_fraction * bin_days[b]
        train_days = 0
        chosen = []
        for sid in eligible:
            d = counts[sid]
            # take the substation if it moves the train count closer to target
            if abs(train_days + d - target) < abs(train_days - target):
                chosen.append(sid)
                train_days += d
        if len(eligible) >= 2:
            if not chosen:
                chosen = [eligible[0]]
            elif len(chosen) == len(eligible):
                chosen = chosen[:-1]
        elif len(eligible) == 1 and not chosen:
            # a lone eligible substation goes wherever it lands closer to target
            if abs(counts[eligible[0]] - target) <= target:
                chosen = list(eligible)
        for sid in eligible:
            assignment[sid] = "train" if sid in chosen else "test"

    train = [d for d in days if assignment[d.substation_id] == "train"]
    test = [d for d in days if assignment[d.substation_id] == "test"]
    scaler = fit_scaler(train) if (fit_scale and train) else None
    return DatasetSplit(train, test, scaler, assignment)
