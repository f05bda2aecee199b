"""Phase aggregation, discard-based cleansing and customer binning."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .records import SLOTS_PER_DAY, DayProfile, RawMeasurement

OUTLIER_KW = 1000.0
CONSTANT_STD_KW = 1e-6
BIN_WIDTH = 100
N_CUSTOMER_BINS = 7  # 0-99, ..., 500-599, 600+


@dataclass(frozen=True)
class Discard:
    substation_id: str
    date: date
    reason: str

    def __bool__(self):
        return False


@dataclass
class DiscardReport:
    counts: Counter = field(default_factory=Counter)

    def add(self, reason: str, n: int = 1):
        self.counts[reason] += n

    def merge(self, other: "DiscardReport") -> "DiscardReport":
        self.counts.update(other.counts)
        return self

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_dict(self) -> dict[str, int]:
        return dict(sorted(self.counts.items()))


def slot_index(ts) -> int:
    return ts.hour * 2 + ts.minute // 30


def aggregate_phases(measurements: list[RawMeasurement], day: date) -> DayProfile | Discard:
    """Sum the three phases into one (P, Q) pair per half-hour slot.

    Any missing slot or missing phase reading discards the whole day.
    Duplicate stamps within a slot keep the first reading.
    """
    ids = {m.substation_id for m in measurements}
    if len(ids) > 1:
        raise ValueError(f"aggregate_phases got mixed substation ids: {sorted(ids)}")
    sid = ids.pop() if ids else ""
    p = np.full(SLOTS_PER_DAY, np.nan)
    q = np.full(SLOTS_PER_DAY, np.nan)
    seen = np.zeros(SLOTS_PER_DAY, dtype=bool)
    for m in sorted(measurements, key=lambda m: m.timestamp):
        if m.timestamp.date() != day:
            raise ValueError(f"measurement {m.timestamp.isoformat()} is not on {day}")
        k = slot_index(m.timestamp)
        if seen[k]:
            continue
        seen[k] = True
        if m.complete:
            p[k] = sum(m.p_kw)
            q[k] = sum(m.q_kvar)
    if not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
        return Discard(sid, day, "incomplete-day")
    return DayProfile(sid, day, p, q)


def build_days(measurements: list[RawMeasurement]) -> tuple[list[DayProfile], DiscardReport]:
    """Group measurements by (substation, UTC date) and aggregate each group."""
    groups: dict[tuple[str, date], list[RawMeasurement]] = defaultdict(list)
    for m in measurements:
        groups[(m.substation_id, m.timestamp.date())].append(m)
    days: list[DayProfile] = []
    report = DiscardReport()
    for key in sorted(groups):
        result = aggregate_phases(groups[key], key[1])
        if isinstance(result, Discard):
            report.add(result.reason)
        else:
            days.append(result)
    return days, report


def discard_reason(day: DayProfile) -> str | None:
    p, q = day.p, day.q
    if p.shape != (SLOTS_PER_DAY,) or not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        return "incomplete-day"
    if p.max() > OUTLIER_KW or q.max() > OUTLIER_KW:
        return "outlier"
    if np.std(p, ddof=1) < CONSTANT_STD_KW:
        return "constant"
    return None


def cleanse(days: list[DayProfile]) -> tuple[list[DayProfile], DiscardReport]:
    kept = []
    report = DiscardReport()
    for day in days:
        reason = discard_reason(day)
        if reason is None:
            kept.append(day)
        else:
            report.add(reason)
    return kept, report


def bin_customers(count: int) -> int:
    if count < 0:
        raise ValueError(f"customer count must be non-negative, got {count}")
    return min(int(count) // BIN_WIDTH, N_CUSTOMER_BINS - 1)
