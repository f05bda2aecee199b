"""Record types and CSV readers for substation monitoring data."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np

SLOTS_PER_DAY = 48

MONITORING_COLUMNS = (
    "substation_id",
    "timestamp_utc",
    "p_kw_l1",
    "p_kw_l2",
    "p_kw_l3",
    "q_kvar_l1",
    "q_kvar_l2",
    "q_kvar_l3",
)
METADATA_COLUMNS = ("substation_id", "customer_count", "latitude", "longitude", "primary_id")


class SchemaError(ValueError):
    """A CSV file lacks a mandatory column."""

    def __init__(self, column: str, path: str | Path = ""):
        self.column = column
        super().__init__(f"missing mandatory column {column!r}" + (f" in {path}" if path else ""))


@dataclass(frozen=True)
class RawMeasurement:
    substation_id: str
    timestamp: datetime
    # NaN marks a missing phase reading; never zero-filled.
    p_kw: tuple[float, float, float]
    q_kvar: tuple[float, float, float]

    @property
    def complete(self) -> bool:
        return all(math.isfinite(v) for v in self.p_kw + self.q_kvar)


@dataclass(frozen=True)
class Reject:
    row: int  # 0-based data row index (header excluded)
    reason: str


@dataclass(frozen=True)
class SubstationMeta:
    substation_id: str
    customer_count: int
    latitude: float
    longitude: float
    primary_id: str

    def __post_init__(self):
        if self.customer_count < 0:
            raise ValueError(f"{self.substation_id}: negative customer_count")
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"{self.substation_id}: latitude {self.latitude} out of range")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"{self.substation_id}: longitude {self.longitude} out of range")


@dataclass
class DayProfile:
    """One substation-day of aggregate active (kW) and reactive (kVAr) power."""

    substation_id: str
    date: date
    p: np.ndarray
    q: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.p.shape != (SLOTS_PER_DAY,) or self.q.shape != (SLOTS_PER_DAY,):
            raise ValueError(
                f"day profile needs {SLOTS_PER_DAY} samples per channel, "
                f"got p{self.p.shape} q{self.q.shape}"
            )

    @property
    def key(self) -> tuple[str, date]:
        return (self.substation_id, self.date)

    def as_array(self) -> np.ndarray:
        return np.stack([self.p, self.q])


def _parse_float(text: str) -> float:
    """Empty field -> NaN (missing phase). Anything else must parse."""
    text = text.strip()
    if text == "" or text.lower() in ("nan", "na", "null"):
        return math.nan
    return float(text)


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 -> aware UTC datetime; naive stamps are taken as UTC."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _check_header(fieldnames, required, path):
    present = set(fieldnames or ())
    for col in required:
        if col not in present:
            raise SchemaError(col, path)


def parse_monitoring_csv(path: str | Path) -> tuple[list[RawMeasurement], list[Reject]]:
    """Read a monitoring CSV into measurements plus a rejects report.

    Rows whose timestamp or power fields cannot be parsed are reported with
    their row index instead of being dropped silently.
    """
    measurements: list[RawMeasurement] = []
    rejects: list[Reject] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, MONITORING_COLUMNS, path)
        for i, row in enumerate(reader):
            sid = (row["substation_id"] or "").strip()
            if not sid:
                rejects.append(Reject(i, "missing substation_id"))
                continue
            try:
                ts = parse_timestamp(row["timestamp_utc"] or "")
            except ValueError:
                rejects.append(Reject(i, f"unparseable timestamp {row['timestamp_utc']!r}"))
                continue
            try:
                p = tuple(_parse_float(row[f"p_kw_l{k}"] or "") for k in (1, 2, 3))
                q = tuple(_parse_float(row[f"q_kvar_l{k}"] or "") for k in (1, 2, 3))
            except ValueError as exc:
                rejects.append(Reject(i, f"non-numeric power field: {exc}"))
                continue
            measurements.append(RawMeasurement(sid, ts, p, q))
    return measurements, rejects


def parse_metadata_csv(path: str | Path) -> dict[str, SubstationMeta]:
    out: dict[str, SubstationMeta] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, METADATA_COLUMNS, path)
        for row in reader:
            meta = SubstationMeta(
                substation_id=row["substation_id"].strip(),
                customer_count=int(row["customer_count"]),
                latitude=float(row["latitude"]),
                longitude=float(row["longitude"]),
                primary_id=row["primary_id"].strip(),
            )
            if meta.substation_id in out:
                raise ValueError(f"duplicate metadata row for {meta.substation_id}")
            out[meta.substation_id] = meta
    return out


def write_monitoring_csv(path: str | Path, measurements) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MONITORING_COLUMNS)
        for m in measurements:
            w.writerow(
                [m.substation_id, m.timestamp.isoformat()]
                + ["" if math.isnan(v) else repr(v) for v in m.p_kw + m.q_kvar]
            )


def write_metadata_csv(path: str | Path, metas) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METADATA_COLUMNS)
        for m in metas:
            w.writerow([m.substation_id, m.customer_count, m.latitude, m.longitude, m.primary_id])
