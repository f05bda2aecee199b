"""Synthetic substation corpus with condition-controlled daily shapes.

Load level follows the customer count, the morning peak moves later at
weekends, cold days raise the peak amplitude, and a hidden per-day factor
scales amplitude and level. Only P/Q daily statistics reveal that factor,
so each richer conditioning regime carries strictly more information.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .ingest.records import (
    SLOTS_PER_DAY,
    DayProfile,
    RawMeasurement,
    SubstationMeta,
    write_metadata_csv,
    write_monitoring_csv,
)
from .ingest.weather import WeatherDay, write_cache, _cache_path

HOURS = (np.arange(SLOTS_PER_DAY) + 0.5) / 2.0
KW_PER_CUSTOMER = 0.45


@dataclass
class ToyCorpus:
    days: list[DayProfile]
    meta: dict[str, SubstationMeta]
    weather: dict[tuple[str, date], WeatherDay]

    def weather_matrix(self, keys) -> np.ndarray:
        return np.array([self.weather[k].vector() for k in keys])

    def customer_counts(self, keys) -> list[int]:
        return [self.meta[k[0]].customer_count for k in keys]


def _bump(center, width):
    d = (HOURS - center + 12.0) % 24.0 - 12.0
    return np.exp(-0.5 * (d / width) ** 2)


def toy_weather(day: date, rng: np.random.Generator) -> WeatherDay:
    doy = day.timetuple().tm_yday
    tavg = 10.0 - 7.0 * math.cos(2 * math.pi * (doy - 15) / 365.25) + rng.normal(0, 2.5)
    tmin = tavg - rng.uniform(2, 6)
    tmax = tavg + rng.uniform(2, 6)
    hum = float(np.clip(80 - 1.5 * (tavg - 10) + rng.normal(0, 6), 20, 100))
    wind = float(rng.gamma(2.0, 2.5))
    return WeatherDay(day, round(tavg, 2), round(tmin, 2), round(tmax, 2), round(hum, 1), round(wind, 2))


def toy_profile(customers: int, day: date, wx: WeatherDay, rng: np.random.Generator):
    level = KW_PER_CUSTOMER * customers
    weekend = day.weekday() >= 5
    u = rng.normal(0.0, 0.2)  # hidden amplitude factor
    v = rng.normal(0.0, 0.12)  # hidden level factor
    w = rng.normal(0.0, 0.15)  # hidden reactive factor
    heat = 1.0 + 0.04 * max(14.0 - wx.tavg, 0.0)
    morning = _bump(9.5 if weekend else 7.5, 1.3) * (0.45 if weekend else 0.35)
    evening = _bump(18.0, 2.0) * (0.75 if weekend else 0.85)
    shape = 0.45 + heat * math.exp(u) * (morning + evening)
    noise = np.convolve(rng.normal(0, 0.025, SLOTS_PER_DAY + 2), np.ones(3) / 3, "valid")
    p = level * math.exp(v) * (shape + noise)
    q_shape = 0.16 + 0.05 * np.sin(2 * np.pi * (HOURS - 8.0) / 24.0)
    q = level * math.exp(w) * q_shape + 0.12 * (p - p.mean()) + level * 0.004 * rng.normal(size=SLOTS_PER_DAY)
    return p, q


def make_toy_corpus(
    n_substations: int = 40,
    min_days: int = 4,
    max_days: int = 36,
    seed: int = 0,
    year: int = 2023,
    primaries: int = 4,
) -> ToyCorpus:
    rng = np.random.default_rng(seed)
    meta: dict[str, SubstationMeta] = {}
    days: list[DayProfile] = []
    weather: dict[tuple[str, date], WeatherDay] = {}
    counts = np.linspace(30, 690, n_substations).astype(int)
    rng.shuffle(counts)
    for i in range(n_substations):
        sid = f"SS{i:03d}"
        m = SubstationMeta(
            sid,
            int(counts[i]),
            round(51.45 + 0.01 * (i % 7), 4),
            round(-2.60 + 0.01 * (i // 7), 4),
            f"PRI{i % primaries}",
        )
        meta[sid] = m
        n_days = int(rng.integers(min_days, max_days + 1))
        start = date(year, 1, 1) + timedelta(days=int(rng.integers(0, 365 - n_days)))
        for k in range(n_days):
            d = start + timedelta(days=k)
            wx = toy_weather(d, rng)
            p, q = toy_profile(m.customer_count, d, wx, rng)
            days.append(DayProfile(sid, d, p, q))
            weather[(sid, d)] = wx
    return ToyCorpus(days, meta, weather)


def write_sample_dataset(out_dir: str | Path, corpus: ToyCorpus, seed: int = 0, defects: bool = True) -> Path:
    """Write a corpus as raw monitoring/metadata CSVs plus a weather cache.

    With ``defects`` a handful of rows get bad timestamps, missing slots,
    outlier readings and constant days, so the cleansing paths are exercised.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows: list[RawMeasurement] = []
    bad_rows: list[int] = []
    for n, day in enumerate(corpus.days):
        p, q = day.p.copy(), day.q.copy()
        drop_slot = None
        if defects and n % 37 == 5:
            p = np.full_like(p, 42.0)
            q = np.full_like(q, 7.0)
        elif defects and n % 41 == 7:
            p[20] = 1200.0
        elif defects and n % 43 == 9:
            drop_slot = 13
        share_p = rng.dirichlet([8, 8, 8])
        share_q = rng.dirichlet([8, 8, 8])
        for k in range(SLOTS_PER_DAY):
            if k == drop_slot:
                continue
            ts = datetime(day.date.year, day.date.month, day.date.day, tzinfo=timezone.utc) + timedelta(minutes=30 * k)
            rows.append(
                RawMeasurement(
                    day.substation_id,
                    ts,
                    tuple(float(round(p[k] * s, 4)) for s in share_p),
                    tuple(float(round(q[k] * s, 4)) for s in share_q),
                )
            )
        if defects and n % 53 == 11:
            bad_rows.append(len(rows))
    write_monitoring_csv(out / "monitoring.csv", rows)
    if bad_rows:
        lines = (out / "monitoring.csv").read_text().splitlines()
        for r in bad_rows:
            parts = lines[r].split(",")
            parts[1] = "not-a-date"
            lines.insert(r + 1, ",".join(parts))
        (out / "monitoring.csv").write_text("\n".join(lines) + "\n")
    write_metadata_csv(out / "metadata.csv", corpus.meta.values())
    by_loc: dict[tuple[float, float], dict] = {}
    for (sid, d), wx in corpus.weather.items():
        m = corpus.meta[sid]
        by_loc.setdefault((m.latitude, m.longitude), {})[d] = wx
    for (lat, lon), recs in by_loc.items():
        write_cache(_cache_path(out / "weather", lat, lon), recs)
    return out


SAMPLE_SPEC = {"n_substations": 14, "min_days": 4, "max_days": 16, "seed": 3}


def write_bundled_sample(out_dir: str | Path | None = None) -> Path:
    """Regenerate the small corpus shipped under ``lvgen/data/sample``."""
    out = Path(out_dir) if out_dir else Path(__file__).resolve().parent / "data" / "sample"
    return write_sample_dataset(out, make_toy_corpus(**SAMPLE_SPEC), seed=SAMPLE_SPEC["seed"])


if __name__ == "__main__":
    print(write_bundled_sample())
