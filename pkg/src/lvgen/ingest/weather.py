"""Daily weather summaries with an on-disk CSV cache.

The cache holds one CSV per location and one row per date. Offline runs
are served from it; a remote endpoint is consulted only when
``LVGEN_WEATHER_URL`` (or an explicit client) is provided.
"""
from __future__ import annotations

import csv
import json
import math
import os
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, fields
from datetime import date, timedelta
from pathlib import Path
from typing import Protocol

from filelock import FileLock

WEATHER_URL_ENV = "LVGEN_WEATHER_URL"
FIELDS = ("tavg", "tmin", "tmax", "humidity", "wind_speed")


class WeatherRetrievalError(RuntimeError):
    def __init__(self, lat: float, lon: float, missing: list[date], cause: str = ""):
        self.lat, self.lon, self.missing = lat, lon, missing
        span = f"{missing[0]}..{missing[-1]}" if missing else "?"
        super().__init__(
            f"weather unavailable for ({lat}, {lon}) on {len(missing)} day(s) {span}"
            + (f": {cause}" if cause else "")
        )


@dataclass(frozen=True)
class WeatherDay:
    date: date
    tavg: float
    tmin: float
    tmax: float
    humidity: float
    wind_speed: float

    def __post_init__(self):
        if not self.tmin <= self.tavg <= self.tmax:
            raise ValueError(f"{self.date}: need tmin <= tavg <= tmax")
        if not 0.0 <= self.humidity <= 100.0:
            raise ValueError(f"{self.date}: humidity {self.humidity} outside [0, 100]")

    def vector(self) -> list[float]:
        return [self.tavg, self.tmin, self.tmax, self.humidity, self.wind_speed]


@dataclass(frozen=True)
class WeatherGap:
    """A date for which the source had no station data."""

    date: date


class WeatherClient(Protocol):
    def fetch(self, lat: float, lon: float, start: date, end: date) -> list[WeatherDay | WeatherGap]:
        ...


class HttpWeatherClient:
    """GET ``{base}/daily?lat=..&lon=..&start=..&end=..`` returning
    ``{"data": [{"date": "YYYY-MM-DD", "tavg": .., ...}, ...]}``.

    Dates absent from the response, or rows with null fields, become gaps.
    """

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.calls = 0

    def fetch(self, lat, lon, start, end):
        query = urllib.parse.urlencode(
            {"lat": lat, "lon": lon, "start": start.isoformat(), "end": end.isoformat()}
        )
        self.calls += 1
        with urllib.request.urlopen(f"{self.base_url}/daily?{query}", timeout=self.timeout) as r:
            payload = json.load(r)
        rows = {row["date"]: row for row in payload.get("data", [])}
        out: list[WeatherDay | WeatherGap] = []
        for d in _date_range(start, end):
            row = rows.get(d.isoformat())
            if row is None or any(row.get(f) is None for f in FIELDS):
                out.append(WeatherGap(d))
            else:
                out.append(WeatherDay(d, *(float(row[f]) for f in FIELDS)))
        return out


def _date_range(start: date, end: date):
    d = start
    while d <= end:
        yield d
        d += timedelta(days=1)


def _cache_path(cache_dir: Path, lat: float, lon: float) -> Path:
    return cache_dir / f"{lat:.4f}_{lon:.4f}.csv"


def read_cache(path: Path) -> dict[date, WeatherDay | WeatherGap]:
    out: dict[date, WeatherDay | WeatherGap] = {}
    if not path.exists():
        return out
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            d = date.fromisoformat(row["date"])
            if row["gap"] == "1":
                out[d] = WeatherGap(d)
            else:
                out[d] = WeatherDay(d, *(float(row[f]) for f in FIELDS))
    return out


def write_cache(path: Path, records: dict[date, WeatherDay | WeatherGap]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date",) + FIELDS + ("gap",))
        for d in sorted(records):
            rec = records[d]
            if isinstance(rec, WeatherGap):
                w.writerow([d.isoformat()] + [""] * len(FIELDS) + ["1"])
            else:
                # repr() round-trips floats bit-exactly
                w.writerow([d.isoformat()] + [repr(getattr(rec, f)) for f in FIELDS] + ["0"])
    os.replace(tmp, path)


def default_client() -> WeatherClient | None:
    url = os.environ.get(WEATHER_URL_ENV, "").strip()
    return HttpWeatherClient(url) if url else None


def fetch_weather(
    lat: float,
    lon: float,
    start: date,
    end: date,
    cache_dir: str | Path,
    client: WeatherClient | None = None,
) -> list[WeatherDay | WeatherGap]:
    """Return one record per date in ``[start, end]``, cache first.

    With no client, missing dates raise :class:`WeatherRetrievalError`.
    Writes to one location's cache file are serialised with a file lock.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = _cache_path(cache_dir, lat, lon)
    wanted = list(_date_range(start, end))
    cached = read_cache(path)
    missing = [d for d in wanted if d not in cached]
    if missing:
        if client is None:
            raise WeatherRetrievalError(lat, lon, missing, "no cache entry and no remote source")
        try:
            fetched = client.fetch(lat, lon, missing[0], missing[-1])
        except (OSError, urllib.error.URLError, ValueError) as exc:
            raise WeatherRetrievalError(lat, lon, missing, str(exc)) from exc
        with FileLock(str(path) + ".lock"):
            cached = read_cache(path)
            for rec in fetched:
                cached.setdefault(rec.date, rec)
            write_cache(path, cached)
        still = [d for d in wanted if d not in cached]
        if still:
            raise WeatherRetrievalError(lat, lon, still, "source returned no record")
    return [cached[d] for d in wanted]


def weather_field_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(WeatherDay) if f.name != "date")


def is_gap(rec) -> bool:
    return isinstance(rec, WeatherGap) or any(math.isnan(v) for v in rec.vector())
