"""Tao Vanilla regression benchmark.

E(load) = b0 + b1*trend + day x hour + month + month x (T, T^2, T^3)
          + hour x (T, T^2, T^3)

All categoricals are one-hot. The full catalog has 290 columns but only 285
are linearly independent: the day x hour block and the month block each sum
to the intercept column, and for every power k the month x T^k and
hour x T^k blocks sum to the same T^k column. The fit therefore pins one
reference column per aliased block at zero (reference-level coding), which
makes the coefficients identifiable without changing the fitted surface.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from datetime import date

import numpy as np

from ..container import load_container, save_container

N_DAYS, N_HOURS, N_MONTHS, N_POWERS = 7, 24, 12, 3
POWER_FACTOR = 0.98


def _catalog() -> list[str]:
    cols = ["intercept", "trend"]
    cols += [f"day{d}:hour{h}" for d in range(1, N_DAYS + 1) for h in range(N_HOURS)]
    cols += [f"month{m}" for m in range(1, N_MONTHS + 1)]
    cols += [f"month{m}:tmp^{k}" for k in range(1, N_POWERS + 1) for m in range(1, N_MONTHS + 1)]
    cols += [f"hour{h}:tmp^{k}" for k in range(1, N_POWERS + 1) for h in range(N_HOURS)]
    return cols


COLUMNS = tuple(_catalog())
N_COLUMNS = len(COLUMNS)
_INDEX = {name: i for i, name in enumerate(COLUMNS)}
# one column per aliased block, coefficient fixed at zero
REFERENCE_COLUMNS = ("day1:hour0", "month1", "hour0:tmp^1", "hour0:tmp^2", "hour0:tmp^3")
STRUCTURAL_RANK = N_COLUMNS - len(REFERENCE_COLUMNS)
_FREE = np.array([i for i, c in enumerate(COLUMNS) if c not in REFERENCE_COLUMNS])


def design_row(dow: int, month: int, hour: int, tmp: float, trend: float) -> np.ndarray:
    """Feature row from explicit parts; ``dow`` runs 1 (Monday) to 7."""
    if not 1 <= dow <= N_DAYS:
        raise ValueError(f"day-of-week {dow} outside [1, 7]")
    if not 1 <= month <= N_MONTHS:
        raise ValueError(f"month {month} outside [1, 12]")
    if not 0 <= hour < N_HOURS:
        raise ValueError(f"hour {hour} outside [0, 23]")
    if not (math.isfinite(tmp) and math.isfinite(trend)):
        raise ValueError("tmp and trend must be finite")
    row = np.zeros(N_COLUMNS)
    row[0] = 1.0
    row[1] = trend
    row[_INDEX[f"day{dow}:hour{hour}"]] = 1.0
    row[_INDEX[f"month{month}"]] = 1.0
    for k in range(1, N_POWERS + 1):
        row[_INDEX[f"month{month}:tmp^{k}"]] = tmp ** k
        row[_INDEX[f"hour{hour}:tmp^{k}"]] = tmp ** k
    return row


def tao_design_row(day: date, hour: int, tmp: float, trend: float) -> np.ndarray:
    return design_row(day.isoweekday(), day.month, hour, tmp, trend)


def design_matrix(days, hours, tmps, trends) -> np.ndarray:
    return np.array([tao_design_row(d, h, t, r) for d, h, t, r in zip(days, hours, tmps, trends)])


@dataclass
class TaoModel:
    beta: np.ndarray
    columns: tuple[str, ...] = COLUMNS
    rank: int = STRUCTURAL_RANK
    n_rows: int = 0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.shape != (len(self.columns),):
            raise ValueError(f"{self.beta.size} coefficients for {len(self.columns)} columns")

    def coefficient(self, name: str) -> float:
        return float(self.beta[self.columns.index(name)])


def tao_fit(rows, loads) -> TaoModel:
    """Least squares over the identifiable columns.

    If the data leave the identifiable block rank deficient (too few rows,
    unobserved hours or months) the minimum-norm solution is returned and a
    warning reports the rank.
    """
    x = np.asarray(rows, dtype=float)
    y = np.asarray(loads, dtype=float).ravel()
    if x.ndim != 2 or x.shape[1] != N_COLUMNS:
        raise ValueError(f"design must have {N_COLUMNS} columns, got shape {x.shape}")
    if x.shape[0] != y.size:
        raise ValueError(f"{x.shape[0]} rows but {y.size} loads")
    sub = x[:, _FREE]
    # column scaling keeps the cubic temperature terms from dominating the rank test
    scale = np.linalg.norm(sub, axis=0)
    scale[scale == 0] = 1.0
    coef, _, rank, _ = np.linalg.lstsq(sub / scale, y, rcond=None)
    if rank < STRUCTURAL_RANK:
        warnings.warn(
            f"Tao design rank {rank} < {STRUCTURAL_RANK} identifiable columns "
            f"({x.shape[0]} rows); using the minimum-norm solution",
            RuntimeWarning, stacklevel=2,
        )
    beta = np.zeros(N_COLUMNS)
    beta[_FREE] = coef / scale
    return TaoModel(beta, rank=int(rank), n_rows=x.shape[0])


def tao_predict(model: TaoModel, rows) -> np.ndarray:
    x = np.atleast_2d(np.asarray(rows, dtype=float))
    if x.shape[1] != model.beta.size:
        raise ValueError(f"rows have {x.shape[1]} columns, model has {model.beta.size}")
    return x @ model.beta


def reactive_from_active(p, power_factor: float = POWER_FACTOR) -> np.ndarray:
    """Q for a fixed lagging power factor; the regression itself has no Q output."""
    if not 0 < power_factor <= 1:
        raise ValueError("power factor must lie in (0, 1]")
    return np.asarray(p, dtype=float) * math.tan(math.acos(power_factor))


def _day_rows(day: date, tmp: float, trend: float, slots: int = 48) -> np.ndarray:
    per_hour = slots // N_HOURS
    return np.array([tao_design_row(day, s // per_hour, tmp, trend) for s in range(slots)])


@dataclass
class TaoBaseline:
    """Half-hourly day profiles from a pooled Tao regression.

    Both half-hours of an hour share its hour columns; the daily mean
    temperature stands in for hourly readings. Trend counts days from
    ``origin``.
    """

    model: TaoModel
    origin: date
    power_factor: float = POWER_FACTOR

    @classmethod
    def fit(cls, dates, tmps, p_profiles, origin: date | None = None) -> "TaoBaseline":
        p = np.asarray(p_profiles, dtype=float)
        origin = origin or min(dates)
        rows = np.vstack([_day_rows(d, t, (d - origin).days, p.shape[1]) for d, t in zip(dates, tmps)])
        return cls(tao_fit(rows, p.ravel()), origin)

    def predict(self, dates, tmps, slots: int = 48) -> np.ndarray:
        """(N, 2, slots) array of P and fixed-power-factor Q."""
        p = np.array([tao_predict(self.model, _day_rows(d, t, (d - self.origin).days, slots))
                      for d, t in zip(dates, tmps)])
        return np.stack([p, reactive_from_active(p, self.power_factor)], axis=1)

    def save(self, path):
        header = {"kind": "tao", "columns": list(self.model.columns), "rank": self.model.rank,
                  "n_rows": self.model.n_rows, "origin": self.origin.isoformat(),
                  "power_factor": self.power_factor}
        return save_container(path, {"beta": self.model.beta}, header)

    @classmethod
    def load(cls, path) -> "TaoBaseline":
        arrays, header = load_container(path)
        if header.get("kind") != "tao":
            raise ValueError(f"{path} holds a {header.get('kind')!r} model, not a Tao regression")
        model = TaoModel(arrays["beta"], tuple(header["columns"]), header["rank"], header["n_rows"])
        return cls(model, date.fromisoformat(header["origin"]), header["power_factor"])
