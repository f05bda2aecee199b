"""Deterministic calendar encoding of a date."""
from __future__ import annotations

from datetime import date

import numpy as np

N_CALENDAR = 7 + 12 + 1


def calendar_features(day: date) -> np.ndarray:
    """Day-of-week one-hot (Monday first), month one-hot, weekend flag."""
    v = np.zeros(N_CALENDAR)
    dow = day.weekday()
    v[dow] = 1.0
    v[7 + day.month - 1] = 1.0
    v[19] = 1.0 if dow >= 5 else 0.0
    return v
