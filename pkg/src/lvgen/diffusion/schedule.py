"""Noise schedules. Step indices are 1-based: t = 1..T maps to array slot t-1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DiffusionSchedule:
    beta: np.ndarray
    beta0: float | None = None
    beta1: float | None = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1:
            raise ValueError("beta must be a non-empty vector")
        if np.any(beta < 0) or np.any(beta >= 1):
            raise ValueError("beta entries must lie in [0, 1)")
        object.__setattr__(self, "beta", beta)

    @property
    def T(self) -> int:
        return int(self.beta.size)

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)

    @property
    def alpha_bar_prev(self) -> np.ndarray:
        """alpha_bar at t-1, with alpha_bar_0 = 1."""
        return np.concatenate([[1.0], self.alpha_bar[:-1]])

    @property
    def sigma(self) -> np.ndarray:
        """Posterior standard deviation sqrt(beta_tilde_t); sigma_1 = 0."""
        ab, ab_prev = self.alpha_bar, self.alpha_bar_prev
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.where(1.0 - ab > 0, (1.0 - ab_prev) / (1.0 - ab) * self.beta, 0.0)
        return np.sqrt(var)

    def check_step(self, t) -> None:
        tt = np.asarray(t)
        if np.any(tt < 1) or np.any(tt > self.T):
            raise ValueError(f"diffusion step must lie in (0, {self.T}], got {t}")

    def to_dict(self) -> dict:
        if self.beta0 is not None:
            return {"kind": "linear", "T": self.T, "beta0": self.beta0, "beta1": self.beta1}
        return {"kind": "explicit", "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiffusionSchedule":
        if d["kind"] == "linear":
            return linear_beta_schedule(d["T"], d["beta0"], d["beta1"])
        return cls(np.array(d["beta"]))


def linear_beta_schedule(T: int = 200, beta0: float = 1e-4, beta1: float = 0.02) -> DiffusionSchedule:
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0.0 < beta0 <= beta1 < 1.0:
        raise ValueError(f"need 0 < beta0 <= beta1 < 1, got beta0={beta0}, beta1={beta1}")
    return DiffusionSchedule(np.linspace(beta0, beta1, T), beta0=float(beta0), beta1=float(beta1))
