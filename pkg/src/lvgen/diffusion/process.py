"""Forward corruption, conditional training loss and the reverse sampler.

Samples are laid out as (batch, channels, 48). The first ``n_signal``
channels are generated; the remaining channels are conditions, marked with
mask value 1. The mask is per channel and shared across the batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .schedule import DiffusionSchedule

LOSS_TARGETS = ("noise", "masked-x0")


class DivergenceError(RuntimeError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite values in reverse process at step t={step}")


def _is_torch(x) -> bool:
    return isinstance(x, torch.Tensor)


def _coef(values: np.ndarray, t, like):
    """values[t-1] shaped to broadcast against ``like`` (scalar t or per-row t)."""
    if _is_torch(t):
        t = t.detach().cpu().numpy()
    t = np.asarray(t)
    picked = values[t - 1]
    if t.ndim == 0:
        return float(picked)
    shape = (-1,) + (1,) * (like.ndim - 1)
    if _is_torch(like):
        return torch.as_tensor(picked, dtype=like.dtype, device=like.device).reshape(shape)
    return picked.reshape(shape)


def corrupt(x0, t, z, schedule: DiffusionSchedule):
    """x_bar = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * z."""
    if tuple(x0.shape) != tuple(z.shape):
        raise ValueError(f"noise shape {tuple(z.shape)} != signal shape {tuple(x0.shape)}")
    schedule.check_step(t.detach().cpu().numpy() if _is_torch(t) else t)
    ab = schedule.alpha_bar
    return _coef(np.sqrt(ab), t, x0) * x0 + _coef(np.sqrt(1.0 - ab), t, x0) * z


def _mask_like(mask, x):
    """Per-channel mask (K,) -> broadcastable (1, K, 1) in x's array type."""
    if _is_torch(x):
        m = torch.as_tensor(mask, dtype=x.dtype, device=x.device)
    else:
        m = np.asarray(mask, dtype=float)
    return m.reshape(1, -1, 1) if x.ndim == 3 else m.reshape(-1, 1)


def restore_conditions(x_bar, x0, mask):
    m = _mask_like(mask, x_bar)
    return x_bar * (1 - m) + x0 * m


def network_conditioning(x0, mask):
    """C = concat(x0 * M, M) along channels."""
    m = _mask_like(mask, x0)
    if _is_torch(x0):
        return torch.cat([x0 * m, m.expand_as(x0)], dim=-2)
    return np.concatenate([x0 * m, np.broadcast_to(m, x0.shape)], axis=-2)


@dataclass
class TrainingBatch:
    x0: torch.Tensor  # (B, K, L) scaled signals with condition channels
    mask: np.ndarray  # (K,)
    z: torch.Tensor  # standard normal, same shape as x0
    steps: torch.Tensor  # (B,) uniform over 1..T

    @classmethod
    def draw(cls, x0: torch.Tensor, mask, T: int, generator: torch.Generator | None = None):
        z = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
        steps = torch.randint(1, T + 1, (x0.shape[0],), generator=generator)
        return cls(x0, np.asarray(mask), z, steps)


def prepare_inputs(batch: TrainingBatch, schedule: DiffusionSchedule):
    """Corrupt the full sample, then put the conditional values back."""
    x_bar = corrupt(batch.x0, batch.steps, batch.z, schedule)
    x_bar = restore_conditions(x_bar, batch.x0, batch.mask)
    return x_bar, network_conditioning(batch.x0, batch.mask)


def training_step(batch: TrainingBatch, net, schedule: DiffusionSchedule, target: str = "noise"):
    """Loss for one batch; call ``.backward()`` on the result to train ``net``.

    ``target="noise"`` regresses the injected noise on generated channels.
    ``target="masked-x0"`` reproduces the printed objective, which compares
    the network output with x0 on the conditional positions; it is kept
    only for ablation.
    """
    mask = np.asarray(batch.mask, dtype=float)
    if mask.size and np.all(mask == 1):
        raise ValueError("mask marks every channel as a condition; nothing to generate")
    if target not in LOSS_TARGETS:
        raise ValueError(f"unknown loss target {target!r}")
    x_bar, cond = prepare_inputs(batch, schedule)
    pred = net(x_bar, cond, batch.steps)
    m = _mask_like(mask, pred)
    if target == "noise":
        gen = (1 - m).expand_as(pred)
        return ((pred - batch.z) ** 2 * gen).sum() / gen.sum()
    return ((pred * m - batch.x0 * m) ** 2).mean()


def reverse_step(xt, t: int, eps_pred, schedule: DiffusionSchedule, z):
    """One ancestral step x_t -> x_{t-1}; the noise term vanishes at t = 1."""
    if t < 1 or t > schedule.T:
        raise ValueError(f"reverse step needs t in (0, {schedule.T}], got {t}")
    a = schedule.alpha[t - 1]
    ab = schedule.alpha_bar[t - 1]
    coef = (1.0 - a) / np.sqrt(1.0 - ab) if ab < 1.0 else 0.0
    x = (xt - coef * eps_pred) / np.sqrt(a)
    sigma = schedule.sigma[t - 1]
    if sigma > 0:
        x = x + sigma * z
    return x


@torch.no_grad()
def sample(
    net,
    conditions: torch.Tensor,
    mask,
    schedule: DiffusionSchedule,
    seed: int = 0,
    n_signal: int = 2,
    batch_size: int | None = None,
    callback=None,
) -> torch.Tensor:
    """Draw generated channels for each row of ``conditions``.

    ``conditions`` is the full (B, K, L) layout; values on generated
    channels are ignored. Returns (B, n_signal, L). ``callback(t, x)``
    sees the state after each step, once conditions are restored.
    """
    mask = np.asarray(mask, dtype=float)
    if conditions.ndim != 3 or conditions.shape[1] != mask.size:
        raise ValueError(f"conditions {tuple(conditions.shape)} do not match mask of size {mask.size}")
    if np.any(mask[:n_signal] != 0):
        raise ValueError("generated channels must carry mask 0")
    if batch_size is not None and conditions.shape[0] > batch_size:
        chunks = torch.split(conditions, batch_size)
        return torch.cat(
            [
                sample(net, c, mask, schedule, seed + 7919 * i, n_signal, callback=callback)
                for i, c in enumerate(chunks)
            ]
        )
    gen = torch.Generator().manual_seed(int(seed))
    x0c = conditions * _mask_like(mask, conditions)
    cond = network_conditioning(x0c, mask)
    x = torch.randn(conditions.shape, generator=gen, dtype=conditions.dtype)
    x = restore_conditions(x, x0c, mask)
    B = conditions.shape[0]
    for t in range(schedule.T, 0, -1):
        steps = torch.full((B,), t, dtype=torch.long)
        eps = net(x, cond, steps)
        z = torch.randn(conditions.shape, generator=gen, dtype=conditions.dtype)
        x = reverse_step(x, t, eps, schedule, z)
        x = restore_conditions(x, x0c, mask)
        if not torch.isfinite(x).all():
            raise DivergenceError(t)
        if callback is not None:
            callback(t, x)
    return x[:, :n_signal]
