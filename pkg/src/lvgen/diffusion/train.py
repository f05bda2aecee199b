"""Training loop with plateau early stopping and checkpoint I/O."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..container import load_container, save_container
from ..denoiser import Denoiser, DenoiserConfig
from ..ingest.split import ChannelScaler
from .conditions import ConditionedCorpus, ConditionEncoder
from .process import TrainingBatch, sample, training_step
from .schedule import DiffusionSchedule, linear_beta_schedule

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 0.0
    patience: int = 10
    min_delta: float = 1e-4
    eval_repeats: int = 2  # fixed-noise passes over the test set per evaluation
    eval_subset: int | None = 256  # cap on test rows used for the stopping criterion
    seed: int = 0
    loss_target: str = "noise"
    max_steps: int | None = None
    time_budget_s: float | None = None
    T: int = 200
    beta0: float = 1e-4
    beta1: float = 0.02

    def schedule(self) -> DiffusionSchedule:
        return linear_beta_schedule(self.T, self.beta0, self.beta1)


@dataclass
class TrainResult:
    model: Denoiser
    schedule: DiffusionSchedule
    encoder: ConditionEncoder
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    checkpoint: Path | None = None
    scaler: ChannelScaler | None = None

    @property
    def test_losses(self) -> list[float]:
        return [h["test_loss"] for h in self.history]


@torch.no_grad()
def evaluate_loss(model, x: torch.Tensor, mask, schedule, batch_size=256, repeats=2, seed=12345,
                  target="noise") -> float:
    """Mean loss over ``x`` with noise and steps drawn from a fixed seed."""
    model.eval()
    gen = torch.Generator().manual_seed(seed)
    total, count = 0.0, 0
    for _ in range(repeats):
        for chunk in torch.split(x, batch_size):
            batch = TrainingBatch.draw(chunk, mask, schedule.T, gen)
            total += float(training_step(batch, model, schedule, target)) * chunk.shape[0]
            count += chunk.shape[0]
    model.train()
    return total / max(count, 1)


def train(
    train_set: ConditionedCorpus,
    test_set: ConditionedCorpus | None,
    config: TrainConfig | None = None,
    denoiser_config: DenoiserConfig | None = None,
    checkpoint_path: str | Path | None = None,
    scaler: ChannelScaler | None = None,
) -> TrainResult:
    """Fit a denoiser on ``train_set``. Stops when the test loss has not
    improved by ``min_delta`` for ``patience`` consecutive epochs."""
    config = config or TrainConfig()
    if len(train_set) == 0:
        raise ValueError("empty training set")
    torch.manual_seed(config.seed)
    encoder = train_set.encoder
    mask = encoder.mask
    schedule = config.schedule()
    k = len(mask)
    dcfg = denoiser_config or DenoiserConfig(in_channels=k)
    if dcfg.in_channels != k:
        dcfg = DenoiserConfig(**{**dcfg.to_dict(), "in_channels": k})
    model = Denoiser(dcfg)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)

    x_train = train_set.tensor()
    x_test = test_set.tensor() if test_set is not None and len(test_set) else x_train
    if config.eval_subset is not None and x_test.shape[0] > config.eval_subset:
        pick = np.random.default_rng(config.seed).choice(x_test.shape[0], config.eval_subset, replace=False)
        x_test = x_test[torch.as_tensor(np.sort(pick))]
    gen = torch.Generator().manual_seed(config.seed)
    result = TrainResult(model, schedule, encoder, scaler=scaler)

    best, best_state, stale, steps = np.inf, None, 0, 0
    t0 = time.perf_counter()
    out_of_budget = False
    for epoch in range(1, config.epochs + 1):
        perm = torch.randperm(x_train.shape[0], generator=gen)
        running, nb = 0.0, 0
        for idx in torch.split(perm, config.batch_size):
            batch = TrainingBatch.draw(x_train[idx], mask, schedule.T, gen)
            loss = training_step(batch, model, schedule, config.loss_target)
            opt.zero_grad()
            loss.backward()
            opt.step()
            running += loss.item()
            nb += 1
            steps += 1
            if config.max_steps is not None and steps >= config.max_steps:
                out_of_budget = True
                break
            if config.time_budget_s is not None and time.perf_counter() - t0 > config.time_budget_s:
                out_of_budget = True
                break
        test_loss = evaluate_loss(model, x_test, mask, schedule, repeats=config.eval_repeats,
                                  target=config.loss_target)
        result.history.append({"epoch": epoch, "train_loss": running / max(nb, 1),
                               "test_loss": test_loss, "steps": steps})
        log.info("epoch %d train %.4f test %.4f", epoch, running / max(nb, 1), test_loss)
        if test_loss < best - config.min_delta:
            best, stale = test_loss, 0
            best_state = {k_: v.detach().clone() for k_, v in model.state_dict().items()}
            result.best_epoch = epoch
        else:
            stale += 1
        if stale >= config.patience:
            result.stopped_early = epoch < config.epochs
            break
        if out_of_budget:
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    if checkpoint_path is not None:
        result.checkpoint = save_checkpoint(checkpoint_path, result, config)
    return result


def save_checkpoint(path, result: TrainResult, config: TrainConfig | None = None) -> Path:
    arrays = {f"param/{k}": v.detach().cpu().numpy() for k, v in result.model.state_dict().items()}
    header = {
        "kind": "diffusion",
        "schedule": result.schedule.to_dict(),
        "mode": result.encoder.mode,
        "channels": result.encoder.channel_names,
        "mask": result.encoder.mask.tolist(),
        "encoder": result.encoder.to_dict(),
        "denoiser": result.model.cfg.to_dict(),
        "scaler": result.scaler.to_dict() if result.scaler is not None else None,
        "train_config": asdict(config) if config is not None else None,
        "history": result.history,
        "best_epoch": result.best_epoch,
    }
    return save_container(path, arrays, header)


def load_checkpoint(path) -> TrainResult:
    arrays, header = load_container(path)
    if header.get("kind") != "diffusion":
        raise ValueError(f"{path} holds a {header.get('kind')!r} model, not a diffusion checkpoint")
    model = Denoiser(DenoiserConfig(**header["denoiser"]))
    state = {k[len("param/"):]: torch.as_tensor(v) for k, v in arrays.items() if k.startswith("param/")}
    model.load_state_dict(state)
    model.eval()
    scaler = ChannelScaler.from_dict(header["scaler"]) if header.get("scaler") else None
    return TrainResult(
        model=model,
        schedule=DiffusionSchedule.from_dict(header["schedule"]),
        encoder=ConditionEncoder.from_dict(header["encoder"]),
        history=header.get("history", []),
        best_epoch=header.get("best_epoch", 0),
        checkpoint=Path(path),
        scaler=scaler,
    )


def generate(result: TrainResult, corpus: ConditionedCorpus, seed: int = 0, batch_size: int = 256) -> np.ndarray:
    """Scaled (N, 2, 48) samples, one per row of ``corpus`` conditions."""
    x = corpus.tensor()
    out = sample(result.model, x, result.encoder.mask, result.schedule, seed=seed, batch_size=batch_size)
    return out.numpy().astype(np.float64)
