"""Noise-prediction network: residual blocks built around diagonal state-space layers.

Layout per block: add the projected step embedding, widen with a k=3
convolution, mix along time with a bidirectional diagonal SSM, add the
projected conditioning, mix again, then a tanh*sigmoid gate feeding the
residual and skip projections. Skip outputs of all blocks are summed and
passed through two 1x1 convolutions to give the noise estimate.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn


@dataclass
class DenoiserConfig:
    in_channels: int = 2  # signal + condition channels (K)
    residual_blocks: int = 4
    residual_channels: int = 64
    skip_channels: int = 64
    step_embedding_dim: int = 128
    step_hidden_dim: int = 512
    state_dim: int = 64
    sequence_length: int = 48
    bidirectional: bool = True
    dropout: float = 0.0

    def __post_init__(self):
        if self.residual_blocks < 1:
            raise ValueError("residual_blocks must be >= 1")
        for name in ("in_channels", "residual_channels", "skip_channels", "step_embedding_dim",
                     "step_hidden_dim", "state_dim", "sequence_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.step_embedding_dim % 2 or self.state_dim % 2:
            raise ValueError("step_embedding_dim and state_dim must be even")

    @property
    def condition_channels(self) -> int:
        return 2 * self.in_channels

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def full_scale(cls, in_channels: int) -> "DenoiserConfig":
        return cls(in_channels=in_channels, residual_blocks=36, residual_channels=256,
                   skip_channels=256, state_dim=64)


def sinusoidal_features(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Interleaved [sin, cos] pairs over geometric frequencies; accepts t = 0."""
    t = torch.as_tensor(t, dtype=torch.get_default_dtype()).reshape(-1, 1)
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=t.dtype) / max(half - 1, 1))
    ang = t * freqs
    return torch.stack([torch.sin(ang), torch.cos(ang)], dim=-1).reshape(t.shape[0], dim)


class StepEmbedding(nn.Module):
    def __init__(self, dim: int = 128, hidden: int = 512):
        super().__init__()
        self.dim = dim
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, hidden)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        t = torch.as_tensor(t)
        if torch.any(t < 1):
            raise ValueError(f"diffusion step index must be >= 1, got min {int(t.min())}")
        h = sinusoidal_features(t, self.dim).to(self.fc1.weight.dtype)
        h = F.silu(self.fc1(h))
        return F.silu(self.fc2(h))


def embed_step(t, dim: int = 128, module: StepEmbedding | None = None) -> torch.Tensor:
    module = module or StepEmbedding(dim)
    return module(torch.as_tensor(t).reshape(-1))


class DiagonalSSM(nn.Module):
    """Diagonal state-space convolution (S4D-Lin initialisation, ZOH discretisation).

    Each of ``channels`` features owns ``state_dim / 2`` complex modes; the
    convolution kernel spans the whole sequence. With ``bidirectional`` a
    second kernel runs over the reversed sequence.
    """

    def __init__(self, channels: int, state_dim: int, length: int, bidirectional: bool = True,
                 dt_min: float = 1e-3, dt_max: float = 1e-1):
        super().__init__()
        self.channels, self.length, self.bidirectional = channels, length, bidirectional
        n = state_dim // 2
        k = 2 if bidirectional else 1
        log_dt = torch.rand(channels) * (math.log(dt_max) - math.log(dt_min)) + math.log(dt_min)
        self.log_dt = nn.Parameter(log_dt)
        self.log_a_real = nn.Parameter(torch.log(0.5 * torch.ones(k * channels, n)))
        self.a_imag = nn.Parameter(math.pi * torch.arange(n, dtype=torch.float32).repeat(k * channels, 1))
        c = torch.randn(k * channels, n, 2) * (0.5 ** 0.5)
        self.c = nn.Parameter(c)
        self.d = nn.Parameter(torch.randn(channels))
        self._cache = None

    def kernel(self) -> torch.Tensor:
        """(k*channels, length) real convolution kernel."""
        k = 2 if self.bidirectional else 1
        dt = torch.exp(self.log_dt).repeat(k).unsqueeze(-1)
        a_re = -torch.exp(self.log_a_real)
        a_im = self.a_imag
        # coef = C * (exp(dt*A) - 1) / A, in real arithmetic
        e = torch.exp(a_re * dt)
        num_re = e * torch.cos(a_im * dt) - 1.0
        num_im = e * torch.sin(a_im * dt)
        den = a_re * a_re + a_im * a_im
        q_re = (num_re * a_re + num_im * a_im) / den
        q_im = (num_im * a_re - num_re * a_im) / den
        c_re, c_im = self.c[..., 0], self.c[..., 1]
        coef_re = c_re * q_re - c_im * q_im
        coef_im = c_re * q_im + c_im * q_re
        pos = torch.arange(self.length, dtype=self.c.dtype)
        decay = torch.exp((a_re * dt).unsqueeze(-1) * pos)
        phase = (a_im * dt).unsqueeze(-1) * pos
        v_re = decay * torch.cos(phase)
        v_im = decay * torch.sin(phase)
        return 2.0 * (torch.einsum("hn,hnl->hl", coef_re, v_re) - torch.einsum("hn,hnl->hl", coef_im, v_im))

    def _spectrum(self) -> torch.Tensor:
        """rfft of the (possibly two-sided) kernel padded to 2L.

        Cached while gradients are off; sampling reuses it at every step.
        """
        if torch.is_grad_enabled() or self.training:
            self._cache = None
        elif self._cache is not None:
            return self._cache
        k = self.kernel()
        L = self.length
        if self.bidirectional:
            k0, k1 = k[: self.channels], k[self.channels:]
            k = F.pad(k0, (0, L)) + F.pad(k1.flip(-1), (L, 0))
        spec = torch.fft.rfft(k, n=2 * L)
        if not (torch.is_grad_enabled() or self.training):
            self._cache = spec
        return spec

    def forward(self, u: torch.Tensor) -> torch.Tensor:
        L = u.shape[-1]
        if L != self.length:
            raise ValueError(f"sequence length {L} != configured {self.length}")
        n = 2 * L
        y = torch.fft.irfft(torch.fft.rfft(u, n=n) * self._spectrum(), n=n)[..., :L]
        return y + u * self.d.unsqueeze(-1)


class SequenceStateLayer(nn.Module):
    """SSM followed by GELU, a residual connection and channel LayerNorm."""

    def __init__(self, channels: int, state_dim: int, length: int, bidirectional: bool = True,
                 dropout: float = 0.0):
        super().__init__()
        self.ssm = DiagonalSSM(channels, state_dim, length, bidirectional)
        self.dropout = nn.Dropout(dropout)
        self.norm = nn.LayerNorm(channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.dropout(F.gelu(self.ssm(x))) + x
        return self.norm(y.transpose(1, 2)).transpose(1, 2)


def _conv1x1(cin, cout, zero=False):
    conv = nn.Conv1d(cin, cout, 1)
    if zero:
        nn.init.zeros_(conv.weight)
        nn.init.zeros_(conv.bias)
    else:
        nn.init.kaiming_normal_(conv.weight)
    return conv


class ResidualBlock(nn.Module):
    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        r = cfg.residual_channels
        self.residual_channels = r
        self.fc_t = nn.Linear(cfg.step_hidden_dim, r)
        self.conv = nn.Conv1d(r, 2 * r, kernel_size=3, padding=1)
        nn.init.kaiming_normal_(self.conv.weight)
        self.ssm1 = SequenceStateLayer(2 * r, cfg.state_dim, cfg.sequence_length, cfg.bidirectional, cfg.dropout)
        self.cond_conv = _conv1x1(cfg.condition_channels, 2 * r)
        self.ssm2 = SequenceStateLayer(2 * r, cfg.state_dim, cfg.sequence_length, cfg.bidirectional, cfg.dropout)
        self.res_conv = _conv1x1(r, r)
        self.skip_conv = _conv1x1(r, cfg.skip_channels)

    def forward(self, x, cond, step_emb):
        if x.shape[1] != self.residual_channels:
            raise ValueError(f"block input has {x.shape[1]} channels, expected {self.residual_channels}")
        if cond.shape[0] != x.shape[0] or cond.shape[-1] != x.shape[-1]:
            raise ValueError(f"condition shape {tuple(cond.shape)} incompatible with {tuple(x.shape)}")
        h = x + self.fc_t(step_emb).unsqueeze(-1)
        h = self.ssm1(self.conv(h))
        h = self.ssm2(h + self.cond_conv(cond))
        r = self.residual_channels
        out = torch.tanh(h[:, :r]) * torch.sigmoid(h[:, r:])
        return (x + self.res_conv(out)) * math.sqrt(0.5), self.skip_conv(out)


class Denoiser(nn.Module):
    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        self.cfg = cfg
        self.input_proj = _conv1x1(cfg.in_channels, cfg.residual_channels)
        self.step_embedding = StepEmbedding(cfg.step_embedding_dim, cfg.step_hidden_dim)
        self.blocks = nn.ModuleList(ResidualBlock(cfg) for _ in range(cfg.residual_blocks))
        self.skip_proj = _conv1x1(cfg.skip_channels, cfg.skip_channels)
        # zero-initialised so the untrained network predicts zero noise
        self.output_proj = _conv1x1(cfg.skip_channels, cfg.in_channels, zero=True)

    def forward(self, x_bar: torch.Tensor, cond: torch.Tensor, steps: torch.Tensor) -> torch.Tensor:
        if not torch.isfinite(x_bar).all() or not torch.isfinite(cond).all():
            raise ValueError("denoiser input contains non-finite values")
        if x_bar.shape[1] != self.cfg.in_channels or cond.shape[1] != self.cfg.condition_channels:
            raise ValueError(
                f"expected {self.cfg.in_channels} signal and {self.cfg.condition_channels} "
                f"conditioning channels, got {x_bar.shape[1]} and {cond.shape[1]}"
            )
        emb = self.step_embedding(steps)
        h = F.relu(self.input_proj(x_bar))
        skip = 0.0
        for block in self.blocks:
            h, s = block(h, cond, emb)
            skip = skip + s
        skip = skip / math.sqrt(len(self.blocks))
        return self.output_proj(F.relu(self.skip_proj(skip)))
