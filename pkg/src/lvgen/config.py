"""Run configuration: flat ``section.key = value`` text with typed defaults.

Precedence, lowest first: built-in defaults, the ``--config`` file, then
command-line flags. The merged result is written next to every output.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class DataSection:
    monitoring: str = ""  # empty: the bundled sample corpus
    metadata: str = ""
    weather_dir: str = ""


@dataclass
class SplitSection:
    threshold_days: int = 10
    train_fraction: float = 0.7
    forced_test_primaries: str = ""  # comma separated


@dataclass
class DiffusionSection:
    T: int = 200
    beta0: float = 1e-4
    beta1: float = 0.02
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    patience: int = 10
    min_delta: float = 1e-4
    loss_target: str = "noise"
    max_steps: int = 0  # 0: unlimited
    time_budget_s: float = 0.0  # 0: unlimited
    eval_subset: int = 256


@dataclass
class DenoiserSection:
    residual_blocks: int = 4
    residual_channels: int = 64
    skip_channels: int = 64
    state_dim: int = 64
    step_embedding_dim: int = 128
    step_hidden_dim: int = 512


@dataclass
class SampleSection:
    generator: str = "diffusion"  # diffusion | gmm | tao | real
    draws: int = 1
    batch_size: int = 256
    gmm_k_max: int = 6


@dataclass
class MetricsSection:
    bins: int = 50
    max_lag: int = 47
    n_perm: int = 0
    figures: bool = True


@dataclass
class NetworkSection:
    path: str = ""  # empty: the bundled 77-bus fixture
    nominal_kv: float = 11.0
    profiles: int = 26
    tolerance: float = 1e-8
    max_iter: int = 50


@dataclass
class RunSection:
    seed: int = 0
    mode: str = "WCS"
    jobs: int = 1


SECTIONS = {
    "data": DataSection, "split": SplitSection, "diffusion": DiffusionSection,
    "denoiser": DenoiserSection, "sample": SampleSection, "metrics": MetricsSection,
    "network": NetworkSection, "run": RunSection,
}
MODES = ("U", "WC", "WCS")
GENERATORS = ("diffusion", "gmm", "tao", "real")


@dataclass
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    split: SplitSection = field(default_factory=SplitSection)
    diffusion: DiffusionSection = field(default_factory=DiffusionSection)
    denoiser: DenoiserSection = field(default_factory=DenoiserSection)
    sample: SampleSection = field(default_factory=SampleSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    run: RunSection = field(default_factory=RunSection)

    def items(self):
        for sec in SECTIONS:
            obj = getattr(self, sec)
            for f in fields(obj):
                yield f"{sec}.{f.name}", getattr(obj, f.name)

    def set(self, key: str, raw):
        sec, _, name = key.partition(".")
        if sec not in SECTIONS or not name:
            raise ConfigError(f"unknown config key {key!r}")
        obj = getattr(self, sec)
        types = {f.name: f.type for f in fields(obj)}
        if name not in types:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(obj, name, _coerce(key, types[name], raw))

    def validate(self) -> "RunConfig":
        if self.run.mode not in MODES:
            raise ConfigError(f"run.mode must be one of {MODES}, got {self.run.mode!r}")
        if self.sample.generator not in GENERATORS:
            raise ConfigError(f"sample.generator must be one of {GENERATORS}")
        if self.run.jobs < 1:
            raise ConfigError("run.jobs must be >= 1")
        if self.sample.draws < 1:
            raise ConfigError("sample.draws must be >= 1")
        return self

    def to_text(self) -> str:
        return "".join(f"{k} = {_render(v)}\n" for k, v in self.items())

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    @property
    def model_label(self) -> str:
        """Directory label of the generator in use (mode name for diffusion)."""
        g = self.sample.generator
        return self.run.mode if g == "diffusion" else {"gmm": "GMM", "tao": "Tao", "real": "Real"}[g]


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key, typ, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ in (int, "int"):
            return int(text)
        if typ in (float, "float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {typ}") from None
    return text


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        k, v = line.split("=", 1)
        try:
            cfg.set(k.strip(), v)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        cfg = parse_config_text(p.read_text(), cfg)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg.set(k, v)
    return cfg.validate()
