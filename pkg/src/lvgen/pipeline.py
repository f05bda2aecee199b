"""Pipeline stages behind the command line.

Every stage writes into ``<out>/<stage>/`` (model stages add a label
subdirectory such as ``train/WCS``), reads its upstream artifacts from the
same root, and finishes by writing the effective config and a manifest.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name
from .config import RunConfig
from .container import load_container, save_container
from .ingest import (
    SchemaError,
    WeatherRetrievalError,
    build_days,
    cleanse,
    fetch_weather,
    parse_metadata_csv,
    parse_monitoring_csv,
    split_train_test,
)
from .ingest.split import ChannelScaler
from .ingest.weather import default_client, is_gap

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"
SAMPLE_DIR = DATA_DIR / "sample"


class InputError(ValueError):
    """Bad or missing user input (exit code 2)."""


class MissingArtifact(RuntimeError):
    """An upstream stage has not produced what this stage needs (exit code 3)."""

    def __init__(self, path: Path, stage: str):
        self.path, self.stage = Path(path), stage
        super().__init__(f"missing artifact {self.path} (run `lvgen {stage}` first)")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require(path: Path, stage: str) -> Path:
    if not Path(path).exists():
        raise MissingArtifact(path, stage)
    return Path(path)


def finish_stage(stage_dir: Path, cfg: RunConfig, stage: str, inputs, t0: float, extra=None) -> dict:
    """Write ``config.txt`` and ``manifest.json`` listing every output file."""
    stage_dir.mkdir(parents=True, exist_ok=True)
    (stage_dir / "config.txt").write_text(cfg.to_text())
    outputs = {
        str(p.relative_to(stage_dir)): sha256_file(p)
        for p in sorted(stage_dir.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "tool": "lvgen",
        "version": __version__,
        "stage": stage,
        "backend": backend_name(),
        "config_hash": cfg.digest(),
        "inputs": {str(p): sha256_file(p) for p in sorted(set(map(str, inputs)))},
        "outputs": outputs,
        "timings": {"seconds": round(time.perf_counter() - t0, 3)},
        **(extra or {}),
    }
    (stage_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------- dataset


@dataclass
class Dataset:
    """Cleansed, split corpus in physical units plus per-day side data."""

    x: dict[str, np.ndarray]  # split -> (N, 2, 48) kW / kVAr
    keys: dict[str, list[tuple[str, date]]]
    weather: dict[str, np.ndarray]  # split -> (N, 5)
    customers: dict[str, np.ndarray]
    scaler: ChannelScaler
    assignment: dict[str, str]
    discards: dict[str, int]
    rejects: int

    def scaled(self, split: str) -> np.ndarray:
        return self.scaler.apply(self.x[split])

    def save(self, path) -> Path:
        arrays = {}
        for s in ("train", "test"):
            arrays[f"{s}/x"] = self.x[s]
            arrays[f"{s}/weather"] = self.weather[s]
            arrays[f"{s}/customers"] = self.customers[s]
        header = {
            "kind": "dataset",
            "keys": {s: [[sid, d.isoformat()] for sid, d in self.keys[s]] for s in ("train", "test")},
            "scaler": self.scaler.to_dict(),
            "assignment": self.assignment,
            "discards": self.discards,
            "rejects": self.rejects,
        }
        return save_container(path, arrays, header)

    @classmethod
    def load(cls, path) -> "Dataset":
        arrays, h = load_container(path)
        if h.get("kind") != "dataset":
            raise InputError(f"{path} is not a dataset container")
        splits = ("train", "test")
        return cls(
            {s: arrays[f"{s}/x"] for s in splits},
            {s: [(sid, date.fromisoformat(d)) for sid, d in h["keys"][s]] for s in splits},
            {s: arrays[f"{s}/weather"] for s in splits},
            {s: arrays[f"{s}/customers"] for s in splits},
            ChannelScaler.from_dict(h["scaler"]),
            h["assignment"], h["discards"], h["rejects"],
        )


def _data_paths(cfg: RunConfig) -> tuple[Path, Path, Path]:
    mon = Path(cfg.data.monitoring) if cfg.data.monitoring else SAMPLE_DIR / "monitoring.csv"
    meta = Path(cfg.data.metadata) if cfg.data.metadata else mon.parent / "metadata.csv"
    wdir = Path(cfg.data.weather_dir) if cfg.data.weather_dir else mon.parent / "weather"
    for p in (mon, meta):
        if not p.is_file():
            raise InputError(f"input file {p} does not exist")
    return mon, meta, wdir


def run_ingest(cfg: RunConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    mon, meta_path, wdir = _data_paths(cfg)
    try:
        measurements, rejects = parse_monitoring_csv(mon)
        meta = parse_metadata_csv(meta_path)
    except (SchemaError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    days, report = build_days(measurements)
    days, rep2 = cleanse(days)
    report.merge(rep2)

    kept = []
    for d in days:
        if d.substation_id not in meta:
            report.add("no-metadata")
        else:
            kept.append(d)
    client = default_client()
    weather = {}
    by_sub: dict[str, list] = {}
    for d in kept:
        by_sub.setdefault(d.substation_id, []).append(d)
    usable = []
    for sid in sorted(by_sub):
        sub_days = by_sub[sid]
        m = meta[sid]
        lo, hi = min(d.date for d in sub_days), max(d.date for d in sub_days)
        try:
            recs = fetch_weather(m.latitude, m.longitude, lo, hi, wdir, client)
        except WeatherRetrievalError as exc:
            log.warning("no weather for %s: %s", sid, exc)
            report.add("no-weather", len(sub_days))
            continue
        by_date = {r.date: r for r in recs}
        for d in sub_days:
            rec = by_date[d.date]
            if is_gap(rec):
                report.add("weather-gap")
                continue
            weather[d.key] = rec.vector()
            usable.append(d)
    if not usable:
        raise InputError("no usable substation-days after cleansing")
    forced = tuple(s.strip() for s in cfg.split.forced_test_primaries.split(",") if s.strip())
    split = split_train_test(usable, meta, cfg.split.threshold_days, cfg.split.train_fraction,
                             forced, seed=cfg.run.seed)
    if not split.train:
        raise InputError("split left no training substations; lower split.threshold_days")

    def pack(ds):
        keys = [d.key for d in ds]
        return (np.array([d.as_array() for d in ds]).reshape(-1, 2, 48), keys,
                np.array([weather[k] for k in keys]).reshape(-1, 5),
                np.array([meta[k[0]].customer_count for k in keys], dtype=np.int64))

    parts = {s: pack(getattr(split, s)) for s in ("train", "test")}
    dataset = Dataset(
        {s: parts[s][0] for s in parts}, {s: parts[s][1] for s in parts},
        {s: parts[s][2] for s in parts}, {s: parts[s][3] for s in parts},
        split.scaler, dict(sorted(split.assignment.items())), report.as_dict(), len(rejects),
    )
    stage = out / "ingest"
    stage.mkdir(parents=True, exist_ok=True)
    dataset.save(stage / "dataset.npz")
    with open(stage / "split.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["substation_id", "side"])
        w.writerows(sorted(split.assignment.items()))
    lines = [f"rejected_rows={len(rejects)}", f"kept_days={len(usable)}",
             f"train_days={len(split.train)}", f"test_days={len(split.test)}",
             f"train_fraction={split.train_fraction!r}"]
    lines += [f"discard.{k}={v}" for k, v in report.as_dict().items()]
    (stage / "discards.txt").write_text("\n".join(lines) + "\n")
    with open(stage / "rejects.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "reason"])
        w.writerows((r.row, r.reason) for r in rejects)
    return finish_stage(stage, cfg, "ingest", [mon, meta_path], t0,
                        {"rejects": len(rejects), "discards": report.as_dict()})


def load_dataset(out: Path) -> Dataset:
    return Dataset.load(_require(out / "ingest" / "dataset.npz", "ingest"))


# ---------------------------------------------------------------- models


def _diffusion_parts(cfg: RunConfig, ds: Dataset):
    from .diffusion import ConditionEncoder, build_corpus

    enc = ConditionEncoder.fit(cfg.run.mode, ds.weather["train"])
    corp = {s: build_corpus(ds.scaled(s), ds.keys[s], ds.weather[s], ds.customers[s], enc)
            for s in ("train", "test")}
    return enc, corp


def _train_config(cfg: RunConfig):
    from .diffusion import TrainConfig

    d = cfg.diffusion
    return TrainConfig(
        epochs=d.epochs, batch_size=d.batch_size, lr=d.lr, patience=d.patience, min_delta=d.min_delta,
        seed=cfg.run.seed, loss_target=d.loss_target, max_steps=d.max_steps or None,
        time_budget_s=d.time_budget_s or None, eval_subset=d.eval_subset or None,
        T=d.T, beta0=d.beta0, beta1=d.beta1,
    )


def _denoiser_config(cfg: RunConfig, in_channels: int):
    from .denoiser import DenoiserConfig

    n = cfg.denoiser
    return DenoiserConfig(in_channels=in_channels, residual_blocks=n.residual_blocks,
                          residual_channels=n.residual_channels, skip_channels=n.skip_channels,
                          state_dim=n.state_dim, step_embedding_dim=n.step_embedding_dim,
                          step_hidden_dim=n.step_hidden_dim)


def run_train(cfg: RunConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    ds_path = _require(out / "ingest" / "dataset.npz", "ingest")
    ds = Dataset.load(ds_path)
    stage = out / "train" / cfg.model_label
    stage.mkdir(parents=True, exist_ok=True)
    gen = cfg.sample.generator
    extra = {}
    if gen == "diffusion":
        import torch

        from .diffusion import train

        torch.set_num_threads(cfg.run.jobs)
        enc, corp = _diffusion_parts(cfg, ds)
        res = train(corp["train"], corp["test"], _train_config(cfg),
                    _denoiser_config(cfg, len(enc.mask)), stage / "checkpoint.npz", ds.scaler)
        with open(stage / "history.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, ["epoch", "train_loss", "test_loss", "steps"])
            w.writeheader()
            w.writerows(res.history)
        extra = {"best_epoch": res.best_epoch, "epochs_run": len(res.history)}
    elif gen == "gmm":
        from .baselines import GmmBaseline

        model = GmmBaseline.fit(ds.scaled("train"), k_max=cfg.sample.gmm_k_max, seed=cfg.run.seed)
        model.save(stage / "model.npz")
        extra = {"components": [m.n_components for m in model.channels]}
    elif gen == "tao":
        from .baselines import TaoBaseline

        model = TaoBaseline.fit([k[1] for k in ds.keys["train"]], ds.weather["train"][:, 0],
                                ds.x["train"][:, 0])
        model.save(stage / "model.npz")
        extra = {"rank": model.model.rank}
    return finish_stage(stage, cfg, "train", [ds_path], t0, extra)


def run_sample(cfg: RunConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    ds_path = _require(out / "ingest" / "dataset.npz", "ingest")
    ds = Dataset.load(ds_path)
    label = cfg.model_label
    gen = cfg.sample.generator
    inputs = [ds_path]
    n = len(ds.keys["test"])
    draws, physical = [], []
    for d in range(cfg.sample.draws):
        seed = cfg.run.seed + d
        if gen == "diffusion":
            import torch

            from .diffusion import generate, load_checkpoint

            torch.set_num_threads(cfg.run.jobs)
            ck = _require(out / "train" / label / "checkpoint.npz", "train")
            inputs = [ds_path, ck]
            res = load_checkpoint(ck)
            _, corp = _diffusion_parts(cfg, ds)
            draws.append(generate(res, corp["test"], seed=seed, batch_size=cfg.sample.batch_size))
            physical.append(ds.scaler.invert(draws[-1]))
        elif gen == "gmm":
            from .baselines import GmmBaseline

            mp = _require(out / "train" / label / "model.npz", "train")
            inputs = [ds_path, mp]
            draws.append(GmmBaseline.load(mp).sample(n, seed=seed))
            physical.append(ds.scaler.invert(draws[-1]))
        elif gen == "tao":
            from .baselines import TaoBaseline

            mp = _require(out / "train" / label / "model.npz", "train")
            inputs = [ds_path, mp]
            phys = TaoBaseline.load(mp).predict([k[1] for k in ds.keys["test"]], ds.weather["test"][:, 0])
            draws.append(ds.scaler.apply(phys))
            physical.append(phys)
        else:  # real: the test corpus itself, for identity checks
            draws.append(ds.scaled("test"))
            physical.append(ds.x["test"])
    scaled = np.stack(draws)
    stage = out / "sample" / label
    stage.mkdir(parents=True, exist_ok=True)
    save_container(stage / "generated.npz",
                   {"scaled": scaled, "physical": np.stack(physical)},
                   {"kind": "generated", "label": label, "generator": gen,
                    "keys": [[sid, dt.isoformat()] for sid, dt in ds.keys["test"]]})
    return finish_stage(stage, cfg, "sample", inputs, t0, {"draws": len(draws), "rows": n})


def load_generated(out: Path, label: str):
    arrays, header = load_container(_require(out / "sample" / label / "generated.npz", "sample"))
    return arrays["scaled"], arrays["physical"], header


# ---------------------------------------------------------------- evaluation


def run_evaluate(cfg: RunConfig, out: Path) -> dict:
    from .metrics import Corpus, evaluate, write_figures

    t0 = time.perf_counter()
    label = cfg.model_label
    ds = load_dataset(out)
    scaled, _, header = load_generated(out, label)
    keys = [tuple(k) for k in header["keys"]]
    real_keys = [(sid, d.isoformat()) for sid, d in ds.keys["test"]]
    real = Corpus("real", ds.scaled("test"), real_keys)
    gen = Corpus(_display(label), scaled[0], keys)
    report = evaluate(real, gen, cfg.metrics.bins, cfg.metrics.max_lag, cfg.metrics.n_perm, cfg.run.seed)
    stage = out / "evaluate" / label
    report.write(stage / "metrics.txt")
    if cfg.metrics.figures:
        write_figures(stage / "figures", real, gen, report)
    inputs = [out / "ingest" / "dataset.npz", out / "sample" / label / "generated.npz"]
    return finish_stage(stage, cfg, "evaluate", inputs, t0, {"metrics": report.scalars()})


def _display(label: str) -> str:
    return f"LVGen{label}" if label in ("U", "WC", "WCS") else label


def select_profiles(keys, n_profiles: int, seed: int) -> list[int]:
    """One test day per substation (seeded), cycling substations until
    ``n_profiles`` rows are chosen or the test set is exhausted."""
    rng = np.random.default_rng(seed)
    by_sub: dict[str, list[int]] = {}
    for i, (sid, _) in enumerate(keys):
        by_sub.setdefault(sid, []).append(i)
    pools = {s: list(rng.permutation(v)) for s, v in sorted(by_sub.items())}
    chosen = []
    while len(chosen) < n_profiles and any(pools.values()):
        for s in sorted(pools):
            if pools[s] and len(chosen) < n_profiles:
                chosen.append(int(pools[s].pop()))
    return chosen


def _network(cfg: RunConfig):
    from .powerflow import NetworkError, load_fixture, load_network_file

    try:
        if cfg.network.path:
            p = Path(cfg.network.path)
            if not p.is_file():
                raise InputError(f"network file {p} does not exist")
            return load_network_file(p), p
        from .powerflow import fixture_path

        return load_fixture(), fixture_path()
    except NetworkError as exc:
        raise InputError(str(exc)) from exc


def run_loadflow(cfg: RunConfig, out: Path) -> dict:
    from .powerflow import compare_results, repeat_and_band, scenario_run

    t0 = time.perf_counter()
    label = cfg.model_label
    ds = load_dataset(out)
    _, physical, _ = load_generated(out, label)
    net, net_path = _network(cfg)
    idx = select_profiles(ds.keys["test"], cfg.network.profiles, cfg.run.seed)
    kw = {"tol": cfg.network.tolerance, "max_iter": cfg.network.max_iter}
    truth = scenario_run(net, ds.x["test"][idx], **kw)
    stage = out / "loadflow" / label
    stage.mkdir(parents=True, exist_ok=True)
    truth.write_csv(stage / "truth.csv")
    stats, runs = [], []
    for d in range(physical.shape[0]):
        cand = scenario_run(net, physical[d][idx], **kw)
        if d == 0:
            cand.write_csv(stage / "candidate.csv")
        stats.append(compare_results(truth, cand, nominal_kv=cfg.network.nominal_kv))
        runs.append(cand.v)
    lines = [f"model={_display(label)}", f"profiles={len(idx)}", f"draws={len(stats)}",
             f"truth_failed_slots={truth.n_failed}"]
    for q in ("v", "theta"):
        for f in ("mae", "r2", "p5_abs_error", "p95_abs_error"):
            vals = [getattr(s[q], f) for s in stats]
            lines.append(f"{q}.{f}={float(np.mean(vals))!r}")
        lines.append(f"{q}.excluded_steps={max(s[q].excluded_steps for s in stats)}")
    lines.append("# v errors in volts at network.nominal_kv; theta errors in degrees")
    (stage / "comparison.txt").write_text("\n".join(lines) + "\n")
    if len(runs) >= 2:
        band = repeat_and_band(runs)
        bus = int(np.argmin(truth.v.min(axis=0)))
        with open(stage / "band.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestep", "bus_id", "truth_v_pu", "mean_v_pu", "min_v_pu", "max_v_pu"])
            for t in range(truth.timesteps):
                w.writerow([t, truth.bus_ids[bus], repr(float(truth.v[t, bus])), repr(float(band.mean[t, bus])),
                            repr(float(band.lo[t, bus])), repr(float(band.hi[t, bus]))])
    inputs = [out / "ingest" / "dataset.npz", out / "sample" / label / "generated.npz", net_path]
    return finish_stage(stage, cfg, "loadflow", inputs, t0,
                        {"v_mae": float(np.mean([s["v"].mae for s in stats]))})


def read_kv(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line and not line.startswith("#") and "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def run_report(cfg: RunConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    metrics = sorted((out / "evaluate").glob("*/metrics.txt")) if (out / "evaluate").exists() else []
    flows = sorted((out / "loadflow").glob("*/comparison.txt")) if (out / "loadflow").exists() else []
    if not metrics and not flows:
        raise MissingArtifact(out / "evaluate", "evaluate")
    lines = ["Synthesis metrics (scaled values, unweighted mean over P and Q)", ""]
    cols = ("mse", "mmd", "wasserstein", "marginal_score", "mivo")
    lines.append(f"{'model':<12}" + "".join(f"{c:>16}" for c in cols))
    for p in metrics:
        kv = read_kv(p)
        lines.append(f"{kv.get('generated', p.parent.name):<12}" + "".join(f"{float(kv[c]):>16.6g}" for c in cols))
    for q, title in (("v", "Voltage magnitude error (V)"), ("theta", "Phase angle error (deg)")):
        lines += ["", title, ""]
        fcols = ("mae", "r2", "p5_abs_error", "p95_abs_error")
        lines.append(f"{'model':<12}" + "".join(f"{c:>16}" for c in fcols))
        for p in flows:
            kv = read_kv(p)
            lines.append(f"{kv.get('model', p.parent.name):<12}" + "".join(f"{float(kv[f'{q}.{c}']):>16.6g}" for c in fcols))
    lines += ["", "# mivo is the minimum-plus-volatility interpretation of MiVo"]
    stage = out / "report"
    stage.mkdir(parents=True, exist_ok=True)
    (stage / "report.txt").write_text("\n".join(lines) + "\n")
    return finish_stage(stage, cfg, "report", metrics + flows, t0)


STAGES = {
    "ingest": run_ingest, "train": run_train, "sample": run_sample,
    "evaluate": run_evaluate, "loadflow": run_loadflow, "report": run_report,
}
