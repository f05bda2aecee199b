import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lvgen import pipeline
from lvgen.cli import main
from lvgen.config import ConfigError, RunConfig, load_config, parse_config_text
from lvgen.pipeline import read_kv, select_profiles

TINY = """\
# tiny desk config
diffusion.T = 10
diffusion.epochs = 1
diffusion.batch_size = 32
denoiser.residual_blocks = 1
denoiser.residual_channels = 8
denoiser.skip_channels = 8
denoiser.state_dim = 8
denoiser.step_embedding_dim = 16
denoiser.step_hidden_dim = 32
network.profiles = 6
"""


@pytest.fixture(scope="module")
def cfg_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "tiny.cfg"
    p.write_text(TINY)
    return p


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def ran(tmp_path_factory, cfg_file):
    """A full tiny pipeline: diffusion WCS plus the identity ('real') generator."""
    out = tmp_path_factory.mktemp("run")
    base = ("--out", out, "--config", cfg_file)
    assert run("ingest", *base) == 0
    for stage in ("train", "sample", "evaluate", "loadflow"):
        assert run(stage, *base, "--mode", "WCS") == 0
    for stage in ("sample", "evaluate", "loadflow"):
        assert run(stage, *base, "--set", "sample.generator=real") == 0
    assert run("report", *base) == 0
    return out


# ---- config


def test_config_precedence(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("run.seed = 5\nrun.mode = WC\ndiffusion.lr = 0.01\n")
    assert RunConfig().run.seed == 0
    cfg = load_config(p, {"run.seed": "9", "run.mode": None})
    assert cfg.run.seed == 9 and cfg.run.mode == "WC" and cfg.diffusion.lr == 0.01


def test_config_text_round_trip():
    cfg = parse_config_text("metrics.figures = false\nsplit.train_fraction = 0.6\n")
    again = parse_config_text(cfg.to_text())
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.metrics.figures is False


@pytest.mark.parametrize("text", ["nonsense", "run.nope = 1", "bogus.seed = 1", "run.seed = abc",
                                  "run.mode = XX", "sample.draws = 0"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text).validate()


def test_model_labels():
    cfg = RunConfig()
    assert cfg.model_label == "WCS"
    cfg.set("sample.generator", "tao")
    assert cfg.model_label == "Tao"


def test_select_profiles_one_day_per_substation():
    keys = [("a", 1), ("a", 2), ("b", 1), ("c", 1), ("c", 2), ("c", 3)]
    idx = select_profiles(keys, 3, seed=0)
    assert sorted(keys[i][0] for i in idx) == ["a", "b", "c"]
    assert len(select_profiles(keys, 5, seed=0)) == 5
    assert len(set(select_profiles(keys, 99, seed=0))) == 6


# ---- exit codes


def test_missing_upstream_exit_3(tmp_path, capsys):
    assert run("train", "--out", tmp_path) == 3
    assert "run `lvgen ingest` first" in capsys.readouterr().err
    assert run("report", "--out", tmp_path) == 3


def test_input_errors_exit_2(tmp_path):
    assert run("ingest", "--out", tmp_path, "--set", f"data.monitoring={tmp_path / 'none.csv'}") == 2
    assert run("ingest", "--out", tmp_path, "--config", tmp_path / "absent.cfg") == 2
    assert run("ingest", "--out", tmp_path, "--set", "noequals") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("substation_id,timestamp_utc\n")
    assert run("ingest", "--out", tmp_path, "--set", f"data.monitoring={bad}") == 2


def test_divergence_exit_4(tmp_path, monkeypatch):
    from lvgen.diffusion import DivergenceError

    def boom(cfg, out):
        raise DivergenceError(17)

    monkeypatch.setitem(pipeline.STAGES, "sample", boom)
    assert run("sample", "--out", tmp_path) == 4


def test_bad_flag_value_is_usage_error():
    with pytest.raises(SystemExit) as err:
        run("train", "--mode", "ZZ")
    assert err.value.code == 2


# ---- stages


def test_ingest_outputs(ran):
    stage = ran / "ingest"
    for name in ("dataset.npz", "split.csv", "discards.txt", "rejects.csv", "config.txt", "manifest.json"):
        assert (stage / name).is_file()
    kv = read_kv(stage / "discards.txt")
    assert int(kv["rejected_rows"]) > 0
    assert int(kv["train_days"]) + int(kv["test_days"]) == int(kv["kept_days"])
    assert len((stage / "rejects.csv").read_text().splitlines()) == int(kv["rejected_rows"]) + 1


def test_ingest_is_byte_identical(tmp_path, ran, cfg_file):
    assert run("ingest", "--out", tmp_path, "--config", cfg_file) == 0
    for name in ("dataset.npz", "split.csv", "discards.txt", "rejects.csv"):
        assert (tmp_path / "ingest" / name).read_bytes() == (ran / "ingest" / name).read_bytes()


def test_every_stage_writes_provenance(ran):
    manifests = list(ran.rglob("manifest.json"))
    assert len(manifests) == 1 + 4 + 3 + 1
    for m in manifests:
        data = json.loads(m.read_text())
        assert (m.parent / "config.txt").is_file()
        assert data["tool"] == "lvgen" and data["backend"] in ("numba", "numpy")
        for rel, digest in data["outputs"].items():
            assert pipeline.sha256_file(m.parent / rel) == digest


def test_identity_evaluate_and_loadflow(ran):
    metrics = read_kv(ran / "evaluate" / "Real" / "metrics.txt")
    for k in ("mse", "mmd", "wasserstein", "marginal_score", "mivo"):
        assert float(metrics[k]) == 0.0
    comp = read_kv(ran / "loadflow" / "Real" / "comparison.txt")
    for q in ("v", "theta"):
        assert float(comp[f"{q}.mae"]) == 0.0 and float(comp[f"{q}.r2"]) == 1.0
        assert float(comp[f"{q}.p5_abs_error"]) == 0.0 and float(comp[f"{q}.p95_abs_error"]) == 0.0


def test_model_outputs_and_report(ran):
    assert (ran / "train" / "WCS" / "checkpoint.npz").is_file()
    assert (ran / "train" / "WCS" / "history.csv").is_file()
    figs = sorted(p.name for p in (ran / "evaluate" / "WCS" / "figures").iterdir())
    assert figs == sorted(["real_vs_lvgenwcs_acf.png", "real_vs_lvgenwcs_deciles.png",
                           "real_vs_lvgenwcs_distribution.png"])
    comp = read_kv(ran / "loadflow" / "WCS" / "comparison.txt")
    assert float(comp["v.mae"]) >= 0 and comp["profiles"] == "6"
    report = (ran / "report" / "report.txt").read_text()
    assert "LVGenWCS" in report and "Real" in report


def test_evaluate_and_loadflow_deterministic(ran, cfg_file):
    before = {p: p.read_bytes() for p in [ran / "evaluate" / "WCS" / "metrics.txt",
                                          ran / "loadflow" / "WCS" / "comparison.txt",
                                          ran / "loadflow" / "WCS" / "candidate.csv"]}
    assert run("evaluate", "--out", ran, "--config", cfg_file, "--mode", "WCS") == 0
    assert run("loadflow", "--out", ran, "--config", cfg_file, "--mode", "WCS") == 0
    for p, data in before.items():
        assert p.read_bytes() == data


# the bundled sample is far smaller than either baseline wants
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_baseline_generators(ran, cfg_file, tmp_path):
    import shutil

    shutil.copytree(ran / "ingest", tmp_path / "ingest")
    base = ("--out", tmp_path, "--config", cfg_file)
    for gen in ("gmm", "tao"):
        flag = ("--set", f"sample.generator={gen}", "--set", "sample.gmm_k_max=2")
        for stage in ("train", "sample", "evaluate"):
            assert run(stage, *base, *flag) == 0
    m = read_kv(tmp_path / "evaluate" / "Tao" / "metrics.txt")
    assert float(m["mmd"]) >= 0


def test_multiple_draws_write_band(ran, cfg_file, tmp_path):
    import shutil

    shutil.copytree(ran / "ingest", tmp_path / "ingest")
    flag = ("--out", tmp_path, "--config", cfg_file, "--set", "sample.generator=real", "--set", "sample.draws=2")
    assert run("sample", *flag) == 0
    assert run("loadflow", *flag) == 0
    rows = (tmp_path / "loadflow" / "Real" / "band.csv").read_text().splitlines()
    assert len(rows) == 49


def test_console_entry_point(tmp_path):
    env = {**os.environ, "LVGEN_NUMBA": "0"}
    proc = subprocess.run([sys.executable, "-m", "lvgen.cli", "report", "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 3
