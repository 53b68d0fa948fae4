import json
import os

import pytest

from debias_forge.cli import (
    config_digest, main, parse_config_file, resolve_config,
)
from debias_forge.errors import ConfigError
from debias_forge.synthgen import load_dataset
from debias_forge.trainer import read_metrics


TINY_CONF = """
# fast settings for plumbing tests
data.train_size = 600
data.test_size = 120
data.vocab_size = 60
data.tokens_per_segment = 4
shallow.sample_size = 150
shallow.epochs = 2
shallow.learning_rate = 0.005
shallow.feature_dim = 130
shallow.hidden = 8
train.epochs = 1
train.eval_every = 5
train.feature_dim = 130
train.hidden = 8
report.seeds = 1,2
report.n_runs = 2
"""


@pytest.fixture()
def conf(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(TINY_CONF)
    return str(path)


def _run(*argv):
    return main(list(argv))


@pytest.fixture()
def pipeline(conf, tmp_path):
    """generate -> shallow -> identify once; returns the key paths."""
    out = tmp_path / "out"
    assert _run("generate", "--config", conf, "--out-dir", str(out), "--seed", "5",
                "--quiet") == 0
    cfg = resolve_config(conf, seed=5)
    digest = config_digest(cfg)
    assert _run("shallow", "--config", conf, "--data", str(out / "train.jsonl"),
                "--out-dir", str(out), "--seed", "5", "--quiet",
                "--set", "shallow.acc_band=0.0,1.0",
                "--set", "shallow.high_conf_min=0.0") == 0
    cfg2 = resolve_config(conf, {"shallow.acc_band": [0.0, 1.0],
                                 "shallow.high_conf_min": 0.0}, seed=5)
    d2 = config_digest(cfg2)
    ckpt = out / f"shallow-{d2}.ckpt.json"
    assert _run("identify", "--config", conf, "--checkpoint", str(ckpt),
                "--data", str(out / "train.jsonl"), "--out-dir", str(out),
                "--seed", "5", "--quiet") == 0
    weights = out / f"weights-{config_digest(resolve_config(conf, seed=5))}.jsonl"
    return {"out": out, "conf": conf, "digest": digest, "ckpt": ckpt,
            "weights": weights}


def test_parse_config_file(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("a.b = 3\nx = hello  # trailing comment\nlist = 1,2.5,z\n")
    parsed = parse_config_file(p)
    assert parsed == {"a.b": 3, "x": "hello", "list": [1, 2.5, "z"]}
    p.write_text("no equals sign\n")
    with pytest.raises(ConfigError):
        parse_config_file(p)


def test_unknown_key_suggestion(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("bais_proportion = 0.5\n")
    with pytest.raises(ConfigError, match="data.bias_proportion"):
        resolve_config(str(p))


def test_digest_stable_under_key_order():
    a = resolve_config(None, {"train.epochs": 2, "data.seed": 9})
    b = resolve_config(None, {"data.seed": 9, "train.epochs": 2})
    assert config_digest(a) == config_digest(b)
    c = resolve_config(None, {"train.epochs": 3, "data.seed": 9})
    assert config_digest(a) != config_digest(c)


def test_seed_precedence(tmp_path, monkeypatch):
    conf = tmp_path / "c.conf"
    conf.write_text("data.seed = 1\n")
    monkeypatch.setenv("DEBIAS_FORGE_SEED", "7")
    cfg = resolve_config(str(conf))
    assert cfg["data.seed"] == 1        # explicit key beats the env default
    assert cfg["train.seed"] == 7       # env fills the unset ones
    assert resolve_config(str(conf), seed=3)["data.seed"] == 3


def test_generate_outputs_and_determinism(conf, tmp_path):
    o1, o2 = tmp_path / "g1", tmp_path / "g2"
    for o in (o1, o2):
        assert _run("generate", "--config", conf, "--out-dir", str(o),
                    "--seed", "4", "--quiet") == 0
    names = sorted(p.name for p in o1.iterdir())
    assert names == sorted(p.name for p in o2.iterdir())
    datasets = [n for n in names if n.endswith(".jsonl")]
    assert sorted(datasets) == ["eval_anti_biased.jsonl", "eval_biased.jsonl",
                                "eval_original.jsonl", "train.jsonl"]
    for n in datasets:
        assert (o1 / n).read_bytes() == (o2 / n).read_bytes()
    train = load_dataset(o1 / "train.jsonl")
    assert len(train) == 600


def test_generate_bad_config_exits_2(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("data.bias_proportion = 1.5\n")
    out = tmp_path / "o"
    assert _run("generate", "--config", str(conf), "--out-dir", str(out),
                "--quiet") == 2
    assert not (out / "train.jsonl").exists()


def test_identify_is_deterministic(pipeline):
    w1 = pipeline["weights"].read_bytes()
    assert _run("identify", "--config", pipeline["conf"],
                "--checkpoint", str(pipeline["ckpt"]),
                "--data", str(pipeline["out"] / "train.jsonl"),
                "--out-dir", str(pipeline["out"]), "--seed", "5", "--quiet") == 0
    assert pipeline["weights"].read_bytes() == w1


def test_identify_schema_mismatch_exits_3(pipeline, tmp_path):
    other = tmp_path / "other"
    assert _run("generate", "--config", pipeline["conf"], "--out-dir", str(other),
                "--set", "data.num_labels=4", "--seed", "5", "--quiet") == 0
    assert _run("identify", "--checkpoint", str(pipeline["ckpt"]),
                "--data", str(other / "train.jsonl"),
                "--out-dir", str(tmp_path / "x"), "--quiet") == 3


def test_train_baseline_and_trajectory_report(pipeline, tmp_path):
    out = pipeline["out"]
    assert _run("train", "--config", pipeline["conf"],
                "--data", str(out / "train.jsonl"), "--eval-dir", str(out),
                "--out-dir", str(out), "--seed", "5", "--quiet") == 0
    metrics = out / f"run-{pipeline['digest']}.metrics.jsonl"
    assert metrics.exists()
    log = read_metrics(metrics)
    assert "acc_anti_biased" in log[-1]
    rep = tmp_path / "rep"
    assert _run("report", "--kind", "trajectory", "--metrics", str(metrics),
                "--config", pipeline["conf"], "--out-dir", str(rep),
                "--seed", "5", "--quiet") == 0
    csv_path = rep / f"trajectory-{pipeline['digest']}.csv"
    header = csv_path.read_text().splitlines()[0]
    assert header == "step,acc_original,acc_biased,acc_anti_biased,alpha"


def test_train_debias_method_via_cli(pipeline):
    out = pipeline["out"]
    rc = _run("train", "--config", pipeline["conf"],
              "--set", "train.method=poe",
              "--data", str(out / "train.jsonl"),
              "--weights", str(pipeline["weights"]),
              "--out-dir", str(out), "--seed", "5", "--quiet")
    assert rc == 0
    cfg = resolve_config(pipeline["conf"], {"train.method": "poe"}, seed=5)
    ckpt = out / f"model-{config_digest(cfg)}.ckpt.json"
    meta = json.loads(ckpt.read_text())["meta"]
    assert meta["method"] == "poe"


def test_train_missing_weights_exits_2(pipeline):
    out = pipeline["out"]
    assert _run("train", "--config", pipeline["conf"],
                "--set", "train.method=reweight",
                "--data", str(out / "train.jsonl"),
                "--out-dir", str(out), "--quiet") == 2


def test_conf_reg_teacher_cached(pipeline):
    out = pipeline["out"]
    args = ["train", "--config", pipeline["conf"],
            "--set", "train.method=conf_reg",
            "--data", str(out / "train.jsonl"),
            "--weights", str(pipeline["weights"]),
            "--out-dir", str(out), "--seed", "5", "--quiet"]
    assert _run(*args) == 0
    teachers = list(out.glob("teacher-*.ckpt.json"))
    assert len(teachers) == 1
    stamp = teachers[0].stat().st_mtime_ns
    assert _run(*args) == 0  # second run reuses the cache
    assert teachers[0].stat().st_mtime_ns == stamp
    # refusing auto-training must fail before any work when cache is absent
    teachers[0].unlink()
    assert _run(*args, "--no-auto-teacher") == 2


def test_shallow_grid_no_pass_exits_5(pipeline, tmp_path):
    out = tmp_path / "grid"
    rc = _run("shallow", "--config", pipeline["conf"], "--grid",
              "--data", str(pipeline["out"] / "train.jsonl"),
              "--set", "shallow.grid_sizes=150", "--set", "shallow.grid_epochs=1",
              "--set", "shallow.acc_band=0.98,0.99",
              "--out-dir", str(out), "--seed", "5", "--quiet")
    assert rc == 5
    assert list(out.glob("grid-*.csv"))


def test_report_stability_and_compare(pipeline, tmp_path):
    out = pipeline["out"]
    rep = tmp_path / "rep2"
    assert _run("report", "--kind", "stability", "--config", pipeline["conf"],
                "--data", str(out / "train.jsonl"), "--out-dir", str(rep),
                "--seed", "5", "--quiet") == 0
    stab = next(rep.glob("stability-*.json"))
    assert json.loads(stab.read_text())["runs"] == 2

    assert _run("train", "--config", pipeline["conf"],
                "--data", str(out / "train.jsonl"),
                "--out-dir", str(out), "--seed", "5", "--quiet") == 0
    model = next(out.glob("model-*.ckpt.json"))
    assert _run("report", "--kind", "compare", "--checkpoints", str(model),
                "--suite-dir", str(out), "--out-dir", str(rep),
                "--seed", "5", "--quiet") == 0
    rows = next(rep.glob("compare-*.csv")).read_text().splitlines()
    assert rows[0] == "method,original,biased,anti_biased"
    assert len(rows) == 2


def test_report_missing_inputs_exit_2(tmp_path):
    assert _run("report", "--kind", "trajectory",
                "--out-dir", str(tmp_path), "--quiet") == 2
    assert _run("report", "--kind", "compare",
                "--out-dir", str(tmp_path), "--quiet") == 2
