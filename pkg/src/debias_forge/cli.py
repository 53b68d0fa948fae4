"""Command-line orchestration: generate -> shallow -> identify -> train ->
report, driven by a line-oriented key = value config file with dotted
sections. Every command writes a manifest carrying the resolved-config digest
and is byte-deterministic given the same inputs and seed (manifest timestamps
excepted).

Exit codes: 0 success, 2 config error, 3 data/schema error, 4 numeric
failure, 5 degenerate shallow model.
"""

import argparse
import csv
import difflib
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, replace

from . import __version__
from .classifier import load_checkpoint, save_checkpoint
from .errors import (
    ConfigError, DataError, DegenerateShallowError, NumericError, SchemaError,
)
from .evaluation import (
    accuracy, anneal_sweep, bias_proportion_study, confidence_histogram,
)
from .objectives import METHODS, AnnealSchedule
from .shallow import (
    ShallowConfig, ShallowThresholds, compute_bias_weights,
    grid_search_shallow, load_bias_weights, oracle_band_thresholds,
    save_bias_weights, stability_study, train_shallow, validate_shallow,
)
from .synthgen import SynthConfig, gen_dataset, inject_bias, load_dataset, make_eval_suite, save_dataset
from .trainer import TrainConfig, read_metrics, train_main, train_teacher, write_metrics

logger = logging.getLogger("debias_forge")

REPORT_KINDS = ("trajectory", "histogram", "sweep", "proportion", "stability", "compare")

# every accepted config key with its built-in default
DEFAULTS = {
    "data.num_labels": 3,
    "data.train_size": 20000,
    "data.test_size": 2000,
    "data.vocab_size": 1000,
    "data.tokens_per_segment": 8,
    "data.noise_token_rate": 1.0,
    "data.manipulated_fraction": 0.3,
    "data.bias_proportion": 0.9,
    "data.seed": 0,
    "shallow.sample_size": 2000,
    "shallow.epochs": 50,
    "shallow.learning_rate": 2e-2,
    "shallow.batch_size": 32,
    "shallow.hidden": 64,
    "shallow.feature_dim": 2064,
    "shallow.optimizer": "adam",
    "shallow.adam_beta2": 0.9,
    "shallow.seed": 0,
    "shallow.grid_sizes": [500, 1000, 1500, 2000],
    "shallow.grid_epochs": [20, 50, 100],
    "shallow.acc_band": "oracle",
    "shallow.band_width": 0.10,
    "shallow.high_conf_min": 0.90,
    "train.method": "baseline_ce",
    "train.epochs": 3,
    "train.batch_size": 64,
    "train.learning_rate": 1e-3,
    "train.optimizer": "adam",
    "train.adam_beta2": 0.999,
    "train.hidden": 64,
    "train.feature_dim": 2064,
    "train.eval_every": 250,
    "train.seed": 0,
    "train.weights_path": "",
    "anneal.enabled": False,
    "anneal.a": 1.0,
    "report.method": "poe",
    "report.seeds": [1, 2, 3],
    "report.m_values": [0.6, 0.7, 0.8, 0.9],
    "report.a_values": [1.0, 0.8, 0.6, 0.4, 0.2, 0.0],
    "report.n_runs": 10,
    "report.bin_width": 0.05,
}


# ---------------------------------------------------------------------------
# config file handling

def _parse_value(text: str):
    parts = [p.strip() for p in text.split(",")]
    vals = []
    for p in parts:
        try:
            vals.append(json.loads(p))
        except json.JSONDecodeError:
            vals.append(p)
    return vals if len(vals) > 1 else vals[0]


def parse_config_file(path) -> dict:
    """Line-oriented `key = value` pairs; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = _parse_value(value)
    return out


def _check_key(key: str):
    if key not in DEFAULTS:
        hint = difflib.get_close_matches(key, DEFAULTS, n=1)
        suffix = f"; did you mean {hint[0]!r}?" if hint else ""
        raise ConfigError(f"unknown config key {key!r}{suffix} "
                          f"(allowed: {', '.join(sorted(DEFAULTS))})")


def resolve_config(config_path=None, overrides=None, seed=None) -> dict:
    """Defaults, then file, then --set overrides, then --seed / env seed."""
    cfg = dict(DEFAULTS)
    explicit_seeds = set()
    if config_path:
        for key, value in parse_config_file(config_path).items():
            _check_key(key)
            cfg[key] = value
            if key.endswith(".seed"):
                explicit_seeds.add(key)
    for key, value in (overrides or {}).items():
        _check_key(key)
        cfg[key] = value
        if key.endswith(".seed"):
            explicit_seeds.add(key)
    if seed is None and os.environ.get("DEBIAS_FORGE_SEED"):
        try:
            seed = int(os.environ["DEBIAS_FORGE_SEED"])
        except ValueError as e:
            raise ConfigError(f"DEBIAS_FORGE_SEED must be an integer: {e}") from e
        # env var is a default only: explicit config keys win
        for key in ("data.seed", "shallow.seed", "train.seed"):
            if key not in explicit_seeds:
                cfg[key] = seed
        return cfg
    if seed is not None:
        for key in ("data.seed", "shallow.seed", "train.seed"):
            cfg[key] = seed
    return cfg


def config_digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def synth_config(cfg: dict) -> SynthConfig:
    return SynthConfig(
        num_labels=cfg["data.num_labels"],
        train_size=cfg["data.train_size"],
        test_size=cfg["data.test_size"],
        vocab_size=cfg["data.vocab_size"],
        tokens_per_segment=cfg["data.tokens_per_segment"],
        noise_token_rate=cfg["data.noise_token_rate"],
        manipulated_fraction=cfg["data.manipulated_fraction"],
        bias_proportion=cfg["data.bias_proportion"],
        seed=cfg["data.seed"],
    )


def shallow_config(cfg: dict) -> ShallowConfig:
    return ShallowConfig(
        sample_size=cfg["shallow.sample_size"],
        epochs=cfg["shallow.epochs"],
        learning_rate=cfg["shallow.learning_rate"],
        batch_size=cfg["shallow.batch_size"],
        hidden=cfg["shallow.hidden"],
        feature_dim=cfg["shallow.feature_dim"],
        optimizer=cfg["shallow.optimizer"],
        adam_beta2=cfg["shallow.adam_beta2"],
        seed=cfg["shallow.seed"],
    )


def train_config(cfg: dict) -> TrainConfig:
    sched = AnnealSchedule(minimum=cfg["anneal.a"], total_steps=1,
                           enabled=cfg["anneal.enabled"])
    return TrainConfig(
        method=cfg["train.method"],
        epochs=cfg["train.epochs"],
        batch_size=cfg["train.batch_size"],
        learning_rate=cfg["train.learning_rate"],
        optimizer=cfg["train.optimizer"],
        adam_beta2=cfg["train.adam_beta2"],
        hidden=cfg["train.hidden"],
        feature_dim=cfg["train.feature_dim"],
        anneal=sched,
        eval_every=cfg["train.eval_every"],
        seed=cfg["train.seed"],
        weights_path=cfg["train.weights_path"],
    )


def shallow_thresholds(cfg: dict, dataset) -> ShallowThresholds:
    base = ShallowThresholds(high_conf_min=cfg["shallow.high_conf_min"])
    band = cfg["shallow.acc_band"]
    if band == "oracle":
        return oracle_band_thresholds(dataset, width=cfg["shallow.band_width"], base=base)
    if not (isinstance(band, list) and len(band) == 2):
        raise ConfigError("shallow.acc_band must be 'oracle' or two comma-separated reals")
    return replace(base, acc_band=(float(band[0]), float(band[1])))


# ---------------------------------------------------------------------------
# manifests and report output

@dataclass
class RunManifest:
    digest: str
    command: str
    inputs: list
    outputs: list
    seed: int
    version: str
    started_at: float
    finished_at: float


def write_manifest(out_dir, command, digest, inputs, outputs, seed, started_at):
    man = RunManifest(
        digest=digest, command=command,
        inputs=[str(p) for p in inputs], outputs=[str(p) for p in outputs],
        seed=seed, version=__version__,
        started_at=started_at, finished_at=time.time(),
    )
    path = os.path.join(out_dir, f"{command}-{digest}.manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(man), fh, sort_keys=True, indent=2)
    return path


def write_csv(path, fieldnames, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# commands

def cmd_generate(args) -> int:
    cfg = resolve_config(args.config, args.overrides, args.seed)
    digest = config_digest(cfg)
    scfg = synth_config(cfg)
    scfg.validate()
    os.makedirs(args.out_dir, exist_ok=True)
    started = time.time()

    train = inject_bias(gen_dataset(scfg), m=scfg.bias_proportion,
                        rho=scfg.manipulated_fraction, seed=scfg.seed)
    suite = make_eval_suite(scfg)
    outputs = []
    path = os.path.join(args.out_dir, "train.jsonl")
    save_dataset(train, path)
    outputs.append(path)
    for split, ds in suite.items():
        path = os.path.join(args.out_dir, f"eval_{split}.jsonl")
        save_dataset(ds, path)
        outputs.append(path)
    outputs.append(write_manifest(args.out_dir, "generate", digest,
                                  [args.config or "<defaults>"], outputs,
                                  scfg.seed, started))
    logger.info("wrote %d files under %s (digest %s)", len(outputs), args.out_dir, digest)
    return 0


def cmd_shallow(args) -> int:
    cfg = resolve_config(args.config, args.overrides, args.seed)
    digest = config_digest(cfg)
    train = load_dataset(args.data)
    s_cfg = shallow_config(cfg)
    thresholds = shallow_thresholds(cfg, train)
    os.makedirs(args.out_dir, exist_ok=True)
    started = time.time()
    outputs = []

    if args.grid:
        best, rows = grid_search_shallow(
            train, _as_list(cfg["shallow.grid_sizes"]), _as_list(cfg["shallow.grid_epochs"]),
            base_cfg=s_cfg, thresholds=thresholds,
        )
        grid_path = os.path.join(args.out_dir, f"grid-{digest}.csv")
        write_csv(grid_path, ["n_s", "e_s", "unseen_acc", "high_conf_frac", "degenerate", "pass"], rows)
        outputs.append(grid_path)
        if best is None:
            diag_path = os.path.join(args.out_dir, f"diagnosis-{digest}.json")
            write_json(diag_path, {"passed": False, "grid_rows": len(rows)})
            outputs.append(diag_path)
            write_manifest(args.out_dir, "shallow", digest, [args.data], outputs,
                           s_cfg.seed, started)
            raise DegenerateShallowError("no grid cell passed the selection thresholds")
        s_cfg = best
        logger.info("grid selected sample_size=%d epochs=%d", best.sample_size, best.epochs)

    model, subset_ids = train_shallow(train, s_cfg)
    unseen = [ex for ex in train.examples if ex.id not in subset_ids][:5000]
    diag = validate_shallow(model, unseen, thresholds)

    ckpt_path = os.path.join(args.out_dir, f"shallow-{digest}.ckpt.json")
    save_checkpoint(model, ckpt_path, config_digest=digest)
    outputs.append(ckpt_path)
    diag_path = os.path.join(args.out_dir, f"diagnosis-{digest}.json")
    write_json(diag_path, {
        **diag.to_dict(),
        "sample_size": s_cfg.sample_size, "epochs": s_cfg.epochs,
        "acc_band": list(thresholds.acc_band),
    })
    outputs.append(diag_path)
    outputs.append(write_manifest(args.out_dir, "shallow", digest, [args.data],
                                  outputs, s_cfg.seed, started))
    if diag.degenerate:
        raise DegenerateShallowError(
            f"shallow model is degenerate: unseen accuracy {diag.unseen_accuracy:.3f} "
            f"is within {thresholds.degenerate_margin:.0%} of chance"
        )
    logger.info("shallow diagnosis: acc=%.3f high_conf=%.3f passed=%s",
                diag.unseen_accuracy, diag.high_conf_fraction, diag.passed)
    return 0


def cmd_identify(args) -> int:
    cfg = resolve_config(args.config, args.overrides, args.seed)
    digest = config_digest(cfg)
    model = load_checkpoint(args.checkpoint)
    train = load_dataset(args.data)
    if model.num_labels != train.num_labels:
        raise SchemaError(
            f"label-count mismatch: checkpoint has K={model.num_labels}, "
            f"dataset has K={train.num_labels}"
        )
    if model.featurizer.vocab_size != train.vocab_size:
        raise SchemaError(
            f"vocabulary mismatch: checkpoint expects {model.featurizer.vocab_size}, "
            f"dataset has {train.vocab_size}"
        )
    subset_ids = set(model.meta.get("subset_ids", []))
    if not subset_ids:
        raise DataError(f"{args.checkpoint}: no subset_ids recorded; "
                        "was this checkpoint produced by the shallow command?")
    os.makedirs(args.out_dir, exist_ok=True)
    started = time.time()
    weights = compute_bias_weights(model, train, subset_ids)
    path = os.path.join(args.out_dir, f"weights-{digest}.jsonl")
    save_bias_weights(weights, path)
    write_manifest(args.out_dir, "identify", digest,
                   [args.checkpoint, args.data], [path],
                   cfg["shallow.seed"], started)
    logger.info("wrote %d bias-weight entries to %s", len(weights), path)
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args.config, args.overrides, args.seed)
    digest = config_digest(cfg)
    t_cfg = train_config(cfg)
    t_cfg.validate()
    train = load_dataset(args.data)
    os.makedirs(args.out_dir, exist_ok=True)
    started = time.time()
    inputs = [args.data]

    weights_path = args.weights or t_cfg.weights_path
    weights = None
    if t_cfg.method == "baseline_ce":
        if weights_path:
            logger.info("method baseline_ce ignores the weights file %s", weights_path)
    else:
        if not weights_path:
            raise ConfigError(f"method {t_cfg.method!r} requires --weights (or train.weights_path)")
        weights = load_bias_weights(weights_path, train.num_labels)
        inputs.append(weights_path)
        kept = [ex for ex in train.examples if ex.id in weights.entries]
        dropped = len(train.examples) - len(kept)
        if dropped:
            logger.info("dropping %d examples without bias weights (shallow subset)", dropped)
            train = type(train)(examples=kept, num_labels=train.num_labels,
                                vocab_size=train.vocab_size, provenance=train.provenance)

    eval_suite = None
    if args.eval_dir:
        eval_suite = {}
        for split in ("original", "biased", "anti_biased"):
            path = os.path.join(args.eval_dir, f"eval_{split}.jsonl")
            if os.path.exists(path):
                eval_suite[split] = load_dataset(path)
                inputs.append(path)
        if not eval_suite:
            raise DataError(f"{args.eval_dir}: no eval_<split>.jsonl files found")

    teacher = None
    outputs = []
    if t_cfg.method == "conf_reg":
        teacher_digest = config_digest({**cfg, "train.method": "baseline_ce"})
        teacher_path = os.path.join(args.out_dir, f"teacher-{teacher_digest}.ckpt.json")
        if os.path.exists(teacher_path):
            teacher = load_checkpoint(teacher_path)
            logger.info("reusing cached teacher %s", teacher_path)
        elif args.no_auto_teacher:
            raise ConfigError("method conf_reg needs a teacher; rerun without "
                              "--no-auto-teacher or provide the cached checkpoint")
        else:
            teacher = train_teacher(train, t_cfg)
            save_checkpoint(teacher, teacher_path, config_digest=teacher_digest)
            outputs.append(teacher_path)
            logger.info("trained and cached teacher at %s", teacher_path)

    model, metrics = train_main(train, weights, t_cfg, eval_suite=eval_suite, teacher=teacher)

    ckpt_path = os.path.join(args.out_dir, f"model-{digest}.ckpt.json")
    save_checkpoint(model, ckpt_path, step=metrics[-1]["step"], config_digest=digest)
    outputs.append(ckpt_path)
    metrics_path = os.path.join(args.out_dir, f"run-{digest}.metrics.jsonl")
    write_metrics(metrics, metrics_path)
    outputs.append(metrics_path)
    outputs.append(write_manifest(args.out_dir, "train", digest, inputs, outputs,
                                  t_cfg.seed, started))
    logger.info("trained %s for %d steps; checkpoint %s",
                t_cfg.method, metrics[-1]["step"], ckpt_path)
    return 0


# -- report helpers ----------------------------------------------------------

def _sweep_point(job):
    a_value, method, s_cfg, t_cfg, sh_cfg, seeds = job
    return anneal_sweep([a_value], method, s_cfg, t_cfg, sh_cfg, seeds).points[0]


def _proportion_point(job):
    m_value, s_cfg, t_cfg, seeds = job
    return bias_proportion_study([m_value], s_cfg, t_cfg, seeds)[0]


def _fan_out(worker, job_list, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, job_list))
    return [worker(job) for job in job_list]


def cmd_report(args) -> int:
    cfg = resolve_config(args.config, args.overrides, args.seed)
    digest = config_digest(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    started = time.time()
    inputs, outputs = [], []

    def emit(kind, fieldnames, rows, summary):
        csv_path = os.path.join(args.out_dir, f"{kind}-{digest}.csv")
        write_csv(csv_path, fieldnames, rows)
        json_path = os.path.join(args.out_dir, f"{kind}-{digest}.json")
        write_json(json_path, {"digest": digest, "kind": kind, **summary})
        outputs.extend([csv_path, json_path])

    if args.kind == "trajectory":
        if not args.metrics:
            raise ConfigError("report kind 'trajectory' requires --metrics")
        inputs.append(args.metrics)
        rows = [r for r in read_metrics(args.metrics) if "acc_original" in r]
        if not rows:
            raise DataError(f"{args.metrics}: no evaluation records; "
                            "was training run with an eval suite?")
        fields = ["step", "acc_original", "acc_biased", "acc_anti_biased", "alpha"]
        emit("trajectory", fields, rows, {"points": len(rows), "final": rows[-1]})

    elif args.kind == "histogram":
        if not (args.checkpoint and args.data):
            raise ConfigError("report kind 'histogram' requires --checkpoint and --data")
        inputs.extend([args.checkpoint, args.data])
        model = load_checkpoint(args.checkpoint)
        split = load_dataset(args.data)
        hist = confidence_histogram(model, split, bin_width=cfg["report.bin_width"])
        rows = [{"bin_lo": hist.edges[i], "bin_hi": hist.edges[i + 1],
                 "count": hist.counts[i], "correct": hist.correct[i],
                 "correct_fraction": hist.correct_fraction[i]}
                for i in range(len(hist.counts))]
        probs = model.predict_proba(split.examples)
        mean_conf = float(probs.max(axis=1).mean())
        emit("histogram", ["bin_lo", "bin_hi", "count", "correct", "correct_fraction"],
             rows, {"mean_confidence": mean_conf, "examples": len(split)})

    elif args.kind == "sweep":
        method = cfg["report.method"]
        seeds = _as_list(cfg["report.seeds"])
        jobs = [(a, method, synth_config(cfg), train_config(cfg), shallow_config(cfg), seeds)
                for a in _as_list(cfg["report.a_values"])]
        points = _fan_out(_sweep_point, jobs, args.jobs)
        fields = ["value", "original_mean", "original_std",
                  "anti_biased_mean", "anti_biased_std", "seeds"]
        emit("sweep", fields, points, {"method": method, "points": len(points)})

    elif args.kind == "proportion":
        seeds = _as_list(cfg["report.seeds"])
        jobs = [(m, synth_config(cfg), train_config(cfg), seeds)
                for m in _as_list(cfg["report.m_values"])]
        rows = _fan_out(_proportion_point, jobs, args.jobs)
        fields = ["m", "seeds", "original_mean", "original_std", "biased_mean",
                  "biased_std", "anti_biased_mean", "anti_biased_std"]
        emit("proportion", fields, rows, {"points": len(rows)})

    elif args.kind == "stability":
        if not args.data:
            raise ConfigError("report kind 'stability' requires --data")
        inputs.append(args.data)
        train = load_dataset(args.data)
        eval_ds = load_dataset(args.eval) if args.eval else train
        if args.eval:
            inputs.append(args.eval)
        rows = stability_study(train, shallow_config(cfg), cfg["report.n_runs"], eval_ds)
        fields = ["run", "seed", "degenerate", "unseen_acc", "easy_acc", "easy_n",
                  "hard_acc", "hard_n", "overall_acc"]
        ok = all(r["easy_acc"] > r["hard_acc"] for r in rows
                 if not r["degenerate"] and r["easy_n"] and r["hard_n"])
        emit("stability", fields, rows,
             {"runs": len(rows), "degenerate_runs": sum(r["degenerate"] for r in rows),
              "easy_above_hard": ok})

    elif args.kind == "compare":
        if not args.checkpoint_list or not args.suite_dir:
            raise ConfigError("report kind 'compare' requires --checkpoints and --suite-dir")
        suite = {}
        for split in ("original", "biased", "anti_biased"):
            path = os.path.join(args.suite_dir, f"eval_{split}.jsonl")
            suite[split] = load_dataset(path)
            inputs.append(path)
        rows = []
        for path in args.checkpoint_list:
            model = load_checkpoint(path)
            inputs.append(path)
            row = {"method": model.meta.get("method", os.path.basename(path))}
            for split, ds in suite.items():
                row[split] = accuracy(model, ds)
            rows.append(row)
        emit("compare", ["method", "original", "biased", "anti_biased"], rows,
             {"methods": [r["method"] for r in rows]})

    else:
        raise ConfigError(f"unknown report kind {args.kind!r}; expected one of {REPORT_KINDS}")

    outputs.append(write_manifest(args.out_dir, f"report-{args.kind}", digest,
                                  inputs or [args.config or "<defaults>"], outputs,
                                  cfg["data.seed"], started))
    logger.info("report %s written under %s", args.kind, args.out_dir)
    return 0


def _as_list(value):
    return value if isinstance(value, list) else [value]


# ---------------------------------------------------------------------------
# argument parsing and dispatch

def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, value = (s.strip() for s in text.split("=", 1))
    return key, _parse_value(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debias-forge",
        description="Synthetic-bias lab: dataset generation, shallow bias "
                    "identification, debiased training, and analysis reports.",
    )
    parser.add_argument("--version", action="version", version=__version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key = value config file")
    common.add_argument("--seed", type=int, default=None,
                        help="override every *.seed key (default: DEBIAS_FORGE_SEED)")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker processes for fan-out commands")
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress logging")
    common.add_argument("--set", dest="overrides_raw", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key")

    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common],
                   help="write the biased training set and eval suite")

    p = sub.add_parser("shallow", parents=[common],
                       help="train (or grid-search) the shallow bias model")
    p.add_argument("--data", required=True, help="training-set JSONL")
    p.add_argument("--grid", action="store_true", help="run the selection grid search")

    p = sub.add_parser("identify", parents=[common],
                       help="score unseen training examples with a shallow checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("train", parents=[common],
                       help="train the main model (baseline or debiased)")
    p.add_argument("--data", required=True)
    p.add_argument("--weights", default=None, help="bias-weights JSONL")
    p.add_argument("--eval-dir", default=None,
                   help="directory with eval_<split>.jsonl for trajectory telemetry")
    p.add_argument("--no-auto-teacher", action="store_true",
                   help="fail instead of training a missing conf_reg teacher")

    p = sub.add_parser("report", parents=[common], help="emit CSV/JSON analysis reports")
    p.add_argument("--kind", required=True, choices=REPORT_KINDS)
    p.add_argument("--metrics", default=None, help="metrics JSONL (trajectory)")
    p.add_argument("--checkpoint", default=None, help="model checkpoint (histogram)")
    p.add_argument("--checkpoints", dest="checkpoint_list", nargs="+", default=None,
                   help="model checkpoints (compare)")
    p.add_argument("--suite-dir", default=None, help="eval-suite directory (compare)")
    p.add_argument("--data", default=None, help="dataset JSONL (histogram, stability)")
    p.add_argument("--eval", default=None, help="evaluation dataset (stability)")
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "shallow": cmd_shallow,
    "identify": cmd_identify,
    "train": cmd_train,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.overrides = dict(_parse_override(s) for s in args.overrides_raw)
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("%s", e)
        return 2
    except (DataError, SchemaError) as e:
        logger.error("%s", e)
        return 3
    except NumericError as e:
        logger.error("%s", e)
        return 4
    except DegenerateShallowError as e:
        logger.error("%s", e)
        return 5
    except OSError as e:
        logger.error("%s", e)
        return 3


if __name__ == "__main__":
    sys.exit(main())
