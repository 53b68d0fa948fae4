"""Shallow bias-identification model: train on a small random subset for a
few epochs, score the remaining (unseen) training examples, and support the
selection grid search and the multi-seed stability study.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import Featurizer, Model, OptState, forward, init_params, loss_and_grad, opt_step
from .errors import ConfigError, DataError
from .rng import substream
from .synthgen import bias_oracle_predict


@dataclass(frozen=True)
class ShallowConfig:
    sample_size: int = 2000
    epochs: int = 50
    learning_rate: float = 2e-2
    batch_size: int = 32
    hidden: int = 64
    feature_dim: int = 2064
    optimizer: str = "adam"
    # fast second-moment decay keeps rare-feature updates large, which is
    # what drives the deliberately overconfident, bias-reliant fit
    adam_beta2: float = 0.9
    seed: int = 0

    def validate(self, train_size=None):
        if self.sample_size < 1:
            raise ConfigError("sample_size must be >= 1")
        if train_size is not None and self.sample_size >= train_size:
            raise ConfigError(
                f"sample_size {self.sample_size} must be smaller than the "
                f"training set ({train_size})"
            )
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass(frozen=True)
class ShallowThresholds:
    acc_band: tuple = (0.60, 0.70)
    high_conf_min: float = 0.90
    conf_threshold: float = 0.90
    degenerate_margin: float = 0.02


def oracle_achievable_accuracy(dataset) -> float:
    """Expected accuracy of the bias oracle, counting abstentions as chance."""
    examples = dataset.examples if hasattr(dataset, "examples") else list(dataset)
    if not examples:
        raise DataError("empty dataset")
    chance = 1.0 / dataset.num_labels
    total = 0.0
    for ex in examples:
        pred = bias_oracle_predict(ex)
        total += chance if pred is None else float(pred == ex.label)
    return total / len(examples)


def oracle_band_thresholds(dataset, width: float = 0.10,
                           base: ShallowThresholds = ShallowThresholds()) -> ShallowThresholds:
    """Thresholds whose accuracy band straddles bias-only performance."""
    center = oracle_achievable_accuracy(dataset)
    return ShallowThresholds(
        acc_band=(center - width, center + width),
        high_conf_min=base.high_conf_min,
        conf_threshold=base.conf_threshold,
        degenerate_margin=base.degenerate_margin,
    )


@dataclass
class ShallowDiagnosis:
    unseen_accuracy: float
    high_conf_fraction: float
    degenerate: bool
    passed: bool
    mean_confidence: float
    histogram: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "unseen_accuracy": self.unseen_accuracy,
            "high_conf_fraction": self.high_conf_fraction,
            "degenerate": self.degenerate,
            "passed": self.passed,
            "mean_confidence": self.mean_confidence,
            "histogram": self.histogram,
        }


@dataclass
class BiasWeights:
    """Per-example shallow-model output, keyed by example id."""
    entries: dict
    num_labels: int

    def __len__(self):
        return len(self.entries)


def train_shallow(train, cfg: ShallowConfig):
    """Train on a seeded uniform subsample; returns (Model, subset id set)."""
    cfg.validate(train_size=len(train))
    K = train.num_labels
    sub_rng = substream(cfg.seed, "subsample")
    pick = sub_rng.permutation(len(train))[:cfg.sample_size]
    subset = [train.examples[int(i)] for i in sorted(pick)]
    subset_ids = set(ex.id for ex in subset)

    featurizer = Featurizer(vocab_size=train.vocab_size, dim=cfg.feature_dim)
    X = featurizer.matrix(subset)
    y = np.array([ex.label for ex in subset], dtype=np.int64)
    onehot = np.zeros((len(subset), K))
    onehot[np.arange(len(subset)), y] = 1.0

    params = init_params(cfg.feature_dim, cfg.hidden, K, substream(cfg.seed, "init"))
    state = OptState(learning_rate=cfg.learning_rate, mode=cfg.optimizer,
                     beta2=cfg.adam_beta2)
    shuffle_rng = substream(cfg.seed, "shuffle")
    n = len(subset)
    for _epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = loss_and_grad(params, X[idx], onehot[idx], np.ones(idx.size))
            params, state = opt_step(params, grads, state)

    model = Model(params=params, featurizer=featurizer, num_labels=K,
                  meta={"role": "shallow", "seed": cfg.seed,
                        "subset_ids": sorted(subset_ids)})
    return model, subset_ids


def compute_bias_weights(shallow: Model, train, subset_ids) -> BiasWeights:
    """Score every training example outside the shallow subset."""
    unseen = [ex for ex in train.examples if ex.id not in subset_ids]
    if not unseen:
        raise DataError("no unseen examples left after removing the shallow subset")
    probs = shallow.predict_proba(unseen)
    entries = {}
    for ex, p in zip(unseen, probs):
        if ex.label is None or not 0 <= ex.label < train.num_labels:
            raise DataError(f"example {ex.id}: missing or invalid gold label")
        entries[ex.id] = {
            "p_b": p.tolist(),
            "p_b_correct": float(p[ex.label]),
            "predicted": int(np.argmax(p)),
        }
    return BiasWeights(entries=entries, num_labels=train.num_labels)


def validate_shallow(shallow: Model, unseen, thresholds: ShallowThresholds = ShallowThresholds()):
    """Accuracy / confidence diagnosis on held-out unseen examples.

    unseen: Dataset or list of Examples, disjoint from the shallow subset.
    """
    examples = unseen.examples if hasattr(unseen, "examples") else list(unseen)
    if not examples:
        raise DataError("empty unseen set")
    probs = shallow.predict_proba(examples)
    y = np.array([ex.label for ex in examples], dtype=np.int64)
    pred = np.argmax(probs, axis=1)
    maxp = probs[np.arange(len(examples)), pred]
    acc = float(np.mean(pred == y))
    high_conf = float(np.mean(maxp > thresholds.conf_threshold))
    chance = 1.0 / shallow.num_labels
    degenerate = abs(acc - chance) <= thresholds.degenerate_margin

    edges = np.arange(chance, 1.0 + 1e-9, 0.05)
    if edges[-1] < 1.0:
        edges = np.append(edges, 1.0)
    counts, _ = np.histogram(maxp, bins=edges)
    hist = {"edges": edges.tolist(), "counts": counts.tolist()}

    lo, hi = thresholds.acc_band
    passed = (not degenerate) and lo <= acc <= hi and high_conf >= thresholds.high_conf_min
    return ShallowDiagnosis(
        unseen_accuracy=acc,
        high_conf_fraction=high_conf,
        degenerate=degenerate,
        passed=passed,
        mean_confidence=float(maxp.mean()),
        histogram=hist,
    )


def grid_search_shallow(train, sizes, epoch_counts, base_cfg: ShallowConfig = ShallowConfig(),
                        thresholds: ShallowThresholds = ShallowThresholds(),
                        max_unseen: int = 5000):
    """One shallow model per (sample_size, epochs) cell, scored on unseen data.

    Returns (best ShallowConfig or None, report rows). The first passing cell
    under (smallest sample_size, then smallest epochs) wins; a grid with no
    passing cell returns best=None rather than raising.
    """
    if not sizes or not epoch_counts:
        raise ConfigError("grid sizes and epoch_counts must be non-empty")
    rows = []
    best = None
    for n_s in sorted(sizes):
        for e_s in sorted(epoch_counts):
            cfg = ShallowConfig(**{**_cfg_dict(base_cfg), "sample_size": n_s, "epochs": e_s})
            model, subset_ids = train_shallow(train, cfg)
            unseen = [ex for ex in train.examples if ex.id not in subset_ids][:max_unseen]
            diag = validate_shallow(model, unseen, thresholds)
            rows.append({
                "n_s": n_s, "e_s": e_s,
                "unseen_acc": diag.unseen_accuracy,
                "high_conf_frac": diag.high_conf_fraction,
                "degenerate": diag.degenerate,
                "pass": diag.passed,
            })
            if diag.passed and best is None:
                best = cfg
    return best, rows


def stability_study(train, cfg: ShallowConfig, n_runs: int, eval_ds):
    """Fresh-seed shallow runs scored on the bias-oracle easy/hard partition
    of eval_ds. Returns one row per run."""
    if n_runs < 2:
        raise ConfigError("stability study needs n_runs >= 2")
    easy = [ex for ex in eval_ds.examples if bias_oracle_predict(ex) == ex.label]
    hard = [ex for ex in eval_ds.examples if bias_oracle_predict(ex) != ex.label]
    rows = []
    for run in range(n_runs):
        run_cfg = ShallowConfig(**{**_cfg_dict(cfg), "seed": cfg.seed + 1000 * run})
        model, subset_ids = train_shallow(train, run_cfg)
        unseen = [ex for ex in train.examples if ex.id not in subset_ids]
        diag = validate_shallow(model, unseen)
        row = {"run": run, "seed": run_cfg.seed, "degenerate": diag.degenerate,
               "unseen_acc": diag.unseen_accuracy}
        for name, part in (("easy", easy), ("hard", hard)):
            if part:
                pred = model.predict(part)
                gold = np.array([ex.label for ex in part])
                row[f"{name}_acc"] = float(np.mean(pred == gold))
                row[f"{name}_n"] = len(part)
            else:
                row[f"{name}_acc"] = math.nan
                row[f"{name}_n"] = 0
        pred = model.predict(eval_ds.examples)
        row["overall_acc"] = float(np.mean(pred == eval_ds.labels()))
        rows.append(row)
    return rows


def save_bias_weights(weights: BiasWeights, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id in sorted(weights.entries):
            e = weights.entries[ex_id]
            fh.write(json.dumps({"id": ex_id, "p_b": e["p_b"],
                                 "p_b_correct": e["p_b_correct"],
                                 "predicted": e["predicted"]}, sort_keys=True) + "\n")


def load_bias_weights(path, num_labels: int) -> BiasWeights:
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: bad weights line: {e}") from e
            if len(rec.get("p_b", [])) != num_labels:
                raise DataError(f"{path}:{lineno}: p_b length != num_labels {num_labels}")
            if rec["id"] in entries:
                raise DataError(f"{path}:{lineno}: duplicate id {rec['id']}")
            entries[rec["id"]] = {"p_b": rec["p_b"],
                                  "p_b_correct": rec["p_b_correct"],
                                  "predicted": rec["predicted"]}
    return BiasWeights(entries=entries, num_labels=num_labels)


def _cfg_dict(cfg: ShallowConfig) -> dict:
    return {
        "sample_size": cfg.sample_size, "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate, "batch_size": cfg.batch_size,
        "hidden": cfg.hidden, "feature_dim": cfg.feature_dim,
        "optimizer": cfg.optimizer, "adam_beta2": cfg.adam_beta2,
        "seed": cfg.seed,
    }
