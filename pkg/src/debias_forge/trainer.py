"""Training orchestration: baseline/debiased step loop, per-step annealing,
teacher training for confidence regularization, and batch-loss telemetry.
"""

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import objectives
from .classifier import (
    Featurizer, Model, OptState, forward, init_params, loss_and_grad, opt_step,
)
from .errors import ConfigError, DataError, NumericError
from .objectives import AnnealSchedule, anneal_alpha
from .rng import substream
from .shallow import BiasWeights

PERCENTILE_LEVELS = (0, 25, 50, 75, 100)


@dataclass(frozen=True)
class TrainConfig:
    method: str = "baseline_ce"
    epochs: int = 3
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    adam_beta2: float = 0.999
    hidden: int = 64
    feature_dim: int = 2064
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    eval_every: int = 250
    seed: int = 0
    weights_path: str = ""

    def validate(self):
        if self.method not in objectives.METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.hidden < 1:
            raise ConfigError("hidden must be >= 1")


def loss_percentiles(batch_losses):
    """Nearest-rank percentiles (0, 25, 50, 75, 100) of the batch losses."""
    losses = np.asarray(batch_losses, dtype=np.float64)
    if losses.size == 0:
        raise DataError("empty batch: no losses to summarize")
    s = np.sort(losses)
    n = s.size
    out = []
    for p in PERCENTILE_LEVELS:
        rank = max(1, math.ceil(p / 100.0 * n))
        out.append(float(s[rank - 1]))
    return tuple(out)


def _eval_accuracies(params, featurizer, eval_matrices):
    accs = {}
    for split, (X, y) in eval_matrices.items():
        p = forward(params, X)
        accs[split] = float(np.mean(np.argmax(p, axis=1) == y))
    return accs


def train_main(train, weights, cfg: TrainConfig, eval_suite=None, teacher=None):
    """Run one training; returns (Model, metrics list of dicts).

    train: Dataset (the main-training set). weights: BiasWeights or None
    (required for every method except baseline_ce). eval_suite: optional dict
    of split -> Dataset evaluated every cfg.eval_every steps. teacher: frozen
    Model, required when method == "conf_reg".
    """
    cfg.validate()
    K = train.num_labels
    featurizer = Featurizer(vocab_size=train.vocab_size, dim=cfg.feature_dim)
    X = featurizer.matrix(train.examples)
    y = train.labels()
    n = len(train.examples)

    p_b = None
    if cfg.method != "baseline_ce":
        if weights is None:
            raise ConfigError(f"method {cfg.method!r} requires bias weights")
        p_b = np.empty((n, K))
        for i, ex in enumerate(train.examples):
            entry = weights.entries.get(ex.id)
            if entry is None:
                raise DataError(f"no bias weights for training example id {ex.id}")
            p_b[i] = entry["p_b"]

    p_t = None
    if cfg.method == "conf_reg":
        if teacher is None:
            raise ConfigError("method 'conf_reg' requires a trained teacher")
        p_t = forward(teacher.params, X)  # frozen, precomputed once

    eval_matrices = {}
    if eval_suite:
        for split, ds in eval_suite.items():
            eval_matrices[split] = (featurizer.matrix(ds.examples), ds.labels())

    init_rng = substream(cfg.seed, "init")
    params = init_params(cfg.feature_dim, cfg.hidden, K, init_rng)
    state = OptState(learning_rate=cfg.learning_rate, mode=cfg.optimizer,
                     beta2=cfg.adam_beta2)
    shuffle_rng = substream(cfg.seed, "shuffle")

    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    sched = cfg.anneal
    if sched.enabled and sched.total_steps != total_steps:
        sched = AnnealSchedule(minimum=sched.minimum, total_steps=total_steps, enabled=True)

    metrics = []
    step = 0
    for _epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            alpha = anneal_alpha(step, sched)
            targets, w, offset = objectives.build_targets(
                cfg.method, y[idx], K,
                p_b=None if p_b is None else p_b[idx],
                p_t=None if p_t is None else p_t[idx],
                alpha=alpha,
            )
            losses, grads = loss_and_grad(params, X[idx], targets, w, offset)
            if not np.all(np.isfinite(losses)):
                raise NumericError(f"non-finite loss at step {step}")
            params, state = opt_step(params, grads, state)
            step += 1

            p0, p25, p50, p75, p100 = loss_percentiles(losses)
            rec = {
                "step": step,
                "mean_loss": float(losses.mean()),
                "p0": p0, "p25": p25, "p50": p50, "p75": p75, "p100": p100,
                "alpha": alpha,
                "clamped": grads.clamped,
            }
            if eval_matrices and (step % cfg.eval_every == 0 or step == total_steps):
                rec.update(
                    {f"acc_{s}": a for s, a in _eval_accuracies(params, featurizer, eval_matrices).items()}
                )
            metrics.append(rec)

    model = Model(params=params, featurizer=featurizer, num_labels=K,
                  meta={"method": cfg.method, "seed": cfg.seed})
    return model, metrics


def train_teacher(train, cfg: TrainConfig):
    """Standard cross-entropy training on the main-training set; frozen after."""
    if cfg.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    base = TrainConfig(**{**asdict_flat(cfg), "method": "baseline_ce",
                          "anneal": AnnealSchedule()})
    model, _ = train_main(train, None, base)
    return model


def asdict_flat(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["anneal"] = cfg.anneal
    return d


def write_metrics(metrics, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in metrics:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_metrics(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: bad metrics line: {e}") from e
    return out
