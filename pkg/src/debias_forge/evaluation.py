"""Evaluation and analysis: split accuracy, confidence histograms, easy/hard
partitioning, the bias-proportion study, and the annealing sweep.
"""

from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .errors import ConfigError, DataError
from .objectives import AnnealSchedule
from .shallow import ShallowConfig, compute_bias_weights, train_shallow
from .synthgen import SynthConfig, bias_oracle_predict, gen_dataset, inject_bias, make_eval_suite
from .trainer import TrainConfig, train_main, train_teacher


def accuracy(model, split) -> float:
    """Fraction of argmax predictions matching gold (ties -> lowest label)."""
    examples = split.examples if hasattr(split, "examples") else list(split)
    if not examples:
        raise DataError("empty split")
    pred = model.predict(examples)
    gold = np.array([ex.label for ex in examples])
    return float(np.mean(pred == gold))


@dataclass
class ConfidenceHistogram:
    edges: list            # len B+1, spans [1/K, 1]
    counts: list           # len B
    correct: list          # len B
    correct_fraction: list

    def to_dict(self):
        return asdict(self)


def confidence_histogram(model, split, bin_width: float = 0.05) -> ConfidenceHistogram:
    """Histogram of max predicted probability over [1/K, 1], with per-bin
    correct-prediction counts."""
    if bin_width <= 0 or bin_width > 1:
        raise ConfigError("bin_width must be in (0, 1]")
    examples = split.examples if hasattr(split, "examples") else list(split)
    if not examples:
        raise DataError("empty split")
    probs = model.predict_proba(examples)
    pred = np.argmax(probs, axis=1)
    maxp = probs[np.arange(len(examples)), pred]
    gold = np.array([ex.label for ex in examples])

    lo = 1.0 / model.num_labels
    edges = [lo]
    while edges[-1] + bin_width < 1.0 - 1e-12:
        edges.append(edges[-1] + bin_width)
    edges.append(1.0)
    edges = np.asarray(edges)

    # right-closed last bin so confidence exactly 1.0 lands in it
    idx = np.clip(np.searchsorted(edges, maxp, side="right") - 1, 0, len(edges) - 2)
    counts = np.zeros(len(edges) - 1, dtype=int)
    correct = np.zeros(len(edges) - 1, dtype=int)
    for b, ok in zip(idx, pred == gold):
        counts[b] += 1
        correct[b] += int(ok)
    frac = [float(c) / n if n else 0.0 for c, n in zip(correct, counts)]
    return ConfidenceHistogram(edges.tolist(), counts.tolist(), correct.tolist(), frac)


def easy_hard_partition(split, oracle=bias_oracle_predict):
    """Disjoint exhaustive split: oracle-correct ids are easy, everything else
    (including abstentions) is hard."""
    easy, hard = [], []
    for ex in split.examples:
        (easy if oracle(ex) == ex.label else hard).append(ex.id)
    return easy, hard


@dataclass
class SweepReport:
    parameter: str
    points: list = field(default_factory=list)  # rows with value/means/spread/seeds

    def to_rows(self):
        return self.points


def _run_baseline(synth_cfg: SynthConfig, train_cfg: TrainConfig, m: float, seed: int):
    cfg = replace(synth_cfg, bias_proportion=m, seed=seed)
    train = inject_bias(gen_dataset(cfg), m=m, rho=cfg.manipulated_fraction, seed=seed)
    suite = make_eval_suite(cfg)
    run_cfg = replace(train_cfg, method="baseline_ce", seed=seed)
    model, _ = train_main(train, None, run_cfg)
    return {split: accuracy(model, ds) for split, ds in suite.items()}


def bias_proportion_study(m_values, synth_cfg: SynthConfig, train_cfg: TrainConfig, seeds):
    """Baseline training per (m, seed); mean final accuracy on all splits."""
    if any(not 0.0 <= m <= 1.0 for m in m_values):
        raise ConfigError("m values must lie in [0, 1]")
    rows = []
    for m in m_values:
        accs = [_run_baseline(synth_cfg, train_cfg, m, s) for s in seeds]
        row = {"m": m, "seeds": len(seeds)}
        for split in ("original", "biased", "anti_biased"):
            vals = np.array([a[split] for a in accs])
            row[f"{split}_mean"] = float(vals.mean())
            row[f"{split}_std"] = float(vals.std())
        rows.append(row)
    return rows


def debias_pipeline(train, suite, method: str, train_cfg: TrainConfig,
                    shallow_cfg: ShallowConfig, seed: int, exclude_subset: bool = True):
    """Shallow -> identify -> debiased main training; returns (model, metrics).

    By default the main model trains on train minus the shallow subset (the
    shallow model never scores examples it saw). The teacher for conf_reg is
    trained on the same reduced set with standard cross-entropy. With
    exclude_subset=False the subset stays in and its examples are scored too.
    """
    s_cfg = replace(shallow_cfg, seed=seed)
    shallow_model, subset_ids = train_shallow(train, s_cfg)
    weights = compute_bias_weights(shallow_model, train,
                                   subset_ids if exclude_subset else set())
    main_train = train if not exclude_subset else type(train)(
        examples=[ex for ex in train.examples if ex.id not in subset_ids],
        num_labels=train.num_labels,
        vocab_size=train.vocab_size,
        provenance=train.provenance,
    )
    run_cfg = replace(train_cfg, method=method, seed=seed)
    teacher = train_teacher(main_train, run_cfg) if method == "conf_reg" else None
    return train_main(main_train, weights, run_cfg, eval_suite=suite, teacher=teacher)


def anneal_sweep(a_values, method: str, synth_cfg: SynthConfig, train_cfg: TrainConfig,
                 shallow_cfg: ShallowConfig, seeds) -> SweepReport:
    """One debiased run per (minimum alpha, seed); accuracy on original and
    anti-biased splits per point."""
    if method == "baseline_ce":
        raise ConfigError("anneal sweep requires a debiasing method")
    report = SweepReport(parameter="anneal_minimum")
    for a in a_values:
        orig, anti = [], []
        for seed in seeds:
            cfg = replace(synth_cfg, seed=seed)
            train = inject_bias(gen_dataset(cfg), m=cfg.bias_proportion,
                                rho=cfg.manipulated_fraction, seed=seed)
            suite = make_eval_suite(cfg)
            run_cfg = replace(train_cfg, anneal=AnnealSchedule(minimum=a, total_steps=1, enabled=True))
            model, _ = debias_pipeline(train, None, method, run_cfg, shallow_cfg, seed)
            orig.append(accuracy(model, suite["original"]))
            anti.append(accuracy(model, suite["anti_biased"]))
        report.points.append({
            "value": a,
            "original_mean": float(np.mean(orig)),
            "original_std": float(np.std(orig)),
            "anti_biased_mean": float(np.mean(anti)),
            "anti_biased_std": float(np.std(anti)),
            "seeds": len(seeds),
        })
    return report
