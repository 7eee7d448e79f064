"""Multi-seed experiment drivers: ablations, sampling-ratio sweeps, noise robustness."""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .core import bucket_relations
from .datagen import Regime
from .evaluation import EvalReport, evaluate, train_fact_set
from .losses import LossConfig
from .training import TrainConfig, train

__all__ = [
    "ablation_variants",
    "run_ablation",
    "sweep_sampling_ratio",
    "run_noise_comparison",
]

SWEEP_SPLITS = ("orig_dev", "gold_dev", "gold_test")


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _mean_summary(reports: Sequence[EvalReport]) -> dict[str, float]:
    keys = ("precision", "recall", "f1", "ign_f1", "head_f1", "mid_f1", "tail_f1")
    summaries = [r.summary() for r in reports]
    return {k: _mean([s[k] for s in summaries]) for k in keys}


def ablation_variants(toggles: set[str]) -> list[tuple[str, LossConfig]]:
    """Fixed-order removal table: full model, single removals, combined."""
    unknown = toggles - {"em", "scl"}
    if unknown:
        raise ValueError(f"unknown ablation toggles: {sorted(unknown)}")

    def variant(name: str, **changes) -> tuple[str, dict]:
        return name, changes

    rows = [variant("full")]
    if "em" in toggles:
        rows.append(variant("-em", use_entropy=False))
    if "scl" in toggles:
        rows.append(variant("-scl", use_contrastive=False))
    if {"em", "scl"} <= toggles:
        rows.append(variant("-both", use_entropy=False, use_contrastive=False))
    return rows


def run_ablation(
    regime: Regime,
    train_config: TrainConfig,
    toggles: set[str],
    seeds: Sequence[int],
    bucket_cuts: tuple[int, int] = (10, 20),
) -> list[dict]:
    """Train the full model and each removal variant with shared seeds.

    Each variant is evaluated on the dev split (gold labels when present,
    per the regime) with head/mid/tail bucket F1. Returns one row per
    variant in fixed order with per-seed reports and metric means.
    """
    buckets = bucket_relations(regime.train.vocabulary, bucket_cuts)
    facts = train_fact_set(regime.train)
    rows = []
    for name, changes in ablation_variants(toggles):
        loss_cfg = replace(train_config.loss, **changes)
        reports = []
        for seed in seeds:
            cfg = replace(train_config, seed=seed, loss=loss_cfg)
            result = train(regime.train, regime.dev, cfg)
            reports.append(
                evaluate(result.params, regime.dev, facts, buckets, use_gold=True)
            )
        rows.append(
            {
                "variant": name,
                "seeds": list(seeds),
                "mean": _mean_summary(reports),
                "per_seed": [r.summary() for r in reports],
            }
        )
    return rows


def _evaluate_splits(params, regime: Regime, facts, buckets) -> dict[str, EvalReport]:
    return {
        "orig_dev": evaluate(params, regime.dev, facts, buckets, use_gold=False),
        "gold_dev": evaluate(params, regime.dev, facts, buckets, use_gold=True),
        "gold_test": evaluate(params, regime.test, facts, buckets, use_gold=True),
    }


def sweep_sampling_ratio(
    regime: Regime,
    train_config: TrainConfig,
    ratios: Sequence[float],
    seeds: Sequence[int],
    bucket_cuts: tuple[int, int] = (10, 20),
) -> list[dict]:
    """One sampled-objective model per ratio, shared seeds; three metric curves.

    ``orig_dev`` scores the dev split against its annotated (possibly
    noisy) labels; ``gold_dev``/``gold_test`` score against gold labels.
    """
    buckets = bucket_relations(regime.train.vocabulary, bucket_cuts)
    facts = train_fact_set(regime.train)
    rows = []
    for ratio in ratios:
        loss_cfg = replace(
            train_config.loss, use_neg_sampling=True, neg_sampling_ratio=ratio
        )
        per_split: dict[str, list[EvalReport]] = {k: [] for k in SWEEP_SPLITS}
        for seed in seeds:
            cfg = replace(train_config, seed=seed, loss=loss_cfg)
            result = train(regime.train, regime.dev, cfg)
            for split, report in _evaluate_splits(result.params, regime, facts, buckets).items():
                per_split[split].append(report)
        rows.append(
            {
                "ratio": ratio,
                "seeds": list(seeds),
                "mean": {k: _mean_summary(v) for k, v in per_split.items()},
                "per_seed": {k: [r.summary() for r in v] for k, v in per_split.items()},
            }
        )
    return rows


def run_noise_comparison(
    regime: Regime,
    train_config: TrainConfig,
    seeds: Sequence[int],
    ratio: float = 0.1,
    bucket_cuts: tuple[int, int] = (10, 20),
) -> dict:
    """Sampled objective at the given ratio vs the plain objective.

    Both arms share seeds and every other hyperparameter; reported on the
    same three evaluation splits as the ratio sweep.
    """
    buckets = bucket_relations(regime.train.vocabulary, bucket_cuts)
    facts = train_fact_set(regime.train)
    arms = {
        "sampled": replace(train_config.loss, use_neg_sampling=True, neg_sampling_ratio=ratio),
        "unsampled": replace(train_config.loss, use_neg_sampling=False),
    }
    out: dict = {"ratio": ratio, "seeds": list(seeds)}
    for arm, loss_cfg in arms.items():
        per_split: dict[str, list[EvalReport]] = {k: [] for k in SWEEP_SPLITS}
        for seed in seeds:
            cfg = replace(train_config, seed=seed, loss=loss_cfg)
            result = train(regime.train, regime.dev, cfg)
            for split, report in _evaluate_splits(result.params, regime, facts, buckets).items():
                per_split[split].append(report)
        out[arm] = {
            "mean": {k: _mean_summary(v) for k, v in per_split.items()},
            "per_seed": {k: [r.summary() for r in v] for k, v in per_split.items()},
        }
    return out
