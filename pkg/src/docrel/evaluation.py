"""Thresholded prediction and the micro-F1 metric suite.

A relation is predicted for a pair exactly when its logit strictly exceeds
the threshold logit; an empty prediction set is an NA prediction. Metrics
are micro-averaged over predicted (pair, relation) triples. The
train-excluded variant drops predicted triples whose (head entity,
relation, tail entity) fact occurs in the training labels before
recomputing against the unchanged gold set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Bucket, Corpus
from .errors import NumericError
from .head import HeadParams, head_forward

__all__ = [
    "EvalReport",
    "predict_labels",
    "train_fact_set",
    "evaluate",
]


def predict_labels(f: np.ndarray, na_index: int) -> frozenset[int]:
    """Relations whose logit strictly exceeds the threshold logit."""
    if not np.all(np.isfinite(f)):
        raise NumericError("predict_labels: non-finite logits")
    f_eta = f[na_index]
    return frozenset(
        r for r in range(len(f)) if r != na_index and f[r] > f_eta
    )


def train_fact_set(corpus: Corpus) -> frozenset[tuple[int, int, int]]:
    """(head entity, relation, tail entity) facts present in the labels."""
    facts = set()
    for ex in corpus.examples:
        for r in ex.positive_relations:
            facts.add((ex.head_id, r, ex.tail_id))
    return frozenset(facts)


@dataclass(eq=False)
class EvalReport:
    precision: float
    recall: float
    f1: float
    ign_f1: float
    bucket_f1: dict[Bucket, float]
    per_relation: dict[int, tuple[int, int, int]]
    predicted_triple_count: int
    excluded_prediction_count: int
    gold_triple_count: int
    config: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "ign_f1": self.ign_f1,
            "head_f1": self.bucket_f1.get(Bucket.HEAD, 0.0),
            "mid_f1": self.bucket_f1.get(Bucket.MID, 0.0),
            "tail_f1": self.bucket_f1.get(Bucket.TAIL, 0.0),
            "predicted_triples": self.predicted_triple_count,
            "excluded_predictions": self.excluded_prediction_count,
            "gold_triples": self.gold_triple_count,
        }


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def evaluate(
    params: HeadParams,
    corpus: Corpus,
    train_facts: frozenset = frozenset(),
    buckets: dict[int, Bucket] | None = None,
    use_gold: bool = True,
) -> EvalReport:
    """Score the model on a corpus.

    ``use_gold`` selects the gold label set when the corpus preserves one
    (the default, matching gold-split evaluation); pass False to score
    against the labels as annotated, e.g. for noisy-dev curves.
    """
    buckets = buckets or {}
    per_relation: dict[int, list[int]] = {}
    na = corpus.vocabulary.na_index

    tp = fp = fn = 0
    ign_tp = ign_fp = 0
    excluded = 0
    predicted_count = 0
    gold_count = 0

    for ex in corpus.examples:
        fw = head_forward(ex, params, keep_cache=False)
        predicted = predict_labels(fw.f, na)
        gold = ex.labels(use_gold)
        predicted_count += len(predicted)
        gold_count += len(gold)

        for r in predicted | gold:
            cell = per_relation.setdefault(r, [0, 0, 0])
            in_pred, in_gold = r in predicted, r in gold
            hit = in_pred and in_gold
            tp += hit
            fp += in_pred and not in_gold
            fn += in_gold and not in_pred
            cell[0] += hit
            cell[1] += in_pred and not in_gold
            cell[2] += in_gold and not in_pred
            if in_pred:
                if (ex.head_id, r, ex.tail_id) in train_facts:
                    excluded += 1
                else:
                    ign_tp += hit
                    ign_fp += not in_gold

    precision, recall, f1 = _prf(tp, fp, fn)
    # same gold set; only the surviving predictions change
    ign_fn = gold_count - ign_tp
    _, _, ign_f1 = _prf(ign_tp, ign_fp, ign_fn)

    bucket_f1: dict[Bucket, float] = {}
    for bucket in (Bucket.HEAD, Bucket.MID, Bucket.TAIL):
        btp = bfp = bfn = 0
        for r, (ctp, cfp, cfn) in per_relation.items():
            if buckets.get(r) == bucket:
                btp += ctp
                bfp += cfp
                bfn += cfn
        bucket_f1[bucket] = _prf(btp, bfp, bfn)[2]

    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        ign_f1=ign_f1,
        bucket_f1=bucket_f1,
        per_relation={r: tuple(v) for r, v in per_relation.items()},
        predicted_triple_count=predicted_count,
        excluded_prediction_count=excluded,
        gold_triple_count=gold_count,
        config={
            "use_gold": use_gold,
            "label_source": corpus.label_source.value,
            "train_fact_count": len(train_facts),
            "bucketed_relations": len(buckets),
            "examples": len(corpus.examples),
        },
    )
