"""The optimization loop: seeded, deterministic, best-dev checkpointing."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .batching import assemble_batches, attach_negative_samples, sample_negative_labels
from .core import Corpus
from .errors import ConfigError, NonFiniteLossError, NumericError
from .evaluation import evaluate
from .head import HeadParams, head_backward, head_forward, init_head_params, zero_gradients
from .losses import LossConfig, batch_loss
from .optim import AdamW, clip_gradients, warmup_lr
from .rng import stream

__all__ = ["TrainConfig", "TrainResult", "train"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 4  # documents per batch
    learning_rate: float = 1e-3
    warmup_ratio: float = 0.06
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    grad_clip_norm: float | None = None
    seed: int = 0
    hidden_dim: int = 32
    group_count: int = 4
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got {self.epochs}")
        if not (self.learning_rate > 0):
            raise ConfigError(f"train.learning_rate must be > 0, got {self.learning_rate}")
        if not (0 <= self.warmup_ratio < 1):
            raise ConfigError(f"train.warmup_ratio must be in [0, 1), got {self.warmup_ratio}")
        if self.batch_size < 2:
            raise ConfigError(f"train.batch_size must be >= 2, got {self.batch_size}")
        if self.hidden_dim % self.group_count != 0:
            raise ConfigError("train.hidden_dim must be divisible by train.group_count")


@dataclass(eq=False)
class TrainResult:
    params: HeadParams  # checkpoint from the best dev-F1 epoch
    final_params: HeadParams
    history: list[dict]
    best_epoch: int

    @property
    def best_dev_f1(self) -> float:
        return self.history[self.best_epoch]["dev"]["f1"] if self.history else 0.0


def _fixed_samples(corpus: Corpus, ratio: float, seed: int) -> dict[int, tuple[int, ...]]:
    """One sampled negative set per NA example, reused every epoch."""
    rng = stream(seed, "negsample", "once")
    return {
        i: sample_negative_labels(ex, corpus.vocabulary, ratio, rng)
        for i, ex in enumerate(corpus.examples)
        if not ex.positive_relations
    }


def train(
    train_corpus: Corpus,
    dev_corpus: Corpus,
    config: TrainConfig,
    params: HeadParams | None = None,
) -> TrainResult:
    """Optimize the head on the train split, checkpointing by dev F1.

    Dev evaluation scores each epoch against the dev corpus's own labels
    (the only labels a tuner is assumed to have). Deterministic given the
    seed: batch shuffling, negative sampling, and initialization all use
    independent streams derived from it.
    """
    loss_cfg = config.loss
    if params is None:
        params = init_head_params(
            input_dim=train_corpus.embedding_dim,
            hidden_dim=config.hidden_dim,
            group_count=config.group_count,
            num_logits=train_corpus.vocabulary.num_logits,
            rng=stream(config.seed, "init"),
        )
    tensors = {name: arr.copy() for name, arr in params.tensors().items()}

    optimizer = AdamW(
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )

    probe = assemble_batches(train_corpus, config.batch_size, config.seed)
    steps_per_epoch = len(probe)
    total_steps = steps_per_epoch * config.epochs

    once_samples: dict[int, tuple[int, ...]] | None = None
    if loss_cfg.use_neg_sampling and loss_cfg.resample == "once":
        once_samples = _fixed_samples(train_corpus, loss_cfg.neg_sampling_ratio, config.seed)

    history: list[dict] = []
    best_epoch = -1
    best_f1 = -1.0
    best_tensors: dict[str, np.ndarray] | None = None
    step = 0

    def current_params() -> HeadParams:
        return HeadParams(
            W_h=tensors["W_h"],
            W_t=tensors["W_t"],
            W_c1=tensors["W_c1"],
            W_c2=tensors["W_c2"],
            W_o=tensors["W_o"],
            b_o=tensors["b_o"],
            group_count=config.group_count,
        )

    for epoch in range(config.epochs):
        batches = assemble_batches(
            train_corpus, config.batch_size, _epoch_seed(config.seed, epoch)
        )
        if loss_cfg.use_neg_sampling:
            if loss_cfg.resample == "once":
                batches = [
                    replace(
                        b,
                        sampled_negatives={
                            pos: once_samples[b.example_indices[pos]] for pos in b.bn_indices
                        },
                    )
                    for b in batches
                ]
            elif loss_cfg.resample == "per_epoch":
                rng = stream(config.seed, "negsample", epoch)
                batches = [
                    attach_negative_samples(b, train_corpus, loss_cfg.neg_sampling_ratio, rng)
                    for b in batches
                ]

        epoch_parts = {"pmt": 0.0, "em": 0.0, "scl": 0.0, "lt": 0.0, "sampled_neg": 0.0}
        epoch_total = 0.0

        for batch_index, batch in enumerate(batches):
            if loss_cfg.use_neg_sampling and loss_cfg.resample == "per_step":
                rng = stream(config.seed, "negsample", epoch, batch_index)
                batch = attach_negative_samples(
                    batch, train_corpus, loss_cfg.neg_sampling_ratio, rng
                )

            p = current_params()
            examples = [train_corpus.examples[i] for i in batch.example_indices]
            try:
                forwards = [head_forward(ex, p) for ex in examples]
                out = batch_loss(examples, batch, forwards, train_corpus.vocabulary, loss_cfg)
            except NumericError as exc:
                raise NonFiniteLossError(epoch, batch_index, {"error": str(exc)}) from exc
            if not math.isfinite(out.total):
                raise NonFiniteLossError(epoch, batch_index, out.parts)
            epoch_total += out.total
            for key in epoch_parts:
                epoch_parts[key] += out.parts[key]

            grads = zero_gradients(p)
            for pos in range(len(examples)):
                head_backward(
                    forwards[pos], out.grad_embeddings[pos], out.grad_logits[pos], p, grads
                )
            if config.grad_clip_norm is not None:
                clip_gradients(grads, config.grad_clip_norm)
            lr = warmup_lr(config.learning_rate, step, total_steps, config.warmup_ratio)
            optimizer.step(tensors, grads, lr)
            step += 1

        dev_report = evaluate(current_params(), dev_corpus, use_gold=False)
        record = {
            "epoch": epoch,
            "loss_total": epoch_total,
            "loss_parts": dict(epoch_parts),
            "dev": {
                "precision": dev_report.precision,
                "recall": dev_report.recall,
                "f1": dev_report.f1,
            },
        }
        history.append(record)
        logger.info(
            "epoch %d: loss=%.4f dev_f1=%.4f", epoch, epoch_total, dev_report.f1
        )
        if dev_report.f1 > best_f1:
            best_f1 = dev_report.f1
            best_epoch = epoch
            best_tensors = {name: arr.copy() for name, arr in tensors.items()}

    final = current_params().copy()
    if best_tensors is None:
        best = final
        best_epoch = 0
    else:
        best = HeadParams(
            W_h=best_tensors["W_h"],
            W_t=best_tensors["W_t"],
            W_c1=best_tensors["W_c1"],
            W_c2=best_tensors["W_c2"],
            W_o=best_tensors["W_o"],
            b_o=best_tensors["b_o"],
            group_count=config.group_count,
        )
    return TrainResult(params=best, final_params=final, history=history, best_epoch=best_epoch)


def _epoch_seed(seed: int, epoch: int) -> int:
    # distinct shuffle stream per epoch; assemble_batches tags with "shuffle"
    return (seed * 1_000_003 + epoch) & 0x7FFFFFFF
