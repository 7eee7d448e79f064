"""Loss terms for moving-threshold multi-label classification.

For an example with logits ``f`` (relations at indices ``0..|R|-1``, the NA
threshold class at ``na``), each relation ``r`` is compared *only* against
the threshold through the two-way softmax

    p_r  = sigma(f[r] - f[na])      p_na = 1 - p_r

inducing a partial order: positives above the threshold, threshold above
negatives. On top of that:

* ``pmt_loss``  - negative log of the joint pairwise probability,
  ``sum_P log(1+e^(f_na-f_r)) + sum_N log(1+e^(f_r-f_na))``.
* ``pair_entropy`` / ``em_loss`` - entropy of each two-way distribution,
  added to sharpen it away from 0.5; optionally normalized by the
  positive/negative set sizes.
* ``scl_loss`` / ``lt_loss`` / ``l2_loss`` - supervised contrastive terms
  over L2-normalized pair embeddings; anchors with no in-batch positive
  fall back to pure dissimilarity maximization (the long-tail branch).
* ``sampled_negative_loss`` - for NA-labeled examples, penalize only a
  sampled subset of negative relations (false-negative robustness).
* ``batch_loss`` - the combined objective with analytic gradients w.r.t.
  per-example logits and unit embeddings.

All scalar math uses overflow-safe forms: ``sigma`` and ``log(1+e^z)``
branch at zero and ``0*log 0`` is taken as 0. Reductions run in a fixed
order (ascending relation index, ascending batch position) so results are
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, NumericError, ShapeError

__all__ = [
    "LossConfig",
    "BatchLossOutput",
    "sigmoid",
    "log1p_exp",
    "pairwise_probs",
    "pmt_loss",
    "pmt_loss_grad",
    "pair_entropy",
    "pair_entropy_grad",
    "em_loss",
    "em_loss_grad",
    "scl_loss",
    "scl_loss_grad",
    "lt_loss",
    "lt_loss_grad",
    "l2_loss",
    "l2_loss_grad",
    "sampled_negative_loss",
    "batch_loss",
]

ENTROPY_NORMS = ("unit", "set_size")
RESAMPLE_MODES = ("once", "per_epoch", "per_step")


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters and ablation switches for the combined objective."""

    temperature: float = 1.0
    contrastive_weight: float = 1.0
    entropy_norm: str = "unit"
    neg_sampling_ratio: float = 1.0
    use_entropy: bool = True
    use_contrastive: bool = True
    use_neg_sampling: bool = False
    resample: str = "per_epoch"

    def __post_init__(self):
        if not (self.temperature > 0):
            raise ConfigError(f"loss.temperature must be > 0, got {self.temperature}")
        if self.contrastive_weight < 0:
            raise ConfigError(
                f"loss.contrastive_weight must be >= 0, got {self.contrastive_weight}"
            )
        if not (0 < self.neg_sampling_ratio <= 1):
            raise ConfigError(
                f"loss.neg_sampling_ratio must be in (0, 1], got {self.neg_sampling_ratio}"
            )
        if self.entropy_norm not in ENTROPY_NORMS:
            raise ConfigError(
                f"loss.entropy_norm must be one of {ENTROPY_NORMS}, got {self.entropy_norm!r}"
            )
        if self.resample not in RESAMPLE_MODES:
            raise ConfigError(
                f"loss.resample must be one of {RESAMPLE_MODES}, got {self.resample!r}"
            )


@dataclass(eq=False)
class BatchLossOutput:
    total: float
    parts: dict[str, float]
    grad_logits: list[np.ndarray]
    grad_embeddings: list[np.ndarray]


# ---------------------------------------------------------------------------
# stable scalar primitives

def sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def log1p_exp(z: float) -> float:
    """log(1 + e^z) without overflow."""
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NumericError(f"non-finite logit input: {v!r}")


def pairwise_probs(f_r: float, f_eta: float) -> tuple[float, float]:
    """Two-way softmax between one relation logit and the threshold logit."""
    _require_finite(f_r, f_eta)
    p_r = sigmoid(f_r - f_eta)
    return p_r, 1.0 - p_r


# ---------------------------------------------------------------------------
# moving-threshold loss

def _check_label_sets(positives, negatives, na_index: int) -> None:
    pos, neg = set(positives), set(negatives)
    if na_index in pos or na_index in neg:
        raise ContractError("threshold class cannot appear in a label set")
    if pos & neg:
        raise ContractError(f"label sets overlap: {sorted(pos & neg)}")


def pmt_loss(f: np.ndarray, positives, negatives, na_index: int) -> float:
    """Joint pairwise probability loss for one example."""
    _check_label_sets(positives, negatives, na_index)
    f_eta = float(f[na_index])
    loss = 0.0
    for r in sorted(positives):
        loss += log1p_exp(f_eta - float(f[r]))
    for r in sorted(negatives):
        loss += log1p_exp(float(f[r]) - f_eta)
    return loss


def pmt_loss_grad(
    f: np.ndarray, positives, negatives, na_index: int
) -> tuple[float, np.ndarray]:
    _check_label_sets(positives, negatives, na_index)
    f_eta = float(f[na_index])
    grad = np.zeros_like(f, dtype=np.float64)
    loss = 0.0
    for r in sorted(positives):
        gap = f_eta - float(f[r])
        loss += log1p_exp(gap)
        p_eta = sigmoid(gap)
        grad[r] -= p_eta
        grad[na_index] += p_eta
    for r in sorted(negatives):
        gap = float(f[r]) - f_eta
        loss += log1p_exp(gap)
        p_r = sigmoid(gap)
        grad[r] += p_r
        grad[na_index] -= p_r
    return loss, grad


# ---------------------------------------------------------------------------
# entropy of the pairwise distributions

def pair_entropy(f_r: float, f_eta: float) -> float:
    """Entropy of the two-way (relation, threshold) distribution, in nats."""
    _require_finite(f_r, f_eta)
    gap = f_r - f_eta
    p = sigmoid(gap)
    q = 1.0 - p
    # -log p = log1p_exp(-gap), -log q = log1p_exp(gap); 0*log0 -> 0
    return p * log1p_exp(-gap) + q * log1p_exp(gap)


def pair_entropy_grad(f_r: float, f_eta: float) -> tuple[float, float]:
    """(entropy, d entropy / d f_r); the f_eta gradient is its negation."""
    _require_finite(f_r, f_eta)
    gap = f_r - f_eta
    p = sigmoid(gap)
    q = 1.0 - p
    h = p * log1p_exp(-gap) + q * log1p_exp(gap)
    return h, -gap * p * q


def _gammas(n_pos: int, n_neg: int, config: LossConfig) -> tuple[float, float]:
    if config.entropy_norm == "set_size":
        return float(max(1, n_pos)), float(max(1, n_neg))
    return 1.0, 1.0


def em_loss(
    f: np.ndarray, positives, negatives, na_index: int, config: LossConfig
) -> float:
    """Entropy-minimization term, normalized per the configured mode."""
    _check_label_sets(positives, negatives, na_index)
    f_eta = float(f[na_index])
    g1, g2 = _gammas(len(positives), len(negatives), config)
    pos_sum = 0.0
    for r in sorted(positives):
        pos_sum += pair_entropy(float(f[r]), f_eta)
    neg_sum = 0.0
    for r in sorted(negatives):
        neg_sum += pair_entropy(float(f[r]), f_eta)
    return pos_sum / g1 + neg_sum / g2


def em_loss_grad(
    f: np.ndarray, positives, negatives, na_index: int, config: LossConfig
) -> tuple[float, np.ndarray]:
    _check_label_sets(positives, negatives, na_index)
    f_eta = float(f[na_index])
    g1, g2 = _gammas(len(positives), len(negatives), config)
    grad = np.zeros_like(f, dtype=np.float64)
    pos_sum = 0.0
    for r in sorted(positives):
        h, dh = pair_entropy_grad(float(f[r]), f_eta)
        pos_sum += h
        grad[r] += dh / g1
        grad[na_index] -= dh / g1
    neg_sum = 0.0
    for r in sorted(negatives):
        h, dh = pair_entropy_grad(float(f[r]), f_eta)
        neg_sum += h
        grad[r] += dh / g2
        grad[na_index] -= dh / g2
    return pos_sum / g1 + neg_sum / g2, grad


# ---------------------------------------------------------------------------
# supervised contrastive terms over unit pair embeddings

def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + math.log(float(np.sum(np.exp(values - m))))


def _similarities(anchor_index: int, embeddings: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Scaled dot products of the anchor with every other batch member."""
    others = np.array(
        [i for i in range(embeddings.shape[0]) if i != anchor_index], dtype=np.intp
    )
    sims = embeddings[others] @ embeddings[anchor_index] / tau
    return others, sims


def scl_loss(
    anchor_index: int, batch_embeddings, positive_set, tau: float
) -> float:
    """Multi-label supervised contrastive loss for one anchor.

    The numerator averages over the anchor's in-batch positives; the
    denominator spans every non-anchor batch member.
    """
    emb = np.asarray(batch_embeddings, dtype=np.float64)
    pos = sorted(positive_set)
    if not pos:
        raise ContractError("scl_loss: empty positive set (long-tail branch belongs to l2_loss)")
    if anchor_index in positive_set:
        raise ContractError("scl_loss: anchor cannot be its own positive")
    if emb.shape[0] < 2:
        raise ContractError("scl_loss: batch must have at least 2 members")
    others, sims = _similarities(anchor_index, emb, tau)
    pos_mask = np.isin(others, np.asarray(pos, dtype=np.intp))
    return _logsumexp(sims) + math.log(len(pos)) - _logsumexp(sims[pos_mask])


def scl_loss_grad(
    anchor_index: int, batch_embeddings, positive_set, tau: float
) -> tuple[float, np.ndarray]:
    """Loss and gradients w.r.t. every embedding in the batch."""
    emb = np.asarray(batch_embeddings, dtype=np.float64)
    loss = scl_loss(anchor_index, emb, positive_set, tau)
    others, sims = _similarities(anchor_index, emb, tau)
    pos_mask = np.isin(others, np.asarray(sorted(positive_set), dtype=np.intp))

    all_soft = np.exp(sims - np.max(sims))
    all_soft /= all_soft.sum()
    pos_sims = sims[pos_mask]
    pos_soft = np.exp(pos_sims - np.max(pos_sims))
    pos_soft /= pos_soft.sum()

    dloss_dsim = all_soft.copy()
    dloss_dsim[pos_mask] -= pos_soft

    grads = np.zeros_like(emb)
    grads[anchor_index] = (dloss_dsim[:, None] * emb[others]).sum(axis=0) / tau
    np.add.at(grads, others, dloss_dsim[:, None] * emb[anchor_index] / tau)
    return loss, grads


def lt_loss(anchor_index: int, batch_embeddings, tau: float) -> float:
    """Long-tail branch: push the anchor away from every other batch member."""
    emb = np.asarray(batch_embeddings, dtype=np.float64)
    if emb.shape[0] < 2:
        raise ContractError("lt_loss: batch must have at least 2 members")
    _, sims = _similarities(anchor_index, emb, tau)
    return _logsumexp(sims)


def lt_loss_grad(
    anchor_index: int, batch_embeddings, tau: float
) -> tuple[float, np.ndarray]:
    emb = np.asarray(batch_embeddings, dtype=np.float64)
    loss = lt_loss(anchor_index, emb, tau)
    others, sims = _similarities(anchor_index, emb, tau)
    soft = np.exp(sims - np.max(sims))
    soft /= soft.sum()
    grads = np.zeros_like(emb)
    grads[anchor_index] = (soft[:, None] * emb[others]).sum(axis=0) / tau
    np.add.at(grads, others, soft[:, None] * emb[anchor_index] / tau)
    return loss, grads


def l2_loss(
    bp_positions, s_sets: dict[int, frozenset[int]], batch_embeddings, tau: float
) -> float:
    """Contrastive loss summed over non-NA anchors.

    Anchors with at least one in-batch positive use ``scl_loss``; anchors
    with none use ``lt_loss``. NA examples never anchor but do appear in
    denominators. Batches too small to contrast contribute zero.
    """
    emb = np.asarray(batch_embeddings, dtype=np.float64)
    if emb.shape[0] < 2:
        return 0.0
    total = 0.0
    for a in sorted(bp_positions):
        positives = s_sets.get(a, frozenset())
        if positives:
            total += scl_loss(a, emb, positives, tau)
        else:
            total += lt_loss(a, emb, tau)
    return total


def l2_loss_grad(
    bp_positions, s_sets: dict[int, frozenset[int]], batch_embeddings, tau: float
) -> tuple[float, np.ndarray]:
    emb = np.asarray(batch_embeddings, dtype=np.float64)
    grads = np.zeros_like(emb)
    if emb.shape[0] < 2:
        return 0.0, grads
    total = 0.0
    for a in sorted(bp_positions):
        positives = s_sets.get(a, frozenset())
        if positives:
            value, g = scl_loss_grad(a, emb, positives, tau)
        else:
            value, g = lt_loss_grad(a, emb, tau)
        total += value
        grads += g
    return total, grads


# ---------------------------------------------------------------------------
# negative-label sampling for NA examples

def _sampled_na_terms(
    f: np.ndarray, sampled, na_index: int, config: LossConfig
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Per-example sampled-set terms: threshold-loss sum, normalized entropy
    sum, and their two gradient arrays (kept separate so the full-set case
    reproduces the unsampled accumulation exactly)."""
    f_eta = float(f[na_index])
    neg_grad = np.zeros_like(f, dtype=np.float64)
    ent_grad = np.zeros_like(f, dtype=np.float64)
    neg_loss = 0.0
    for r in sorted(sampled):
        gap = float(f[r]) - f_eta
        neg_loss += log1p_exp(gap)
        p_r = sigmoid(gap)
        neg_grad[r] += p_r
        neg_grad[na_index] -= p_r
    ent_sum = 0.0
    _, g2 = _gammas(0, len(sampled), config)
    if config.use_entropy:
        for r in sorted(sampled):
            h, dh = pair_entropy_grad(float(f[r]), f_eta)
            ent_sum += h
            ent_grad[r] += dh / g2
            ent_grad[na_index] -= dh / g2
    return neg_loss, ent_sum / g2, neg_grad, ent_grad


def sampled_negative_loss(
    fs, sampled_sets, na_index: int, config: LossConfig, negatives=None
) -> float:
    """Sampled-subset loss over a sequence of NA-labeled examples.

    ``fs`` and ``sampled_sets`` are aligned; ``negatives`` optionally gives
    each example's full negative set for membership validation.
    """
    if len(fs) != len(sampled_sets):
        raise ShapeError("sampled_negative_loss: misaligned inputs")
    total = 0.0
    for i, (f, sampled) in enumerate(zip(fs, sampled_sets)):
        if not sampled:
            raise ContractError(f"example {i}: empty sampled negative set")
        if negatives is not None and not set(sampled) <= set(negatives[i]):
            extra = sorted(set(sampled) - set(negatives[i]))
            raise ContractError(f"example {i}: sampled labels {extra} are not negatives")
        if na_index in sampled:
            raise ContractError(f"example {i}: threshold class in sampled set")
        neg_loss, ent, _, _ = _sampled_na_terms(
            np.asarray(f, dtype=np.float64), sampled, na_index, config
        )
        total += neg_loss + ent
    return total


# ---------------------------------------------------------------------------
# combined batch objective

def batch_loss(examples, batch, forwards, vocab, config: LossConfig) -> BatchLossOutput:
    """Combined objective and gradients for one batch.

    ``examples`` and ``forwards`` are aligned with the batch positions.
    Without negative sampling every example contributes its threshold and
    entropy terms; with sampling enabled the NA examples contribute only
    over their sampled negative sets. The contrastive part is identical in
    both cases and is scaled by ``contrastive_weight``.
    """
    n = len(examples)
    if len(forwards) != n:
        raise ShapeError("batch_loss: forwards misaligned with examples")
    na = vocab.na_index
    n_rel = vocab.num_relations
    all_relations = range(n_rel)

    grad_logits = [np.zeros(vocab.num_logits) for _ in range(n)]
    dim = forwards[0].x_unit.shape[0] if n else 0
    grad_embeddings = [np.zeros(dim) for _ in range(n)]
    parts = {"pmt": 0.0, "em": 0.0, "scl": 0.0, "lt": 0.0, "sampled_neg": 0.0}

    bn_set = set(batch.bn_indices)
    classification = 0.0
    for pos in range(n):
        ex = examples[pos]
        f = forwards[pos].f
        if f.shape[0] != vocab.num_logits:
            raise ShapeError(
                f"batch_loss: logit vector of size {f.shape[0]}, expected {vocab.num_logits}"
            )
        positives = sorted(ex.positive_relations)
        negatives = sorted(set(all_relations) - ex.positive_relations)

        if config.use_neg_sampling and pos in bn_set:
            sampled = batch.sampled_negatives.get(pos)
            if sampled is None:
                raise ContractError(
                    f"batch position {pos}: sampling enabled but no sampled set attached"
                )
            if not set(sampled) <= set(negatives):
                raise ContractError(
                    f"batch position {pos}: sampled labels outside the negative set"
                )
            neg_loss, ent, neg_grad, ent_grad = _sampled_na_terms(f, sampled, na, config)
            example_loss = neg_loss + ent
            parts["sampled_neg"] += example_loss
            grad_logits[pos] += neg_grad
            if config.use_entropy:
                grad_logits[pos] += ent_grad
        else:
            pmt_value, pmt_grad = pmt_loss_grad(f, positives, negatives, na)
            grad_logits[pos] += pmt_grad
            if config.use_entropy:
                em_value, em_grad = em_loss_grad(f, positives, negatives, na, config)
                grad_logits[pos] += em_grad
            else:
                em_value = 0.0
            example_loss = pmt_value + em_value
            parts["pmt"] += pmt_value
            parts["em"] += em_value
        classification += example_loss

    lam = config.contrastive_weight
    contrastive = 0.0
    if config.use_contrastive and lam != 0.0 and n >= 2:
        embeddings = np.stack([fw.x_unit for fw in forwards])
        scl_total = 0.0
        lt_total = 0.0
        contrast_grads = np.zeros_like(embeddings)
        for a in sorted(batch.bp_indices):
            positives = batch.s_sets.get(a, frozenset())
            if positives:
                value, g = scl_loss_grad(a, embeddings, positives, config.temperature)
                scl_total += value
            else:
                value, g = lt_loss_grad(a, embeddings, config.temperature)
                lt_total += value
            contrast_grads += g
        parts["scl"] = scl_total
        parts["lt"] = lt_total
        contrastive = scl_total + lt_total
        for pos in range(n):
            grad_embeddings[pos] += lam * contrast_grads[pos]

    total = classification + lam * contrastive
    return BatchLossOutput(
        total=total, parts=parts, grad_logits=grad_logits, grad_embeddings=grad_embeddings
    )
