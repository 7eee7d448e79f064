"""Synthetic long-tail corpora with controllable false-negative corruption.

The generator builds a small world first: one unit prototype direction per
relation, one unit base vector per entity, and a knowledge graph of entity
pairs with Zipf-distributed relation assignments. Documents then sample
pairs from that world; a positive pair's mention and context embeddings
mix its relations' prototypes with noise, while NA pairs draw isotropic
background directions of comparable norm. Because facts live in the world
rather than in single documents, the same (head, relation, tail) fact can
recur across splits, which keeps train-fact exclusion meaningful.

Corruption relabels positive examples as NA uniformly at random, preserving
the gold label set on the side, which is exactly the false-negative noise
the sampled objective is meant to survive.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    Corpus,
    LabelSource,
    Mention,
    PairExample,
    RelationVocabulary,
    count_relation_frequencies,
    load_corpus,
    save_corpus,
)
from .errors import ConfigError, DataFormatError
from .rng import stream

__all__ = [
    "SyntheticConfig",
    "Regime",
    "generate_synthetic_corpus",
    "generate_regime_splits",
    "inject_false_negatives",
    "hide_fact_pairs",
    "assemble_regime",
    "save_regime",
    "load_regime",
]

REGIME_KINDS = ("OOG", "OGG", "GGG", "OOO", "custom")
CORRUPTION_MODES = ("example", "fact")


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the synthetic world and one generated split.

    ``zipf_exponent`` controls the skew of relation frequencies; the
    default is calibrated so the ten most frequent relations carry about
    60% of positive labels when ``num_relations`` is 96. Generated splits
    always carry gold labels; ``false_negative_rate`` records the intended
    corruption for downstream regime assembly, which is where labels are
    actually removed.
    """

    num_relations: int = 96
    num_documents: int = 100
    pairs_per_document: tuple[int, int] = (8, 16)
    zipf_exponent: float = 1.05
    multi_label_rate: float = 0.15
    embedding_dim: int = 32
    prototype_noise_sigma: float = 0.4
    false_negative_rate: float = 0.0
    na_fraction: float = 0.5
    num_entities: int = 150
    kg_pairs: int = 300
    mentions_per_entity: tuple[int, int] = (1, 3)
    seed: int = 0
    split: str = "train"

    def __post_init__(self):
        if self.num_relations < 3:
            raise ConfigError("num_relations must be >= 3")
        for name in ("multi_label_rate", "na_fraction"):
            v = getattr(self, name)
            if not (0 <= v < 1):
                raise ConfigError(f"{name} must be in [0, 1), got {v}")
        if not (0 <= self.false_negative_rate < 1):
            raise ConfigError("false_negative_rate must be in [0, 1)")
        if self.embedding_dim < 2:
            raise ConfigError("embedding_dim must be >= 2")
        if self.num_entities < 4:
            raise ConfigError("num_entities must be >= 4")
        max_pairs = self.num_entities * (self.num_entities - 1)
        if self.kg_pairs >= max_pairs:
            raise ConfigError(
                f"kg_pairs={self.kg_pairs} leaves no room for NA pairs "
                f"(only {max_pairs} ordered pairs exist)"
            )
        lo, hi = self.pairs_per_document
        if not (1 <= lo <= hi):
            raise ConfigError(f"pairs_per_document range {self.pairs_per_document} invalid")
        if hi > max_pairs - self.kg_pairs and self.na_fraction > 0:
            raise ConfigError("pairs_per_document too large for the NA pair pool")


@dataclass(frozen=True, eq=False)
class Regime:
    """A (train, dev, test) triple tagged with its label sources."""

    train: Corpus
    dev: Corpus
    test: Corpus
    name: str

    def __post_init__(self):
        if self.name not in REGIME_KINDS:
            raise ConfigError(f"unknown regime kind {self.name!r}")
        vocab = self.train.vocabulary
        if self.dev.vocabulary.relations != vocab.relations or (
            self.test.vocabulary.relations != vocab.relations
        ):
            raise ConfigError("regime splits must share one relation vocabulary")


class _World:
    """Fixed structures shared by every split generated from one seed."""

    def __init__(self, config: SyntheticConfig):
        rng = stream(config.seed, "world")
        d = config.embedding_dim
        n_rel = config.num_relations

        self.prototypes = rng.normal(size=(n_rel, d))
        self.prototypes /= np.linalg.norm(self.prototypes, axis=1, keepdims=True)
        self.entity_base = rng.normal(size=(config.num_entities, d))
        self.entity_base /= np.linalg.norm(self.entity_base, axis=1, keepdims=True)

        weights = np.arange(1, n_rel + 1, dtype=np.float64) ** (-config.zipf_exponent)
        self.relation_probs = weights / weights.sum()

        # knowledge graph: ordered entity pairs with persistent label sets
        pair_set: dict[tuple[int, int], frozenset[int]] = {}
        while len(pair_set) < config.kg_pairs:
            h, t = rng.integers(0, config.num_entities, size=2)
            if h == t or (int(h), int(t)) in pair_set:
                continue
            first = int(rng.choice(n_rel, p=self.relation_probs))
            labels = {first}
            if rng.random() < config.multi_label_rate:
                for _ in range(8):
                    second = int(rng.choice(n_rel, p=self.relation_probs))
                    if second != first:
                        labels.add(second)
                        break
            pair_set[(int(h), int(t))] = frozenset(labels)
        self.kg = list(pair_set.items())

    def mixture(self, labels: frozenset[int]) -> np.ndarray:
        m = self.prototypes[sorted(labels)].sum(axis=0)
        return m / np.linalg.norm(m)


def _noise(rng: np.random.Generator, d: int, sigma: float) -> np.ndarray:
    return rng.normal(size=d) * (sigma / math.sqrt(d))


def generate_synthetic_corpus(config: SyntheticConfig) -> Corpus:
    """Generate one gold-labeled split from the world defined by the config seed."""
    world = _World(config)
    d = config.embedding_dim
    vocab = RelationVocabulary.from_relations(
        [f"R{k:03d}" for k in range(config.num_relations)]
    )

    kg_keys = {pair for pair, _ in world.kg}
    sig = config.prototype_noise_sigma
    m_lo, m_hi = config.mentions_per_entity

    def make_mentions(rng, entity: int, mixture: np.ndarray | None) -> tuple[Mention, ...]:
        count = int(rng.integers(m_lo, m_hi + 1))
        out = []
        for _ in range(count):
            base = 0.6 * world.entity_base[entity]
            if mixture is not None:
                vec = base + 0.8 * mixture + _noise(rng, d, sig)
            else:
                vec = base + _noise(rng, d, 1.0)
            out.append(Mention(entity, vec))
        return tuple(out)

    examples: list[PairExample] = []
    for doc_index in range(config.num_documents):
        rng = stream(config.seed, config.split, "doc", doc_index)
        doc_id = f"{config.split}-{doc_index:05d}"
        lo, hi = config.pairs_per_document
        n_pairs = int(rng.integers(lo, hi + 1))
        seen: set[tuple[int, int]] = set()
        for _ in range(n_pairs):
            if rng.random() >= config.na_fraction:
                # positive: draw a knowledge-graph pair not yet in this doc
                for _ in range(64):
                    pair, labels = world.kg[int(rng.integers(len(world.kg)))]
                    if pair not in seen:
                        break
                else:
                    continue
                seen.add(pair)
                h, t = pair
                mixture = world.mixture(labels)
                context = mixture + _noise(rng, d, sig)
                gold = labels
            else:
                # NA: draw an ordered pair outside the knowledge graph
                for _ in range(64):
                    h = int(rng.integers(config.num_entities))
                    t = int(rng.integers(config.num_entities))
                    if h != t and (h, t) not in kg_keys and (h, t) not in seen:
                        break
                else:
                    continue
                seen.add((h, t))
                mixture = None
                context = _noise(rng, d, 1.0)
                gold = frozenset()

            examples.append(
                PairExample(
                    doc_id=doc_id,
                    head_id=h,
                    tail_id=t,
                    head_mentions=make_mentions(rng, h, mixture),
                    tail_mentions=make_mentions(rng, t, mixture),
                    context=context,
                    positive_relations=gold,
                    gold_positive_relations=gold,
                )
            )

    corpus = Corpus(
        vocabulary=vocab,
        examples=tuple(examples),
        label_source=LabelSource.SYNTHETIC,
        embedding_dim=d,
    )
    vocab = vocab.with_frequencies(count_relation_frequencies(corpus))
    return replace(corpus, vocabulary=vocab)


def generate_regime_splits(
    config: SyntheticConfig, dev_documents: int, test_documents: int
) -> tuple[Corpus, Corpus, Corpus]:
    """Generate gold train/dev/test splits sharing one world and vocabulary.

    Relation frequencies on all three splits come from the train split.
    """
    train = generate_synthetic_corpus(replace(config, split="train"))
    dev = generate_synthetic_corpus(
        replace(config, split="dev", num_documents=dev_documents)
    )
    test = generate_synthetic_corpus(
        replace(config, split="test", num_documents=test_documents)
    )
    vocab = train.vocabulary
    dev = replace(dev, vocabulary=vocab)
    test = replace(test, vocabulary=vocab)
    return train, dev, test


def inject_false_negatives(
    corpus: Corpus, rate: float, rng: np.random.Generator
) -> tuple[Corpus, int]:
    """Relabel each positive example as NA with probability ``rate``.

    Gold labels are preserved; NA examples are untouched. Returns the
    corrupted corpus (tagged as original/noisy labels) and the number of
    examples corrupted.
    """
    if not (0 <= rate < 1):
        raise ConfigError(f"corruption rate must be in [0, 1), got {rate}")
    corrupted = 0
    new_examples = []
    for ex in corpus.examples:
        if ex.positive_relations and rng.random() < rate:
            gold = ex.gold_positive_relations
            if gold is None:
                gold = ex.positive_relations
            new_examples.append(
                replace(ex, positive_relations=frozenset(), gold_positive_relations=gold)
            )
            corrupted += 1
        else:
            new_examples.append(ex)
    out = Corpus(
        vocabulary=corpus.vocabulary,
        examples=tuple(new_examples),
        label_source=LabelSource.ORIGINAL,
        embedding_dim=corpus.embedding_dim,
    )
    return out, corrupted


def hide_fact_pairs(
    corpus: Corpus, hidden: frozenset[tuple[int, int]]
) -> tuple[Corpus, int]:
    """Relabel as NA every positive example whose (head, tail) pair is hidden.

    Models a systematic annotation gap: a missing fact is missing wherever
    it occurs, so corruption is correlated across splits that share the
    hidden set. Gold labels are preserved.
    """
    corrupted = 0
    new_examples = []
    for ex in corpus.examples:
        if ex.positive_relations and (ex.head_id, ex.tail_id) in hidden:
            gold = ex.gold_positive_relations
            if gold is None:
                gold = ex.positive_relations
            new_examples.append(
                replace(ex, positive_relations=frozenset(), gold_positive_relations=gold)
            )
            corrupted += 1
        else:
            new_examples.append(ex)
    out = Corpus(
        vocabulary=corpus.vocabulary,
        examples=tuple(new_examples),
        label_source=LabelSource.ORIGINAL,
        embedding_dim=corpus.embedding_dim,
    )
    return out, corrupted


def _as_gold(corpus: Corpus) -> Corpus:
    return replace(corpus, label_source=LabelSource.GOLD)


def assemble_regime(
    gold_splits: tuple[Corpus, Corpus, Corpus],
    noise_rate: float,
    kind: str,
    seed: int = 0,
    corruption: str = "example",
) -> Regime:
    """Build a label-source regime from gold splits.

    Each position of the kind string says where that split's labels come
    from: O = original/noisy, G = gold. The gold train split is never used
    for O-regimes' training; the corrupted variant is.

    ``corruption`` picks the noise model for O splits: ``example`` drops
    each positive example's labels independently (independent streams per
    split), while ``fact`` hides a sampled set of (head, tail) fact pairs
    consistently across all O splits, mimicking an annotation process that
    misses the same facts in train and dev.
    """
    if kind not in REGIME_KINDS or kind == "custom":
        raise ConfigError(f"unknown regime kind {kind!r}")
    if corruption not in CORRUPTION_MODES:
        raise ConfigError(
            f"unknown corruption mode {corruption!r}; expected one of {CORRUPTION_MODES}"
        )
    train, dev, test = gold_splits
    if not (
        train.vocabulary.relations == dev.vocabulary.relations == test.vocabulary.relations
    ):
        raise ConfigError("regime splits must share one relation vocabulary")

    hidden: frozenset[tuple[int, int]] = frozenset()
    if corruption == "fact" and noise_rate > 0:
        pairs = sorted(
            {
                (ex.head_id, ex.tail_id)
                for split in gold_splits
                for ex in split.examples
                if ex.positive_relations
            }
        )
        rng = stream(seed, "noise", "facts")
        mask = rng.random(len(pairs)) < noise_rate
        hidden = frozenset(p for p, hide in zip(pairs, mask) if hide)

    def pick(split: Corpus, letter: str, tag: str) -> Corpus:
        if letter == "G":
            return _as_gold(split)
        if corruption == "fact":
            noisy, _ = hide_fact_pairs(split, hidden)
        else:
            noisy, _ = inject_false_negatives(split, noise_rate, stream(seed, "noise", tag))
        return noisy

    return Regime(
        train=pick(train, kind[0], "train"),
        dev=pick(dev, kind[1], "dev"),
        test=pick(test, kind[2], "test"),
        name=kind,
    )


def save_regime(regime: Regime, directory, manifest_extra: dict | None = None) -> None:
    os.makedirs(directory, exist_ok=True)
    save_corpus(regime.train, os.path.join(directory, "train.jsonl"))
    save_corpus(regime.dev, os.path.join(directory, "dev.jsonl"))
    save_corpus(regime.test, os.path.join(directory, "test.jsonl"))
    manifest = {"kind": regime.name}
    manifest.update(manifest_extra or {})
    with open(os.path.join(directory, "regime.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_regime(directory) -> Regime:
    manifest_path = os.path.join(directory, "regime.json")
    if not os.path.exists(manifest_path):
        raise DataFormatError(f"{directory}: missing regime.json")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return Regime(
        train=load_corpus(os.path.join(directory, "train.jsonl")),
        dev=load_corpus(os.path.join(directory, "dev.jsonl")),
        test=load_corpus(os.path.join(directory, "test.jsonl")),
        name=manifest["kind"],
    )
