import numpy as np
import pytest

from docrel.core import Corpus, LabelSource, Mention, PairExample, RelationVocabulary


def make_example(doc, h, t, labels, dim=4, gold=None, seed=0):
    rng = np.random.default_rng(seed + h * 31 + t)
    return PairExample(
        doc_id=doc,
        head_id=h,
        tail_id=t,
        head_mentions=(Mention(h, rng.normal(size=dim)),),
        tail_mentions=(Mention(t, rng.normal(size=dim)),),
        context=rng.normal(size=dim),
        positive_relations=frozenset(labels),
        gold_positive_relations=frozenset(gold) if gold is not None else frozenset(labels),
    )


def make_corpus(label_sets, n_rel=4, dim=4, docs_of=None, source=LabelSource.GOLD):
    """A corpus with one example per label set; entity ids 2i / 2i+1."""
    vocab = RelationVocabulary.from_relations([f"r{k}" for k in range(n_rel)])
    examples = tuple(
        make_example(
            docs_of[i] if docs_of else f"doc{i}",
            2 * i,
            2 * i + 1,
            labels,
            dim=dim,
        )
        for i, labels in enumerate(label_sets)
    )
    return Corpus(vocabulary=vocab, examples=examples, label_source=source, embedding_dim=dim)


@pytest.fixture
def small_corpus():
    return make_corpus([{0}, {1, 2}, set(), {0, 3}, set()])
