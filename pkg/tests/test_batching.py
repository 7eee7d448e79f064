import numpy as np
import pytest

from docrel.batching import (
    assemble_batches,
    attach_negative_samples,
    sample_negative_labels,
    sampled_set_size,
)
from docrel.core import RelationVocabulary
from docrel.errors import ConfigError, ContractError
from docrel.rng import stream

from conftest import make_corpus


def corpus_with_docs(label_sets, docs, n_rel=6):
    return make_corpus(label_sets, n_rel=n_rel, docs_of=docs)


class TestAssembleBatches:
    def test_eight_docs_batch_four(self):
        labels = [{0}] * 8
        docs = [f"doc{i}" for i in range(8)]
        corpus = corpus_with_docs(labels, docs)
        batches = assemble_batches(corpus, 4, rng_seed=0)
        assert len(batches) == 2

    def test_same_seed_identical_composition(self):
        labels = [{i % 3} for i in range(12)]
        docs = [f"doc{i // 2}" for i in range(12)]
        corpus = corpus_with_docs(labels, docs)
        a = assemble_batches(corpus, 3, rng_seed=42)
        b = assemble_batches(corpus, 3, rng_seed=42)
        assert [x.example_indices for x in a] == [x.example_indices for x in b]

    def test_documents_stay_whole(self):
        labels = [{0}, {1}, set(), {2}, set(), {0}]
        docs = ["a", "a", "a", "b", "b", "c"]
        corpus = corpus_with_docs(labels, docs)
        for batch in assemble_batches(corpus, 2, rng_seed=1):
            seen_docs = {corpus.examples[i].doc_id for i in batch.example_indices}
            for doc in seen_docs:
                expected = [i for i, ex in enumerate(corpus.examples) if ex.doc_id == doc]
                assert set(expected) <= set(batch.example_indices)

    def test_partition_invariant(self):
        labels = [{0}, set(), {1}, set(), {2}, {0, 1}]
        docs = ["a", "a", "b", "b", "c", "c"]
        corpus = corpus_with_docs(labels, docs)
        for batch in assemble_batches(corpus, 2, rng_seed=3):
            assert set(batch.bp_indices) | set(batch.bn_indices) == set(range(len(batch)))
            assert set(batch.bp_indices) & set(batch.bn_indices) == set()

    def test_empty_corpus(self):
        assert assemble_batches(make_corpus([]), 4, rng_seed=0) == []

    def test_batch_size_validated(self):
        with pytest.raises(ConfigError):
            assemble_batches(make_corpus([{0}]), 1, rng_seed=0)

    def test_default_batch_size_is_four_documents(self):
        from docrel.training import TrainConfig

        assert TrainConfig().batch_size == 4


class TestPositiveSets:
    def test_shared_relation_is_mutual(self):
        corpus = corpus_with_docs([{3}, {3, 1}, set()], ["a", "a", "a"])
        batches = assemble_batches(corpus, 4, rng_seed=0)
        s = batches[0].s_sets
        idx = list(batches[0].example_indices)
        p0, p1 = idx.index(0), idx.index(1)
        assert p1 in s[p0] and p0 in s[p1]

    def test_unique_relation_gets_empty_set(self):
        corpus = corpus_with_docs([{0}, {1}, {2}], ["a", "a", "a"])
        batch = assemble_batches(corpus, 4, rng_seed=0)[0]
        assert all(batch.s_sets[a] == frozenset() for a in batch.bp_indices)

    def test_na_anchor_gets_no_entry(self):
        corpus = corpus_with_docs([{0}, set()], ["a", "a"])
        batch = assemble_batches(corpus, 4, rng_seed=0)[0]
        assert set(batch.s_sets) == set(batch.bp_indices)

    def test_five_example_brute_force(self):
        label_sets = [{0, 2}, {1}, {2}, set(), {1, 3}]
        corpus = corpus_with_docs(label_sets, ["a"] * 5)
        batch = assemble_batches(corpus, 4, rng_seed=0)[0]
        idx = list(batch.example_indices)
        labels = [corpus.examples[i].positive_relations for i in idx]
        for a in batch.bp_indices:
            expected = {
                p for p in range(5) if p != a and labels[p] & labels[a]
            }
            assert batch.s_sets[a] == expected

    def test_symmetry_property(self):
        rng = stream(0, "sym")
        label_sets = [
            set(int(r) for r in rng.choice(6, size=rng.integers(0, 3), replace=False))
            for _ in range(10)
        ]
        corpus = corpus_with_docs(label_sets, ["a"] * 10)
        batch = assemble_batches(corpus, 4, rng_seed=0)[0]
        for a, members in batch.s_sets.items():
            for b in members:
                if b in batch.s_sets:
                    assert a in batch.s_sets[b]


class TestNegativeSampling:
    def vocab96(self):
        return RelationVocabulary.from_relations([f"r{k}" for k in range(96)])

    def test_sample_size_rule(self):
        assert sampled_set_size(1.0, 96) == 96
        assert sampled_set_size(0.1, 96) == 10  # 9.6 rounds half-up to 10
        assert sampled_set_size(0.5, 3) == 2  # 1.5 rounds half-up
        assert sampled_set_size(0.001, 96) == 1  # minimum one label

    def test_full_ratio_returns_every_negative(self):
        corpus = make_corpus([set()], n_rel=96)
        sampled = sample_negative_labels(
            corpus.examples[0], self.vocab96(), 1.0, stream(0, "s")
        )
        assert sampled == tuple(range(96))

    def test_ratio_point_one_gives_ten(self):
        corpus = make_corpus([set()], n_rel=96)
        sampled = sample_negative_labels(
            corpus.examples[0], self.vocab96(), 0.1, stream(0, "s")
        )
        assert len(sampled) == 10
        assert len(set(sampled)) == 10
        assert all(0 <= r < 96 for r in sampled)
        assert list(sampled) == sorted(sampled)

    def test_non_na_anchor_rejected(self):
        corpus = make_corpus([{3}], n_rel=96)
        with pytest.raises(ContractError):
            sample_negative_labels(corpus.examples[0], self.vocab96(), 0.1, stream(0, "s"))

    def test_uniform_inclusion_frequency(self):
        # 10,000 seeded draws at ratio 0.1: every relation's inclusion count
        # within 3 sigma of the binomial expectation 10000 * 10/96
        corpus = make_corpus([set()], n_rel=96)
        vocab = self.vocab96()
        rng = stream(123, "uniformity")
        counts = np.zeros(96, dtype=int)
        draws = 10_000
        for _ in range(draws):
            for r in sample_negative_labels(corpus.examples[0], vocab, 0.1, rng):
                counts[r] += 1
        p = 10.0 / 96.0
        mean = draws * p
        sigma = (draws * p * (1 - p)) ** 0.5
        assert np.all(np.abs(counts - mean) <= 3 * sigma), counts

    def test_attach_negative_samples(self):
        corpus = corpus_with_docs([{0}, set(), set()], ["a", "a", "a"], n_rel=6)
        batch = assemble_batches(corpus, 4, rng_seed=0)[0]
        out = attach_negative_samples(batch, corpus, 0.5, stream(0, "s"))
        assert set(out.sampled_negatives) == set(out.bn_indices)
        for sampled in out.sampled_negatives.values():
            assert len(sampled) == 3  # round-half-up(0.5 * 6)
        assert batch.sampled_negatives == {}  # original untouched
