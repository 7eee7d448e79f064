import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docrel.core import (
    Bucket,
    LabelSource,
    RelationVocabulary,
    bucket_relations,
    build_pair_index,
    load_corpus,
    save_corpus,
)
from docrel.errors import ConfigError, DuplicatePairError

from conftest import make_corpus, make_example


class TestRelationVocabulary:
    def test_logit_dimension(self):
        v = RelationVocabulary.from_relations(["a", "b", "c"])
        assert v.num_relations == 3
        assert v.na_index == 3
        assert v.num_logits == 4

    def test_duplicate_relations_rejected(self):
        with pytest.raises(ConfigError):
            RelationVocabulary.from_relations(["a", "a"])

    def test_na_index_must_follow_relations(self):
        with pytest.raises(ConfigError):
            RelationVocabulary(("a", "b"), na_index=1)

    def test_frequency_keys_validated(self):
        with pytest.raises(ConfigError):
            RelationVocabulary.from_relations(["a"], {"zzz": 3})
        with pytest.raises(ConfigError):
            RelationVocabulary.from_relations(["a"], {"a": -1})


class TestPairIndex:
    def test_empty_corpus(self):
        corpus = make_corpus([])
        assert build_pair_index(corpus) == {}

    def test_three_distinct_pairs(self):
        corpus = make_corpus([{0}, {1}, set()])
        index = build_pair_index(corpus)
        assert len(index) == 3

    def test_round_trip(self, small_corpus):
        index = build_pair_index(small_corpus)
        for i, ex in enumerate(small_corpus.examples):
            assert index[(ex.doc_id, ex.head_id, ex.tail_id)] == i

    def test_duplicate_triple_rejected(self):
        from docrel.core import Corpus

        vocab = RelationVocabulary.from_relations(["r0", "r1"])
        examples = (make_example("d", 1, 2, {0}, dim=4), make_example("d", 1, 2, {1}, dim=4))
        corpus = Corpus(vocab, examples, LabelSource.GOLD, 4)
        with pytest.raises(DuplicatePairError) as err:
            build_pair_index(corpus)
        assert err.value.triple == ("d", 1, 2)


class TestBuckets:
    def test_docred_sized_cuts(self):
        freq = {f"r{k}": 1000 - k for k in range(96)}
        v = RelationVocabulary.from_relations([f"r{k}" for k in range(96)], freq)
        buckets = bucket_relations(v, (10, 20))
        sizes = {b: sum(1 for x in buckets.values() if x == b) for b in Bucket}
        assert sizes == {Bucket.HEAD: 10, Bucket.MID: 66, Bucket.TAIL: 20}

    def test_tie_broken_by_index(self):
        v = RelationVocabulary.from_relations(["a", "b", "c"], {"a": 5, "b": 5, "c": 1})
        buckets = bucket_relations(v, (1, 1))
        assert buckets == {0: Bucket.HEAD, 1: Bucket.MID, 2: Bucket.TAIL}

    def test_cuts_exceeding_vocabulary(self):
        v = RelationVocabulary.from_relations([f"r{k}" for k in range(96)])
        with pytest.raises(ConfigError):
            bucket_relations(v, (96, 20))

    @given(
        n=st.integers(3, 40),
        head=st.integers(0, 15),
        tail=st.integers(0, 15),
        data=st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_every_relation_bucketed_once(self, n, head, tail, data):
        if head + tail > n:
            return
        freqs = data.draw(
            st.lists(st.integers(0, 50), min_size=n, max_size=n)
        )
        v = RelationVocabulary.from_relations(
            [f"r{k}" for k in range(n)], {f"r{k}": f for k, f in enumerate(freqs)}
        )
        buckets = bucket_relations(v, (head, tail))
        assert set(buckets) == set(range(n))
        sizes = {b: sum(1 for x in buckets.values() if x == b) for b in Bucket}
        assert sizes[Bucket.HEAD] == head
        assert sizes[Bucket.TAIL] == tail
        assert sizes[Bucket.MID] == n - head - tail


class TestPartition:
    @given(st.sets(st.integers(0, 9), max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_positives_negatives_partition(self, labels):
        corpus = make_corpus([labels], n_rel=10)
        ex = corpus.examples[0]
        neg = ex.negative_relations(corpus.vocabulary)
        assert ex.positive_relations | neg == set(range(10))
        assert ex.positive_relations & neg == frozenset()

    def test_na_example_has_all_relations_negative(self):
        corpus = make_corpus([set()], n_rel=7)
        ex = corpus.examples[0]
        assert ex.is_na
        assert ex.negative_relations(corpus.vocabulary) == frozenset(range(7))


class TestSerialization:
    def test_round_trip(self, small_corpus, tmp_path):
        path = tmp_path / "corpus.jsonl"
        save_corpus(small_corpus, path)
        loaded = load_corpus(path)
        loaded.validate()
        assert loaded.label_source == small_corpus.label_source
        assert loaded.vocabulary.relations == small_corpus.vocabulary.relations
        assert len(loaded.examples) == len(small_corpus.examples)
        for a, b in zip(small_corpus.examples, loaded.examples):
            assert a.positive_relations == b.positive_relations
            assert a.gold_positive_relations == b.gold_positive_relations
            assert np.array_equal(a.context, b.context)
            for ma, mb in zip(a.head_mentions, b.head_mentions):
                assert ma.entity_id == mb.entity_id
                assert np.array_equal(ma.embedding, mb.embedding)

    def test_validate_catches_bad_labels(self):
        from docrel.errors import DocrelError

        bad = make_corpus([{9}], n_rel=4)
        with pytest.raises(DocrelError):
            bad.validate()
