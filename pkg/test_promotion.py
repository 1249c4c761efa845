"""
Tests for the promotion tables:
1. Category promotion from seed presence
2. Word promotion from seed co-occurrence
3. Word promotion from embedding similarity
4. Variant dispatch and validation
"""

import logging

import numpy as np
import pytest

from seedlabel.corpus import Corpus, SeedConfig, seed_presence
from seedlabel.errors import ConfigError, ConsistencyError, DataError
from seedlabel.model import Hyperparams
from seedlabel.promotion import (
    PromotionTables,
    build_category_promotion,
    build_promotion_tables,
    build_word_promotion,
    build_word_promotion_embedding,
    word_promotion_frame,
    write_word_promotion_tsv,
)


def _corpus(docs, vocabulary):
    ids = {word: w for w, word in enumerate(vocabulary)}
    return Corpus(
        documents=[np.array([ids[word] for word in doc], dtype=np.int64) for doc in docs],
        doc_ids=[f"doc{d}" for d in range(len(docs))],
        vocabulary=list(vocabulary),
    )


def _seeds(*seed_lists, vocabulary):
    ids = {word: w for w, word in enumerate(vocabulary)}
    return SeedConfig(
        categories=[f"cat{c}" for c in range(len(seed_lists))],
        seed_words=[list(words) for words in seed_lists],
        seeds=[np.array([ids[word] for word in words]) for words in seed_lists],
    )


def _expected_promotion(relevance, epsilon=0.01):
    """Row shares, floored, columns rescaled to W."""
    relevance = np.asarray(relevance, dtype=float)
    shares = np.zeros_like(relevance)
    for w, row in enumerate(relevance):
        if row.sum() > 0:
            shares[w] = row / row.sum()
    shares = np.maximum(shares, epsilon)
    return shares / shares.sum(axis=0) * relevance.shape[0]


# ============================================================================
# CATEGORY PROMOTION
# ============================================================================

def test_category_promotion_hand_case():
    """C=4, one seeded category, mu=0.3."""
    promo = build_category_promotion(np.array([[1, 0, 0, 0]]), mu=0.3)
    np.testing.assert_allclose(promo[0], [2.1053, 0.6316, 0.6316, 0.6316], atol=5e-5)


def test_category_promotion_zero_mu_restricts_to_seeded_categories():
    promo = build_category_promotion(np.array([[1, 1, 0, 0]]), mu=0.0)
    np.testing.assert_array_equal(promo[0], [2.0, 2.0, 0.0, 0.0])


def test_category_promotion_mu_one_is_uniform():
    indicator = np.random.default_rng(3).integers(0, 2, size=(20, 5))
    np.testing.assert_array_equal(build_category_promotion(indicator, mu=1.0), np.ones((20, 5)))


def test_category_promotion_unseeded_document_with_zero_mu():
    promo = build_category_promotion(np.array([[0, 0, 0]]), mu=0.0)
    np.testing.assert_array_equal(promo[0], [1.0, 1.0, 1.0])


@pytest.mark.parametrize("mu", [0.0, 0.3, 1.0])
def test_category_promotion_rows_sum_to_c(mu):
    """1,000 random indicator rows."""
    rng = np.random.default_rng(11)
    indicator = rng.integers(0, 2, size=(1000, 7))
    promo = build_category_promotion(indicator, mu)

    assert (promo >= 0).all()
    np.testing.assert_allclose(promo.sum(axis=1), 7.0, rtol=0, atol=1e-9)


@pytest.mark.parametrize("mu", [-0.1, 1.5])
def test_category_promotion_rejects_mu(mu):
    with pytest.raises(ConfigError):
        build_category_promotion(np.ones((1, 2)), mu)


# ============================================================================
# WORD PROMOTION (CO-OCCURRENCE)
# ============================================================================

def test_word_promotion_from_cooccurrence():
    """
    w appears in 5 of the 10 documents holding s0 (p = 0.5) and in all 4
    holding s1 (p = 1); seeds co-occur with themselves (p = 1); z never meets
    a seed and gets the epsilon floor everywhere.
    """
    vocabulary = ["s0", "s1", "w", "z"]
    docs = [["s0", "w"]] * 5 + [["s0"]] * 5 + [["s1", "w"]] * 4 + [["z"]]
    corpus = _corpus(docs, vocabulary)
    seeds = _seeds(["s0"], ["s1"], vocabulary=vocabulary)

    promo = build_word_promotion(corpus, seeds, epsilon=0.01)

    relevance = [[1.0, 0.0], [0.0, 1.0], [0.5, 1.0], [0.0, 0.0]]
    np.testing.assert_allclose(promo, _expected_promotion(relevance), rtol=1e-12)
    assert promo[2, 1] > promo[2, 0]


def test_word_promotion_averages_over_seeds():
    """v(w, c) is the mean of p(w|s) over the seeds of c."""
    vocabulary = ["s0", "t0", "s1", "w"]
    docs = [["s0", "w"], ["s0"], ["t0"], ["t0", "w"], ["t0"], ["t0"], ["s1", "w"]]
    corpus = _corpus(docs, vocabulary)
    seeds = _seeds(["s0", "t0"], ["s1"], vocabulary=vocabulary)

    promo = build_word_promotion(corpus, seeds, epsilon=0.01)

    relevance = [
        [(1.0 + 0.0) / 2, 0.0],    # s0
        [(0.0 + 1.0) / 2, 0.0],    # t0
        [0.0, 1.0],                # s1
        [(0.5 + 0.25) / 2, 1.0],   # w
    ]
    np.testing.assert_allclose(promo, _expected_promotion(relevance), rtol=1e-12)


def test_word_promotion_columns_sum_to_w(make_model):
    rng = np.random.default_rng(5)
    for _ in range(20):
        corpus, seeds, _, _, _ = make_model(rng)
        promo = build_word_promotion(corpus, seeds)
        assert (promo > 0).all()
        np.testing.assert_allclose(promo.sum(axis=0), corpus.num_words, rtol=0, atol=1e-6)


def test_word_promotion_rejects_bad_epsilon(politics_corpus, politics_seeds):
    with pytest.raises(ConfigError):
        build_word_promotion(politics_corpus, politics_seeds, epsilon=0.0)


def test_word_promotion_needs_seeds_in_documents():
    vocabulary = ["s0", "s1", "w"]
    corpus = _corpus([["s0", "w"]], vocabulary)
    seeds = _seeds(["s0"], ["s1"], vocabulary=vocabulary)
    with pytest.raises(ConsistencyError):
        build_word_promotion(corpus, seeds)


# ============================================================================
# WORD PROMOTION (EMBEDDINGS)
# ============================================================================

def test_embedding_promotion_cosine_endpoints():
    """cos 1 -> 1, cos -1 -> 0, cos 0 (or no vector) -> 0.5."""
    vocabulary = ["s0", "s1", "a", "b", "c"]
    vectors = {
        "s0": np.array([1.0, 0.0]),
        "s1": np.array([0.0, 2.0]),
        "a": np.array([3.0, 0.0]),
        "b": np.array([-1.0, 0.0]),
    }
    seeds = _seeds(["s0"], ["s1"], vocabulary=vocabulary)

    promo = build_word_promotion_embedding(vectors, seeds, vocabulary, epsilon=0.01)

    relevance = [[1.0, 0.5], [0.5, 1.0], [1.0, 0.5], [0.0, 0.5], [0.5, 0.5]]
    np.testing.assert_allclose(promo, _expected_promotion(relevance), rtol=1e-12)
    np.testing.assert_allclose(promo.sum(axis=0), 5.0, atol=1e-9)


def test_embedding_promotion_drops_seed_without_vector(caplog):
    vocabulary = ["s0", "t0", "s1"]
    vectors = {"s0": np.array([1.0, 0.0]), "s1": np.array([0.0, 1.0])}
    seeds = _seeds(["s0", "t0"], ["s1"], vocabulary=vocabulary)

    with caplog.at_level(logging.WARNING):
        promo = build_word_promotion_embedding(vectors, seeds, vocabulary)
    assert "t0" in caplog.text
    np.testing.assert_allclose(promo.sum(axis=0), 3.0, atol=1e-9)


def test_embedding_promotion_errors():
    vocabulary = ["s0", "s1"]
    seeds = _seeds(["s0"], ["s1"], vocabulary=vocabulary)

    with pytest.raises(DataError):
        build_word_promotion_embedding({"s0": np.array([1.0, 0.0])}, seeds, vocabulary)
    with pytest.raises(DataError):
        build_word_promotion_embedding({}, seeds, vocabulary)
    with pytest.raises(DataError):
        build_word_promotion_embedding(
            {"s0": np.array([1.0, 0.0]), "s1": np.array([1.0, 0.0, 0.0])}, seeds, vocabulary
        )


# ============================================================================
# TABLES
# ============================================================================

def _tables(corpus, seeds, hyper, vectors=None):
    hyper = hyper.resolve(seeds.num_categories)
    return build_promotion_tables(corpus, seeds, seed_presence(corpus, seeds), hyper, vectors)


def test_full_variant_tables(politics_corpus, politics_seeds):
    tables = _tables(politics_corpus, politics_seeds, Hyperparams())

    assert tables.mu == 0.3
    assert tables.cat_promo.shape == (4, 2)
    assert tables.word_promo.shape == (politics_corpus.num_words, 2)
    # d1 holds only a politics seed
    np.testing.assert_allclose(tables.cat_promo[0], [2 / 1.3, 0.6 / 1.3])
    # d4 holds no seed at all
    np.testing.assert_allclose(tables.cat_promo[3], [1.0, 1.0])


def test_no_category_promotion_forces_mu_one(politics_corpus, politics_seeds):
    tables = _tables(politics_corpus, politics_seeds, Hyperparams.for_variant("no-category-promotion"))
    assert tables.mu == 1.0
    np.testing.assert_array_equal(tables.cat_promo, np.ones((4, 2)))


def test_no_word_promotion_fixes_ones(politics_corpus, politics_seeds):
    tables = _tables(politics_corpus, politics_seeds, Hyperparams.for_variant("no-word-promotion"))
    np.testing.assert_array_equal(tables.word_promo, np.ones((politics_corpus.num_words, 2)))


def test_embedding_variant_needs_vectors(politics_corpus, politics_seeds):
    with pytest.raises(ConfigError):
        _tables(politics_corpus, politics_seeds, Hyperparams.for_variant("word-embedding"))


def test_embedding_variant_with_vectors(politics_corpus, politics_seeds):
    rng = np.random.default_rng(2)
    vectors = {word: rng.normal(size=4) for word in politics_corpus.vocabulary}
    tables = _tables(politics_corpus, politics_seeds, Hyperparams.for_variant("word-embedding"), vectors)
    np.testing.assert_allclose(tables.word_promo.sum(axis=0), politics_corpus.num_words, atol=1e-6)


def test_validate_catches_broken_tables():
    with pytest.raises(ConsistencyError):
        PromotionTables(cat_promo=np.array([[1.0, 0.5]]), word_promo=np.ones((2, 2))).validate()
    with pytest.raises(ConsistencyError):
        PromotionTables(cat_promo=np.ones((1, 2)), word_promo=np.array([[1.5, 1.0], [0.4, 1.0]])).validate()
    with pytest.raises(ConsistencyError):
        PromotionTables(cat_promo=np.array([[3.0, -1.0]]), word_promo=np.ones((2, 2))).validate()


def test_word_promotion_dump(tmp_path, politics_corpus, politics_seeds):
    tables = _tables(politics_corpus, politics_seeds, Hyperparams())
    frame = word_promotion_frame(tables, politics_corpus.vocabulary, politics_seeds.categories, top_n=3)

    assert len(frame) == 6
    assert list(frame.columns) == ["word", "category", "promotion"]
    politics_rows = frame[frame["category"] == "politics"]
    assert politics_rows["promotion"].is_monotonic_decreasing

    path = tmp_path / "promo.tsv"
    write_word_promotion_tsv(tables, politics_corpus.vocabulary, politics_seeds.categories, str(path), top_n=3)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "word\tcategory\tpromotion"
