"""
Tests for the model state:
1. Hyperparameters and variants
2. Initial state and count tables
3. Posterior estimates and top words
4. Checkpoints
"""

import json

import numpy as np
import pytest

from seedlabel.corpus import Corpus, SeedConfig, resolve_seeds, seed_presence
from seedlabel.errors import CheckpointMismatchError, ConfigError, ConsistencyError, DataError
from seedlabel.model import (
    Hyperparams,
    ModelState,
    check_consistency,
    compute_counts,
    estimate,
    init_state,
    load_checkpoint,
    recount,
    restore_rng,
    restore_state,
    save_checkpoint,
    top_words,
)
from seedlabel.promotion import PromotionTables, build_promotion_tables
from seedlabel.sampler import run_iteration


# ============================================================================
# HYPERPARAMETERS
# ============================================================================

def test_defaults():
    hyper = Hyperparams()
    assert (hyper.mu, hyper.pi, hyper.p, hyper.q) == (0.3, 1.0, 1.0, 1.0)
    assert (hyper.beta0, hyper.beta1, hyper.gamma1) == (0.01, 0.01, 1e-7)
    assert (hyper.iterations, hyper.runs) == (100, 10)
    assert hyper.gamma0 is None


def test_resolve_sets_gamma0_from_c():
    assert Hyperparams().resolve(20).gamma0 == pytest.approx(2.5)
    assert Hyperparams(gamma0=3.0).resolve(20).gamma0 == 3.0


@pytest.mark.parametrize("overrides", [
    {"mu": 1.2},
    {"pi": 0.0},
    {"beta1": -0.01},
    {"gamma1": 0.1},
    {"runs": 0},
    {"iterations": -1},
    {"word_promotion": "glove"},
    {"alpha_form": "other"},
    {"top_k": 0},
])
def test_validate_rejects(overrides):
    with pytest.raises(ConfigError):
        Hyperparams(**overrides).resolve(3)


def test_unresolved_gamma0_fails_validation():
    with pytest.raises(ConfigError):
        Hyperparams().validate()


@pytest.mark.parametrize("variant, field, value", [
    ("full", "sparsity", True),
    ("no-sparsity", "sparsity", False),
    ("no-category-promotion", "category_promotion", False),
    ("no-word-promotion", "word_promotion", "none"),
    ("word-embedding", "word_promotion", "embedding"),
])
def test_variants(variant, field, value):
    assert getattr(Hyperparams.for_variant(variant), field) == value


def test_variant_overrides_and_unknown():
    assert Hyperparams.for_variant("no-sparsity", top_k=500).top_k == 500
    with pytest.raises(ConfigError):
        Hyperparams.for_variant("no-background")


def test_hyperparams_dict_round_trip():
    hyper = Hyperparams.for_variant("no-sparsity", top_k=4).resolve(3)
    assert Hyperparams.from_dict(json.loads(json.dumps(hyper.to_dict()))) == hyper


# ============================================================================
# STATE AND COUNTS
# ============================================================================

def _initial(corpus, seeds, hyper=None, seed=0):
    hyper = (hyper or Hyperparams()).resolve(seeds.num_categories)
    indicator = seed_presence(corpus, seeds)
    promos = build_promotion_tables(corpus, seeds, indicator, hyper)
    state = init_state(corpus, seeds, indicator, promos, hyper, np.random.default_rng(seed))
    return state, promos, hyper, indicator


def test_init_state(politics_corpus, politics_seeds):
    state, promos, _, indicator = _initial(politics_corpus, politics_seeds)

    assert state.n0 + state.n1 == politics_corpus.total_tokens
    assert state.alpha.tolist() == [[1, 1]] * 4
    assert state.alpha_count.tolist() == [2] * 4
    assert ((state.z == -1) == (state.x == 0)).all()
    check_consistency(state, promos)

    # category tokens of seeded documents land on seeded categories
    docs = state.doc_index()
    for t in np.flatnonzero(state.x == 1):
        seeded = np.flatnonzero(indicator[docs[t]])
        if seeded.size:
            assert state.z[t] in seeded


def test_init_state_skips_empty_documents(politics_seeds):
    corpus = Corpus(
        documents=[np.array([0, 1, 2]), np.array([], dtype=np.int64), np.array([1, 1])],
        doc_ids=["a", "b", "c"],
        vocabulary=["senate", "python", "budget"],
    )
    seeds = resolve_seeds(SeedConfig(["politics", "programming"], [["senate"], ["python"]]), corpus)
    state, promos, _, _ = _initial(corpus, seeds)

    assert state.offsets.tolist() == [0, 3, 3, 5]
    assert state.n_dc[1].tolist() == [0.0, 0.0]
    assert state.n_d_dot[1] == 0.0
    assert state.n0 + state.n1 == 5


def test_init_state_unit_increments_without_category_promotion(politics_corpus, politics_seeds):
    hyper = Hyperparams.for_variant("no-category-promotion")
    state, _, _, _ = _initial(politics_corpus, politics_seeds, hyper, seed=4)

    docs = state.doc_index()
    category_tokens = np.bincount(docs[state.x == 1], minlength=state.num_documents)
    np.testing.assert_array_equal(state.n_dc.sum(axis=1), category_tokens)


def test_single_category_token_adds_promotion_amounts():
    promos = PromotionTables(
        cat_promo=np.array([[1.5, 0.5]]),
        word_promo=np.array([[0.7, 1.2], [1.3, 0.8]]),
    )
    state = ModelState(
        words=np.array([1]),
        offsets=np.array([0, 1]),
        num_words=2,
        num_categories=2,
        z=np.array([0]),
        x=np.array([1], dtype=np.int8),
        alpha=np.ones((1, 2), dtype=np.int8),
        alpha_count=np.array([2]),
    )
    recount(state, promos)

    assert state.n_dc[0].tolist() == [1.5, 0.0]
    assert state.n_cw[0].tolist() == [0.0, 1.3]
    assert state.n_c.tolist() == [1.3, 0.0]
    assert (state.n0, state.n1) == (0.0, 1.0)


def test_counts_stay_consistent_over_iterations(politics_corpus, politics_seeds):
    state, promos, hyper, _ = _initial(politics_corpus, politics_seeds)
    rng = np.random.default_rng(9)
    for _ in range(10):
        run_iteration(state, promos, hyper, rng)
        check_consistency(state, promos)
        assert state.n0 + state.n1 == state.total_tokens
        assert abs(state.n0_w.sum() - state.n0) < 1e-9
    assert state.iterations_completed == 10


def test_check_consistency_detects_drift(politics_corpus, politics_seeds):
    state, promos, _, _ = _initial(politics_corpus, politics_seeds)
    state.n_cw[0, 0] += 0.5
    with pytest.raises(ConsistencyError, match="n_cw"):
        check_consistency(state, promos)

    recount(state, promos)
    check_consistency(state, promos)

    state.alpha[0, 0] = 0
    with pytest.raises(ConsistencyError, match="alpha_count"):
        check_consistency(state, promos)


def test_compute_counts_matches_brute_force(make_model):
    rng = np.random.default_rng(21)
    for _ in range(10):
        _, _, promos, _, state = make_model(rng)
        counts = compute_counts(state, promos)
        n_dc = np.zeros_like(counts.n_dc)
        n_cw = np.zeros_like(counts.n_cw)
        for d in range(state.num_documents):
            for t in range(state.offsets[d], state.offsets[d + 1]):
                if state.x[t] == 1:
                    c, w = state.z[t], state.words[t]
                    n_dc[d, c] += promos.cat_promo[d, c]
                    n_cw[c, w] += promos.word_promo[w, c]
        np.testing.assert_allclose(counts.n_dc, n_dc, rtol=1e-12)
        np.testing.assert_allclose(counts.n_cw, n_cw, rtol=1e-12)


# ============================================================================
# ESTIMATES
# ============================================================================

def _empty_state(num_docs=2, num_categories=3, num_words=4):
    return ModelState(
        words=np.zeros(0, dtype=np.int64),
        offsets=np.zeros(num_docs + 1, dtype=np.int64),
        num_words=num_words,
        num_categories=num_categories,
        z=np.zeros(0, dtype=np.int64),
        x=np.zeros(0, dtype=np.int8),
        alpha=np.ones((num_docs, num_categories), dtype=np.int8),
        alpha_count=np.full(num_docs, num_categories),
        n0_w=np.zeros(num_words),
        n_cw=np.zeros((num_categories, num_words)),
        n_c=np.zeros(num_categories),
        n_dc=np.zeros((num_docs, num_categories)),
        n_d_dot=np.zeros(num_docs),
    )


def test_estimates_at_zero_counts():
    estimates = estimate(_empty_state(), Hyperparams().resolve(3))

    np.testing.assert_allclose(estimates.theta, 1 / 3)
    np.testing.assert_allclose(estimates.phi, 1 / 4)
    np.testing.assert_allclose(estimates.phi0, 1 / 4)
    assert estimates.lambda_hat == 0.5


def test_lambda_with_equal_switch_counts():
    state = _empty_state()
    state.n0 = state.n1 = 7.0
    assert estimate(state, Hyperparams().resolve(3)).lambda_hat == pytest.approx(0.5)


def test_estimate_rows_are_distributions(politics_corpus, politics_seeds):
    state, promos, hyper, _ = _initial(politics_corpus, politics_seeds)
    run_iteration(state, promos, hyper, np.random.default_rng(1))
    estimates = estimate(state, hyper)

    np.testing.assert_allclose(estimates.phi.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(estimates.theta.sum(axis=1), 1.0, atol=1e-9)
    assert estimates.phi0.sum() == pytest.approx(1.0, abs=1e-9)
    assert (estimates.phi > 0).all() and (estimates.theta > 0).all()
    assert 0.0 < estimates.lambda_hat < 1.0


def test_theta_mass_on_unselected_categories_is_negligible():
    hyper = Hyperparams().resolve(3)
    state = _empty_state(num_docs=1)
    state.alpha[0] = [1, 0, 0]
    state.n_dc[0] = [4.0, 2.0, 0.0]

    theta = estimate(state, hyper).theta[0]
    assert theta[1:].sum() <= 3 * hyper.gamma1 / hyper.gamma0


def test_top_words_order_and_ties():
    state = _empty_state(num_words=4)
    estimates = estimate(state, Hyperparams().resolve(3))
    vocabulary = ["senate", "python", "budget", "ruby"]

    assert [word for word, _ in top_words(estimates, vocabulary, 0, 2)] == ["senate", "python"]
    assert sorted(word for word, _ in top_words(estimates, vocabulary, 0, 4)) == sorted(vocabulary)

    state.n_cw[1, 2] = 5.0
    state.n_c[1] = 5.0
    best = top_words(estimate(state, Hyperparams().resolve(3)), vocabulary, 1, 1)
    assert best[0][0] == "budget"
    assert best[0][1] == pytest.approx((5.0 + 0.01) / (5.0 + 4 * 0.01))


@pytest.mark.parametrize("n", [0, 5])
def test_top_words_rejects_n(n):
    estimates = estimate(_empty_state(num_words=4), Hyperparams().resolve(3))
    with pytest.raises(ConfigError):
        top_words(estimates, ["a", "b", "c", "d"], 0, n)


# ============================================================================
# CHECKPOINTS
# ============================================================================

def test_checkpoint_restores_state(tmp_path, politics_corpus, politics_seeds):
    state, promos, hyper, _ = _initial(politics_corpus, politics_seeds)
    rng = np.random.default_rng(3)
    for _ in range(3):
        run_iteration(state, promos, hyper, rng)
    path = str(tmp_path / "run_00.npz")

    save_checkpoint(path, state, promos, hyper, politics_corpus, politics_seeds,
                    run_index=0, rng_state=rng.bit_generator.state)
    checkpoint = load_checkpoint(path)
    restored = restore_state(checkpoint, politics_corpus, politics_seeds)

    assert checkpoint.hyper == hyper
    assert checkpoint.categories == ["politics", "programming"]
    assert checkpoint.run_index == 0
    assert restored.iterations_completed == 3
    np.testing.assert_array_equal(restored.z, state.z)
    np.testing.assert_array_equal(restored.x, state.x)
    np.testing.assert_array_equal(restored.alpha, state.alpha)
    np.testing.assert_array_equal(restored.alpha_count, state.alpha_count)
    np.testing.assert_allclose(restored.n_dc, state.n_dc, rtol=1e-9)
    np.testing.assert_allclose(restored.n_cw, state.n_cw, rtol=1e-9)
    np.testing.assert_array_equal(checkpoint.promos.cat_promo, promos.cat_promo)

    resumed = restore_rng(checkpoint)
    assert resumed.random() == rng.random()


def test_checkpoint_without_rng_state(tmp_path, politics_corpus, politics_seeds):
    state, promos, hyper, _ = _initial(politics_corpus, politics_seeds)
    path = str(tmp_path / "run_00.npz")
    save_checkpoint(path, state, promos, hyper, politics_corpus, politics_seeds)
    assert restore_rng(load_checkpoint(path)) is None


def test_checkpoint_rejects_other_corpus_or_seeds(tmp_path, politics_corpus, politics_seeds):
    state, promos, hyper, _ = _initial(politics_corpus, politics_seeds)
    path = str(tmp_path / "run_00.npz")
    save_checkpoint(path, state, promos, hyper, politics_corpus, politics_seeds)
    checkpoint = load_checkpoint(path)

    other_corpus = Corpus(
        documents=politics_corpus.documents[:3],
        doc_ids=politics_corpus.doc_ids[:3],
        vocabulary=politics_corpus.vocabulary,
    )
    with pytest.raises(CheckpointMismatchError):
        restore_state(checkpoint, other_corpus, politics_seeds)

    other_seeds = resolve_seeds(
        SeedConfig(["politics", "programming"], [["senate"], ["python"]]), politics_corpus
    )
    with pytest.raises(CheckpointMismatchError):
        restore_state(checkpoint, politics_corpus, other_seeds)


def test_load_checkpoint_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_checkpoint(str(tmp_path / "missing.npz"))

    junk = tmp_path / "junk.npz"
    junk.write_bytes(b"definitely not an archive")
    with pytest.raises(DataError):
        load_checkpoint(str(junk))

    foreign = tmp_path / "foreign.npz"
    np.savez_compressed(foreign, z=np.zeros(1), meta=np.array(json.dumps({"format": "other", "version": 1})))
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(str(foreign))
