"""
End-to-end checks on synthetic corpora with planted seed words:
1. Label recovery and time budgets of the full model
2. Variant comparison averaged over generated corpora
3. Convergence of the per-iteration metrics
4. Quick runs of the remaining variants
"""

import os
import time

import numpy as np
import pytest

from conftest import build_synthetic
from seedlabel.classify import default_top_k
from seedlabel.cli import MetricsMonitor, evaluate_outcomes, predict_state
from seedlabel.evaluation import evaluate_predictions
from seedlabel.model import Hyperparams
from seedlabel.sampler import GibbsChain, run_chain, run_chains
from seedlabel.synth import SyntheticSpec

JOBS = min(5, os.cpu_count() or 1)


# ============================================================================
# RECOVERY
# ============================================================================

@pytest.mark.slow
def test_full_model_recovers_planted_labels(synthetic_corpus):
    """Five chains of 100 sweeps on D=200, C=3, inside a minute."""
    corpus, seeds, gold = synthetic_corpus
    started = time.perf_counter()
    outcomes = run_chains(corpus, seeds, Hyperparams(iterations=100, runs=5), jobs=JOBS)
    report = evaluate_outcomes(outcomes, corpus, gold, seeds.categories)
    elapsed = time.perf_counter() - started

    assert report.runs_aggregated == 5
    assert report.macro_f1 >= 0.9
    assert report.macro_auc >= 0.95
    assert elapsed < 60.0


@pytest.mark.slow
def test_single_chain_time_budget(synthetic_corpus):
    """200 documents x 50 tokens x 3 categories x 100 sweeps in under 10 s once compiled."""
    corpus, seeds, _ = synthetic_corpus
    run_chain(corpus, seeds, Hyperparams(iterations=1), 0)

    started = time.perf_counter()
    state = run_chain(corpus, seeds, Hyperparams(iterations=100), 1)
    elapsed = time.perf_counter() - started

    assert state.iterations_completed == 100
    assert elapsed < 10.0


# ============================================================================
# VARIANTS
# ============================================================================

ABLATION_SEEDS = range(5)


@pytest.fixture(scope="module")
def overlapping_corpora():
    """Leaky category blocks with prevalence falling off as 1 / (c + 1), one corpus per generator seed."""
    return [
        build_synthetic(SyntheticSpec(overlap=0.3, label_skew=1.0, rng_seed=100 + seed))
        for seed in ABLATION_SEEDS
    ]


def _macro_f1(corpus, seeds, gold, hyper):
    outcomes = run_chains(corpus, seeds, hyper, jobs=JOBS)
    return evaluate_outcomes(outcomes, corpus, gold, seeds.categories).macro_f1


def _mean_macro_f1(corpora, variant, **settings):
    scores = []
    for corpus, seeds, gold in corpora:
        if variant == "no-sparsity":
            settings = {**settings, "top_k": default_top_k(gold)}
        scores.append(_macro_f1(corpus, seeds, gold, Hyperparams.for_variant(variant, **settings)))
    return float(np.mean(scores))


@pytest.mark.slow
def test_full_model_against_variants(overlapping_corpora):
    """Macro-F1 averaged over five generated corpora: the full model is never behind."""
    settings = {"iterations": 50, "runs": 3}
    full = _mean_macro_f1(overlapping_corpora, "full", **settings)

    for variant in ("no-sparsity", "no-category-promotion", "no-word-promotion"):
        assert full >= _mean_macro_f1(overlapping_corpora, variant, **settings), variant


# ============================================================================
# CONVERGENCE
# ============================================================================

@pytest.mark.slow
def test_metrics_settle(synthetic_corpus):
    """Five chains of 100 sweeps, scored after every sweep and averaged per sweep."""
    corpus, seeds, gold = synthetic_corpus
    traces = []
    for rng_seed in range(5):
        chain = GibbsChain(
            corpus, seeds, Hyperparams(iterations=100), rng_seed,
            monitor=MetricsMonitor(corpus, gold, seeds.categories),
        )
        chain.run()
        assert len(chain.trace) == 100
        assert all(np.isfinite(stats.n1_n0_ratio) for stats in chain.trace)
        traces.append([stats.extra["macro_f1"] for stats in chain.trace])

    f1 = np.mean(traces, axis=0)
    # sweep n sits at index n - 1
    assert f1[99] > f1[1]
    assert abs(f1[99] - f1[49]) < 0.05


# ============================================================================
# OTHER VARIANTS
# ============================================================================

def _short_run(corpus, seeds, gold, hyper, vectors=None):
    outcome = run_chains(corpus, seeds, hyper, vectors)[0]
    predictions = predict_state(outcome.state, outcome.hyper, corpus)
    return evaluate_predictions(predictions, corpus.doc_ids, gold, seeds.categories)


def test_embedding_variant_runs(small_synthetic):
    corpus, seeds, gold = small_synthetic
    rng = np.random.default_rng(0)
    vectors = {word: rng.normal(size=8) for word in corpus.vocabulary}

    report = _short_run(corpus, seeds, gold, Hyperparams.for_variant("word-embedding", iterations=3, runs=1), vectors)
    assert 0.0 <= report.macro_f1 <= 1.0
    assert 0.0 <= report.macro_auc <= 1.0


def test_collapsed_selector_form_runs(small_synthetic):
    corpus, seeds, gold = small_synthetic
    report = _short_run(corpus, seeds, gold, Hyperparams(alpha_form="collapsed", iterations=5, runs=1))
    assert 0.0 <= report.macro_f1 <= 1.0


def test_no_sparsity_keeps_every_selector(small_synthetic):
    corpus, seeds, gold = small_synthetic
    hyper = Hyperparams.for_variant("no-sparsity", iterations=3, runs=1, top_k=default_top_k(gold))
    outcome = run_chains(corpus, seeds, hyper)[0]

    assert (outcome.state.alpha == 1).all()
    predictions = predict_state(outcome.state, outcome.hyper, corpus)
    per_category = np.zeros(seeds.num_categories, dtype=int)
    for prediction in predictions:
        for c in prediction.assigned:
            per_category[c] += 1
    np.testing.assert_array_equal(per_category, hyper.top_k)
