"""
Shared pytest fixtures for the seedlabel test suite.

Usage:
    pytest                 # everything
    pytest -m "not slow"   # skip the long acceptance runs
"""

from typing import List, Tuple

import numpy as np
import pytest

from seedlabel.corpus import (
    Corpus,
    PreprocessOptions,
    RawDocument,
    SeedConfig,
    gold_matrix,
    preprocess,
    resolve_seeds,
    seed_presence,
)
from seedlabel.model import Hyperparams, init_state
from seedlabel.promotion import build_promotion_tables
from seedlabel.synth import SyntheticSpec, generate


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")


# ============================================================================
# HAND-BUILT CORPUS
# ============================================================================

POLITICS_DOCS = [
    RawDocument("d1", "The senate passed the government budget", ["politics"]),
    RawDocument("d2", "Python and ruby code for javascript fans", ["programming"]),
    RawDocument("d3", "Senate hearing on python government code", ["politics", "programming"]),
    RawDocument("d4", "Sunny weather today and sunny tomorrow", ["politics"]),
]


@pytest.fixture
def open_options() -> PreprocessOptions:
    """A handful of stopwords, no rare-word cut."""
    return PreprocessOptions(stopwords=frozenset({"the", "and", "for", "on"}), min_token_len=3, min_df=1)


@pytest.fixture
def politics_corpus(open_options) -> Corpus:
    return preprocess(POLITICS_DOCS, open_options)


@pytest.fixture
def politics_seeds(politics_corpus) -> SeedConfig:
    config = SeedConfig(
        categories=["politics", "programming"],
        seed_words=[
            ["politics", "government", "political", "democracy", "senate"],
            ["programming", "php", "javascript", "python", "ruby"],
        ],
    )
    return resolve_seeds(config, politics_corpus)


# ============================================================================
# SYNTHETIC CORPUS
# ============================================================================

def build_synthetic(spec: SyntheticSpec) -> Tuple[Corpus, SeedConfig, np.ndarray]:
    """Generate, preprocess without filters and resolve seeds."""
    synthetic = generate(spec)
    corpus = preprocess(
        synthetic.documents,
        PreprocessOptions(stopwords=frozenset(), min_token_len=1, min_df=1),
    )
    seeds = resolve_seeds(synthetic.seeds, corpus)
    return corpus, seeds, gold_matrix(corpus, seeds)


@pytest.fixture(scope="session")
def synthetic_corpus() -> Tuple[Corpus, SeedConfig, np.ndarray]:
    """D=200, C=3, W=60, 50 tokens per document, 3 seeds per category, 40% background."""
    return build_synthetic(SyntheticSpec())


@pytest.fixture(scope="session")
def small_synthetic() -> Tuple[Corpus, SeedConfig, np.ndarray]:
    """A 50-document corpus for quick chains."""
    return build_synthetic(SyntheticSpec(documents=50, doc_length=20, rng_seed=7))


# ============================================================================
# RANDOM SMALL MODELS
# ============================================================================

def random_model(rng: np.random.Generator, hyper: Hyperparams = None):
    """
    A random corpus with D <= 5, C <= 3, W <= 10, seeds, promotions and an
    initialised state.

    Returns:
        (corpus, seeds, promos, hyper, state)
    """
    num_docs = int(rng.integers(1, 6))
    num_categories = int(rng.integers(2, 4))
    num_words = int(rng.integers(num_categories, 11))

    documents: List[np.ndarray] = [
        rng.integers(0, num_words, size=int(rng.integers(1, 9))) for _ in range(num_docs)
    ]
    # every word id appears somewhere so every seed has df > 0
    documents[0] = np.concatenate([documents[0], np.arange(num_words)])
    corpus = Corpus(
        documents=documents,
        doc_ids=[f"doc{d}" for d in range(num_docs)],
        vocabulary=[f"word{w}" for w in range(num_words)],
    )

    seed_ids = rng.permutation(num_words)[:num_categories]
    seeds = SeedConfig(
        categories=[f"cat{c}" for c in range(num_categories)],
        seed_words=[[f"word{w}"] for w in seed_ids],
        seeds=[np.array([w]) for w in seed_ids],
    )

    hyper = (hyper or Hyperparams()).resolve(num_categories)
    indicator = seed_presence(corpus, seeds)
    promos = build_promotion_tables(corpus, seeds, indicator, hyper)
    state = init_state(corpus, seeds, indicator, promos, hyper, rng)
    return corpus, seeds, promos, hyper, state


@pytest.fixture
def make_model():
    """Factory fixture around :func:`random_model`."""
    return random_model
