"""
Promotion tables for the seed-guided biased urn sampler.

The category promotion P[d, c] scales how much mass a category assignment
adds to a document's counts; the word promotion P~[w, c] scales how much a
word adds to a category's word counts. Both are computed once before
inference and stay frozen for the whole chain.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional
import logging

import numpy as np
import pandas as pd

from seedlabel.config import EPSILON, MU
from seedlabel.corpus import Corpus, SeedConfig
from seedlabel.errors import ConfigError, ConsistencyError, DataError

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PromotionTables:
    """
    Frozen promotion amounts.

    Attributes:
        cat_promo: D x C matrix, each row sums to C
        word_promo: W x C matrix, each column sums to W
        mu: Promotion for categories without a seed word in the document
        epsilon: Floor on normalised word relevance
    """

    cat_promo: np.ndarray
    word_promo: np.ndarray
    mu: float = MU
    epsilon: float = EPSILON

    def validate(self, row_tol: float = 1e-9, col_tol: float = 1e-6) -> None:
        """Check non-negativity and the row/column normalisations."""
        num_docs, num_categories = self.cat_promo.shape
        num_words = self.word_promo.shape[0]
        if (self.cat_promo < 0).any() or (self.word_promo < 0).any():
            raise ConsistencyError("Promotion tables contain negative entries")
        if num_docs and not np.allclose(self.cat_promo.sum(axis=1), num_categories, rtol=0, atol=row_tol):
            raise ConsistencyError("Category promotion rows do not sum to C")
        if num_words and not np.allclose(self.word_promo.sum(axis=0), num_words, rtol=0, atol=col_tol):
            raise ConsistencyError("Word promotion columns do not sum to W")


def build_category_promotion(indicator: np.ndarray, mu: float) -> np.ndarray:
    """
    Category promotion from seed presence.

    u[d, c] is 1 where document d holds a seed of c and ``mu`` elsewhere;
    rows are rescaled to sum to C. A row of zeros (mu = 0 and no seed in the
    document) falls back to uniform u = 1.

    Args:
        indicator: D x C seed-presence matrix
        mu: Value in [0, 1]

    Returns:
        D x C float64 matrix
    """
    if not 0.0 <= mu <= 1.0:
        raise ConfigError(f"mu must be in [0, 1], got {mu}")

    indicator = np.asarray(indicator, dtype=bool)
    num_categories = indicator.shape[1]
    u = np.where(indicator, 1.0, mu)
    totals = u.sum(axis=1)
    degenerate = totals == 0
    if degenerate.any():
        logger.debug(f"{int(degenerate.sum())} document(s) without seeds use uniform category promotion")
        u[degenerate] = 1.0
        totals[degenerate] = num_categories
    return u * (num_categories / totals)[:, None]


def _normalise_relevance(relevance: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-word normalisation across categories, floored at epsilon, then columns scaled to W."""
    num_words = relevance.shape[0]
    totals = relevance.sum(axis=1, keepdims=True)
    shares = np.divide(relevance, totals, out=np.zeros_like(relevance), where=totals > 0)
    shares = np.maximum(shares, epsilon)
    return shares / shares.sum(axis=0, keepdims=True) * num_words


def build_word_promotion(corpus: Corpus, seeds: SeedConfig, epsilon: float = EPSILON) -> np.ndarray:
    """
    Word promotion from document co-occurrence with the seed words.

    p(w|s) = df(w, s) / df(s); v(w, c) averages p(w|s) over the seeds of c.

    Args:
        corpus: Preprocessed corpus
        seeds: Resolved seed configuration
        epsilon: Positive floor on normalised relevance

    Returns:
        W x C float64 matrix
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")

    incidence = corpus.df_index
    df = corpus.document_frequency
    relevance = np.zeros((corpus.num_words, seeds.num_categories))
    for c, ids in enumerate(seeds.seeds):
        if (df[ids] == 0).any():
            raise ConsistencyError(f"Seed of category '{seeds.categories[c]}' occurs in no document")
        co_occurrence = (incidence.T @ incidence[:, ids]).toarray()
        relevance[:, c] = (co_occurrence / df[ids]).mean(axis=1)
    return _normalise_relevance(relevance, epsilon)


def build_word_promotion_embedding(
    vectors: Dict[str, np.ndarray],
    seeds: SeedConfig,
    vocabulary: List[str],
    epsilon: float = EPSILON
) -> np.ndarray:
    """
    Word promotion from embedding similarity: p(w|s) = (cos(s, w) + 1) / 2.

    Vocabulary words without a vector score cosine 0. Seeds without a vector
    are dropped with a warning.

    Args:
        vectors: Word to vector table
        seeds: Resolved seed configuration
        vocabulary: Corpus vocabulary in id order
        epsilon: Positive floor on normalised relevance

    Returns:
        W x C float64 matrix
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    if not vectors:
        raise DataError("Word vector table is empty")

    dimension = len(next(iter(vectors.values())))
    unit = np.zeros((len(vocabulary), dimension))
    covered = np.zeros(len(vocabulary), dtype=bool)
    for w, word in enumerate(vocabulary):
        vector = vectors.get(word)
        if vector is None:
            continue
        if len(vector) != dimension:
            raise DataError(f"Vector for '{word}' has dimension {len(vector)}, expected {dimension}")
        norm = np.linalg.norm(vector)
        if norm > 0:
            unit[w] = vector / norm
        covered[w] = True
    logger.info(f"Word vectors cover {int(covered.sum())}/{len(vocabulary)} vocabulary words")

    relevance = np.zeros((len(vocabulary), seeds.num_categories))
    for c, ids in enumerate(seeds.seeds):
        kept = [s for s in ids if covered[s]]
        for s in ids:
            if not covered[s]:
                logger.warning(
                    f"Seed word '{vocabulary[s]}' of category '{seeds.categories[c]}' "
                    f"has no vector; dropped from word promotion"
                )
        if not kept:
            raise DataError(f"Category '{seeds.categories[c]}' has no seed word with a vector")
        cosine = np.clip(unit @ unit[kept].T, -1.0, 1.0)
        relevance[:, c] = ((cosine + 1.0) / 2.0).mean(axis=1)
    return _normalise_relevance(relevance, epsilon)


def build_promotion_tables(
    corpus: Corpus,
    seeds: SeedConfig,
    indicator: np.ndarray,
    hyper,
    vectors: Optional[Dict[str, np.ndarray]] = None
) -> PromotionTables:
    """
    Build both tables for the variant selected by ``hyper``.

    Category promotion switched off forces mu = 1; word promotion mode
    ``none`` fixes P~ to 1.
    """
    mu = hyper.mu if hyper.category_promotion else 1.0
    cat_promo = build_category_promotion(indicator, mu)

    if hyper.word_promotion == "cooccurrence":
        word_promo = build_word_promotion(corpus, seeds, hyper.epsilon)
    elif hyper.word_promotion == "embedding":
        if vectors is None:
            raise ConfigError("Embedding word promotion needs a word vector table")
        word_promo = build_word_promotion_embedding(vectors, seeds, corpus.vocabulary, hyper.epsilon)
    elif hyper.word_promotion == "none":
        word_promo = np.ones((corpus.num_words, seeds.num_categories))
    else:
        raise ConfigError(f"Unknown word promotion mode: {hyper.word_promotion}")

    tables = PromotionTables(cat_promo=cat_promo, word_promo=word_promo, mu=mu, epsilon=hyper.epsilon)
    tables.validate()
    logger.info(f"Built promotion tables (mu={mu}, word promotion={hyper.word_promotion})")
    return tables


def word_promotion_frame(
    tables: PromotionTables,
    vocabulary: List[str],
    categories: List[str],
    top_n: int = 20
) -> pd.DataFrame:
    """Top-N promoted words per category as a (word, category, promotion) frame."""
    rows = []
    for c, name in enumerate(categories):
        column = tables.word_promo[:, c]
        for w in np.argsort(-column, kind="stable")[:top_n]:
            rows.append({"word": vocabulary[w], "category": name, "promotion": float(column[w])})
    return pd.DataFrame(rows, columns=["word", "category", "promotion"])


def write_word_promotion_tsv(
    tables: PromotionTables,
    vocabulary: List[str],
    categories: List[str],
    path: str,
    top_n: int = 20
) -> None:
    """Dump the top promoted words per category for debugging."""
    word_promotion_frame(tables, vocabulary, categories, top_n).to_csv(path, sep="\t", index=False)
    logger.info(f"Wrote word promotion dump to {path}")
