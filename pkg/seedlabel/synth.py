"""
Synthetic labelled corpora with planted seed words.

Documents are forward-sampled from the model's generative story: each
document picks one or two categories, mixes them with a background topic and
draws every token from the chosen topic. Category topics live on disjoint
vocabulary blocks (optionally leaking into the other blocks), and the most
probable words of each block become its seed words.
"""

from dataclasses import dataclass
from typing import List, Tuple
import json
import logging
import os

import numpy as np
from scipy.stats import chisquare

from seedlabel.config import (
    SYNTH_BACKGROUND_FRACTION,
    SYNTH_CATEGORIES,
    SYNTH_CHISQUARE_ALPHA,
    SYNTH_CONCENTRATION,
    SYNTH_DOC_LENGTH,
    SYNTH_DOCUMENTS,
    SYNTH_MAX_LABELS,
    SYNTH_OVERLAP,
    SYNTH_SEEDS_PER_CATEGORY,
    SYNTH_VOCAB_SIZE,
)
from seedlabel.corpus import RawDocument, SeedConfig
from seedlabel.errors import ConfigError

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a synthetic corpus."""

    categories: int = SYNTH_CATEGORIES
    documents: int = SYNTH_DOCUMENTS
    vocab_size: int = SYNTH_VOCAB_SIZE
    doc_length: int = SYNTH_DOC_LENGTH
    concentration: float = SYNTH_CONCENTRATION
    seeds_per_category: int = SYNTH_SEEDS_PER_CATEGORY
    background_fraction: float = SYNTH_BACKGROUND_FRACTION
    overlap: float = SYNTH_OVERLAP
    max_labels: int = SYNTH_MAX_LABELS
    label_skew: float = 0.0
    rng_seed: int = 1

    def category_prevalence(self) -> np.ndarray:
        """Probability of drawing each category as a label, proportional to 1 / (c + 1) ** label_skew."""
        weights = 1.0 / np.arange(1, self.categories + 1) ** self.label_skew
        return weights / weights.sum()

    @property
    def num_blocks(self) -> int:
        return self.categories + (1 if self.background_fraction > 0 else 0)

    @property
    def block_size(self) -> int:
        return self.vocab_size // self.num_blocks

    def validate(self) -> None:
        """Raise ConfigError when no corpus of this shape can be generated."""
        for name in ("categories", "documents", "doc_length", "seeds_per_category", "max_labels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.concentration <= 0:
            raise ConfigError(f"concentration must be > 0, got {self.concentration}")
        if not 0.0 <= self.background_fraction < 1.0:
            raise ConfigError(f"background_fraction must be in [0, 1), got {self.background_fraction}")
        if self.label_skew < 0:
            raise ConfigError(f"label_skew must be >= 0, got {self.label_skew}")
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.vocab_size < self.categories * self.seeds_per_category:
            raise ConfigError(
                f"vocab_size {self.vocab_size} is below categories x seeds_per_category "
                f"({self.categories * self.seeds_per_category})"
            )
        if self.block_size < self.seeds_per_category:
            raise ConfigError(
                f"Vocabulary blocks of {self.block_size} words cannot hold "
                f"{self.seeds_per_category} seed words each"
            )


@dataclass(frozen=True, eq=False)
class SyntheticCorpus:
    """
    Generated documents, their seed configuration and the planted truth.

    Attributes:
        documents: Raw documents with gold labels
        seeds: Category names and planted seed words (unresolved)
        topic_word: C x V planted category word distributions
        background_word: Planted background distribution over V
        planted_counts: C x V category token counts actually drawn
    """

    documents: List[RawDocument]
    seeds: SeedConfig
    topic_word: np.ndarray
    background_word: np.ndarray
    planted_counts: np.ndarray


def word_name(word_id: int) -> str:
    return f"w{word_id:04d}"


def category_name(c: int) -> str:
    return f"category_{c}"


def _planted_distributions(spec: SyntheticSpec, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    size = spec.block_size
    topic_word = np.zeros((spec.categories, spec.vocab_size))
    for c in range(spec.categories):
        topic_word[c, c * size:(c + 1) * size] = rng.dirichlet(np.ones(size))

    if spec.overlap > 0 and spec.categories > 1:
        blocks = topic_word.copy()
        for c in range(spec.categories):
            others = np.delete(blocks, c, axis=0).mean(axis=0)
            topic_word[c] = (1.0 - spec.overlap) * blocks[c] + spec.overlap * others

    background_word = np.zeros(spec.vocab_size)
    if spec.background_fraction > 0:
        start = spec.categories * size
        background_word[start:start + size] = rng.dirichlet(np.ones(size))
    return topic_word, background_word


def _chisquare_check(planted_counts: np.ndarray, topic_word: np.ndarray) -> None:
    for c in range(topic_word.shape[0]):
        observed = planted_counts[c]
        total = observed.sum()
        support = topic_word[c] > 0
        if total == 0:
            continue
        expected = topic_word[c, support] / topic_word[c, support].sum() * total
        _, p_value = chisquare(observed[support], expected)
        if p_value < SYNTH_CHISQUARE_ALPHA:
            logger.warning(f"{category_name(c)}: drawn tokens deviate from the planted distribution (p={p_value:.2g})")
        else:
            logger.debug(f"{category_name(c)}: chi-square p={p_value:.3f} over {int(total)} tokens")


def generate(spec: SyntheticSpec) -> SyntheticCorpus:
    """
    Forward-sample a labelled corpus.

    Every document gets between 1 and min(max_labels, C) categories. Each
    token is background with probability ``background_fraction``, otherwise
    its category is drawn from a Dirichlet(concentration) mixture over the
    document's labels.

    Args:
        spec: Corpus shape and generator seed

    Returns:
        SyntheticCorpus; identical specs give identical corpora
    """
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    topic_word, background_word = _planted_distributions(spec, rng)
    planted_counts = np.zeros_like(topic_word, dtype=np.int64)
    most_labels = min(spec.max_labels, spec.categories)
    prevalence = spec.category_prevalence()

    documents = []
    for d in range(spec.documents):
        num_labels = int(rng.integers(1, most_labels + 1))
        labels = np.sort(rng.choice(spec.categories, size=num_labels, replace=False, p=prevalence))
        mixture = rng.dirichlet(np.full(num_labels, spec.concentration))
        source_probs = np.concatenate([[spec.background_fraction], (1.0 - spec.background_fraction) * mixture])
        sources = rng.choice(num_labels + 1, size=spec.doc_length, p=source_probs)

        words = np.empty(spec.doc_length, dtype=np.int64)
        for s in range(num_labels + 1):
            positions = np.flatnonzero(sources == s)
            if positions.size == 0:
                continue
            distribution = background_word if s == 0 else topic_word[labels[s - 1]]
            words[positions] = rng.choice(spec.vocab_size, size=positions.size, p=distribution)
            if s > 0:
                planted_counts[labels[s - 1]] += np.bincount(words[positions], minlength=spec.vocab_size)

        documents.append(RawDocument(
            doc_id=f"doc{d:05d}",
            text=" ".join(word_name(w) for w in words),
            labels=[category_name(c) for c in labels],
        ))

    seed_words = []
    for c in range(spec.categories):
        top = np.argsort(-topic_word[c], kind="stable")[:spec.seeds_per_category]
        seed_words.append([word_name(w) for w in top])
    seeds = SeedConfig(categories=[category_name(c) for c in range(spec.categories)], seed_words=seed_words)

    _chisquare_check(planted_counts, topic_word)
    logger.info(
        f"Generated {spec.documents} documents over {spec.vocab_size} words "
        f"for {spec.categories} categories (seed {spec.rng_seed})"
    )
    return SyntheticCorpus(
        documents=documents,
        seeds=seeds,
        topic_word=topic_word,
        background_word=background_word,
        planted_counts=planted_counts,
    )


def write_jsonl(documents: List[RawDocument], path: str) -> None:
    """Write documents in the JSON-lines input format."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for doc in documents:
            record = {"id": doc.doc_id, "text": doc.text}
            if doc.labels is not None:
                record["labels"] = list(doc.labels)
            handle.write(json.dumps(record) + "\n")
    logger.info(f"Wrote {len(documents)} documents to {path}")


def write_seed_file(seeds: SeedConfig, path: str) -> None:
    """Write one ``name: word word ...`` line per category."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for name, words in zip(seeds.categories, seeds.seed_words):
            handle.write(f"{name}: {' '.join(words)}\n")
    logger.info(f"Wrote seed words for {seeds.num_categories} categories to {path}")
