"""
Sampler state and posterior estimates for the seed-guided multi-label topic model.

The state keeps one background topic and C category-topics. Category counts
are real-valued because every category assignment adds its promotion amount
instead of a unit.
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, NamedTuple, Optional, Tuple
import json
import logging
import os
import zipfile

import numpy as np

from seedlabel.config import (
    ALPHA_FORMS,
    BETA0,
    BETA1,
    CHECKPOINT_FORMAT,
    CHECKPOINT_FORMAT_VERSION,
    CONSISTENCY_RTOL,
    EPSILON,
    GAMMA0_NUMERATOR,
    GAMMA1,
    ITERATIONS,
    MU,
    P,
    PI,
    Q,
    RECOUNT_EVERY,
    RNG_SEED,
    RUNS,
    WORD_PROMOTION_MODES,
)
from seedlabel.corpus import Corpus, SeedConfig
from seedlabel.errors import CheckpointMismatchError, ConfigError, ConsistencyError, DataError
from seedlabel.promotion import PromotionTables

# Configure logging
logger = logging.getLogger(__name__)

VARIANTS = ("full", "no-sparsity", "no-category-promotion", "no-word-promotion", "word-embedding")


@dataclass(frozen=True)
class Hyperparams:
    """
    Model and chain settings.

    ``gamma0`` left as None means 50 / C, filled in by :meth:`resolve`.
    """

    mu: float = MU
    pi: float = PI
    p: float = P
    q: float = Q
    beta0: float = BETA0
    beta1: float = BETA1
    gamma0: Optional[float] = None
    gamma1: float = GAMMA1
    epsilon: float = EPSILON
    iterations: int = ITERATIONS
    runs: int = RUNS
    rng_seed: int = RNG_SEED
    sparsity: bool = True
    category_promotion: bool = True
    word_promotion: str = "cooccurrence"
    top_k: Optional[int] = None
    alpha_form: str = "printed"
    recount_every: int = RECOUNT_EVERY

    @classmethod
    def for_variant(cls, variant: str, **overrides) -> "Hyperparams":
        """Hyperparameters with the flags of a named model variant."""
        flags = {
            "full": {},
            "no-sparsity": {"sparsity": False},
            "no-category-promotion": {"category_promotion": False},
            "no-word-promotion": {"word_promotion": "none"},
            "word-embedding": {"word_promotion": "embedding"},
        }
        if variant not in flags:
            raise ConfigError(f"Unknown variant '{variant}' (choose from {', '.join(VARIANTS)})")
        return cls(**{**flags[variant], **overrides})

    def resolve(self, num_categories: int) -> "Hyperparams":
        """Fill in gamma0 = 50 / C when unset and validate."""
        resolved = self if self.gamma0 is not None else replace(
            self, gamma0=GAMMA0_NUMERATOR / num_categories
        )
        resolved.validate()
        return resolved

    def validate(self) -> None:
        """Raise ConfigError on out-of-range settings."""
        if self.gamma0 is None:
            raise ConfigError("gamma0 is unresolved; call resolve(C) first")
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigError(f"mu must be in [0, 1], got {self.mu}")
        for name in ("pi", "p", "q", "beta0", "beta1", "gamma0", "gamma1", "epsilon"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.gamma1 < self.gamma0 / 1000:
            raise ConfigError(f"gamma1 ({self.gamma1}) must be below gamma0/1000 ({self.gamma0 / 1000})")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.word_promotion not in WORD_PROMOTION_MODES:
            raise ConfigError(f"word_promotion must be one of {WORD_PROMOTION_MODES}")
        if self.alpha_form not in ALPHA_FORMS:
            raise ConfigError(f"alpha_form must be one of {ALPHA_FORMS}")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if self.recount_every < 0:
            raise ConfigError(f"recount_every must be >= 0, got {self.recount_every}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Hyperparams":
        return cls(**data)


class CountTables(NamedTuple):
    """Sufficient statistics derived from the assignments."""

    n0: float
    n1: float
    n0_w: np.ndarray
    n_cw: np.ndarray
    n_c: np.ndarray
    n_dc: np.ndarray
    n_d_dot: np.ndarray


@dataclass(eq=False)
class ModelState:
    """
    Token assignments, selectors and count tables of one chain.

    Tokens are stored flat: document d owns ``words[offsets[d]:offsets[d+1]]``.
    ``z`` is -1 for background tokens (x = 0).
    """

    words: np.ndarray
    offsets: np.ndarray
    num_words: int
    num_categories: int
    z: np.ndarray
    x: np.ndarray
    alpha: np.ndarray
    alpha_count: np.ndarray
    n0: float = 0.0
    n1: float = 0.0
    n0_w: np.ndarray = field(default=None, repr=False)
    n_cw: np.ndarray = field(default=None, repr=False)
    n_c: np.ndarray = field(default=None, repr=False)
    n_dc: np.ndarray = field(default=None, repr=False)
    n_d_dot: np.ndarray = field(default=None, repr=False)
    iterations_completed: int = 0

    @property
    def num_documents(self) -> int:
        return len(self.offsets) - 1

    @property
    def total_tokens(self) -> int:
        return int(self.words.size)

    def doc_index(self) -> np.ndarray:
        """Document of every token."""
        return np.repeat(np.arange(self.num_documents), np.diff(self.offsets))

    def set_counts(self, counts: CountTables) -> None:
        self.n0, self.n1 = counts.n0, counts.n1
        self.n0_w, self.n_cw, self.n_c = counts.n0_w, counts.n_cw, counts.n_c
        self.n_dc, self.n_d_dot = counts.n_dc, counts.n_d_dot


@dataclass(frozen=True, eq=False)
class PosteriorEstimates:
    """Smoothed point estimates of the collapsed distributions."""

    phi0: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    lambda_hat: float


def compute_counts(state: ModelState, promos: PromotionTables) -> CountTables:
    """Rebuild every count table from (z, x) and the promotion tables."""
    docs = state.doc_index()
    category = state.x == 1
    cat_words = state.words[category]
    cat_topics = state.z[category]
    cat_docs = docs[category]

    n0_w = np.bincount(state.words[~category], minlength=state.num_words).astype(np.float64)
    n_cw = np.zeros((state.num_categories, state.num_words))
    np.add.at(n_cw, (cat_topics, cat_words), promos.word_promo[cat_words, cat_topics])
    n_dc = np.zeros((state.num_documents, state.num_categories))
    np.add.at(n_dc, (cat_docs, cat_topics), promos.cat_promo[cat_docs, cat_topics])

    n1 = float(category.sum())
    return CountTables(
        n0=float(state.total_tokens) - n1,
        n1=n1,
        n0_w=n0_w,
        n_cw=n_cw,
        n_c=n_cw.sum(axis=1),
        n_dc=n_dc,
        n_d_dot=n_dc.sum(axis=1),
    )


def recount(state: ModelState, promos: PromotionTables) -> ModelState:
    """Replace the incrementally maintained tables with an exact recount."""
    state.set_counts(compute_counts(state, promos))
    return state


def check_consistency(state: ModelState, promos: PromotionTables, rtol: float = CONSISTENCY_RTOL) -> None:
    """
    Verify the state against a fresh recount.

    Raises:
        ConsistencyError: when any table drifts beyond ``rtol`` or a token
            count identity fails
    """
    fresh = compute_counts(state, promos)
    if state.n0 + state.n1 != state.total_tokens:
        raise ConsistencyError(f"n0 + n1 = {state.n0 + state.n1}, expected {state.total_tokens}")
    if state.n0 != fresh.n0 or state.n1 != fresh.n1:
        raise ConsistencyError("Background/category token totals disagree with the assignments")
    for name in ("n0_w", "n_cw", "n_c", "n_dc", "n_d_dot"):
        stored, expected = getattr(state, name), getattr(fresh, name)
        if not np.allclose(stored, expected, rtol=rtol, atol=rtol):
            worst = float(np.max(np.abs(stored - expected)))
            raise ConsistencyError(f"Count table {name} drifted from its recount (max abs diff {worst:.3g})")
    if not np.array_equal(state.alpha_count, state.alpha.sum(axis=1)):
        raise ConsistencyError("alpha_count disagrees with the selector matrix")


def init_state(
    corpus: Corpus,
    seeds: SeedConfig,
    indicator: np.ndarray,
    promos: PromotionTables,
    hyper: Hyperparams,
    rng: np.random.Generator
) -> ModelState:
    """
    Random initial assignments with all selectors on.

    Each token is background or category with equal probability; category
    tokens pick uniformly among the categories whose seeds the document
    contains, or among all categories when it contains none.

    Args:
        corpus: Preprocessed corpus
        seeds: Resolved seed configuration
        indicator: D x C seed presence
        promos: Promotion tables for the fractional increments
        hyper: Resolved hyperparameters
        rng: Chain generator

    Returns:
        ModelState with consistent count tables
    """
    words, offsets = corpus.flat_tokens()
    num_categories = seeds.num_categories
    x = rng.integers(0, 2, size=words.size).astype(np.int8)
    z = np.full(words.size, -1, dtype=np.int64)
    all_categories = np.arange(num_categories)

    for d in range(corpus.num_documents):
        start, end = offsets[d], offsets[d + 1]
        if start == end:
            continue
        candidates = np.flatnonzero(indicator[d])
        if candidates.size == 0:
            candidates = all_categories
        picks = rng.integers(0, candidates.size, size=end - start)
        doc_z = candidates[picks]
        z[start:end] = np.where(x[start:end] == 1, doc_z, -1)

    alpha = np.ones((corpus.num_documents, num_categories), dtype=np.int8)
    state = ModelState(
        words=words,
        offsets=offsets,
        num_words=corpus.num_words,
        num_categories=num_categories,
        z=z,
        x=x,
        alpha=alpha,
        alpha_count=alpha.sum(axis=1).astype(np.int64),
    )
    return recount(state, promos)


def estimate(state: ModelState, hyper: Hyperparams) -> PosteriorEstimates:
    """
    Posterior-mean estimates of phi0, phi, theta and lambda.

    Args:
        state: Chain state
        hyper: Resolved hyperparameters

    Returns:
        PosteriorEstimates whose rows are probability vectors
    """
    num_words = state.num_words
    n0_w = np.maximum(state.n0_w, 0.0)
    n_cw = np.maximum(state.n_cw, 0.0)
    n_dc = np.maximum(state.n_dc, 0.0)

    phi0 = (n0_w + hyper.beta0) / (n0_w.sum() + num_words * hyper.beta0)
    phi = (n_cw + hyper.beta1) / (n_cw.sum(axis=1, keepdims=True) + num_words * hyper.beta1)
    alpha = state.alpha.astype(np.float64)
    weights = alpha * n_dc + alpha * hyper.gamma0 + hyper.gamma1
    theta = weights / weights.sum(axis=1, keepdims=True)
    lambda_hat = (state.n1 + hyper.pi) / (state.n0 + state.n1 + 2 * hyper.pi)
    return PosteriorEstimates(phi0=phi0, phi=phi, theta=theta, lambda_hat=float(lambda_hat))


def top_words(
    estimates: PosteriorEstimates,
    vocabulary: List[str],
    c: int,
    n: int
) -> List[Tuple[str, float]]:
    """Most probable n words of category c; ties go to the lower word id."""
    row = estimates.phi[c]
    if not 1 <= n <= row.size:
        raise ConfigError(f"n must be in [1, {row.size}], got {n}")
    order = np.argsort(-row, kind="stable")[:n]
    return [(vocabulary[w], float(row[w])) for w in order]


# ============================================================================
# CHECKPOINTS
# ============================================================================

@dataclass(frozen=True, eq=False)
class Checkpoint:
    """Assignments, promotion tables and metadata read back from disk."""

    z: np.ndarray
    x: np.ndarray
    alpha: np.ndarray
    promos: PromotionTables
    meta: Dict[str, Any]

    @property
    def hyper(self) -> Hyperparams:
        return Hyperparams.from_dict(self.meta["hyperparams"])

    @property
    def run_index(self) -> int:
        return int(self.meta["run_index"])

    @property
    def categories(self) -> List[str]:
        return list(self.meta["categories"])


def save_checkpoint(
    path: str,
    state: ModelState,
    promos: PromotionTables,
    hyper: Hyperparams,
    corpus: Corpus,
    seeds: SeedConfig,
    run_index: int = 0,
    rng_state: Optional[Dict[str, Any]] = None
) -> None:
    """
    Write assignments, selectors, promotion tables and metadata to a compressed .npz archive.

    Args:
        path: Output file
        state: Chain state
        promos: Promotion tables the chain ran with
        hyper: Resolved hyperparameters
        corpus: Corpus the chain ran on (its content hash is recorded)
        seeds: Resolved seed configuration (its content hash is recorded)
        run_index: Chain number
        rng_state: ``Generator.bit_generator.state`` at the end of the chain
    """
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_FORMAT_VERSION,
        "hyperparams": hyper.to_dict(),
        "corpus_hash": corpus.content_hash(),
        "seeds_hash": seeds.content_hash(),
        "categories": list(seeds.categories),
        "run_index": run_index,
        "iterations_completed": state.iterations_completed,
        "rng_state": rng_state,
        "mu": promos.mu,
        "epsilon": promos.epsilon,
    }
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as handle:
        np.savez_compressed(
            handle,
            z=state.z,
            x=state.x,
            alpha=state.alpha,
            cat_promo=promos.cat_promo,
            word_promo=promos.word_promo,
            meta=np.array(json.dumps(meta)),
        )
    logger.info(f"Saved checkpoint to {path}")


def load_checkpoint(path: str) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    if not os.path.exists(path):
        raise ConfigError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive["meta"]))
            if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_FORMAT_VERSION:
                raise CheckpointMismatchError(f"Unsupported checkpoint format in {path}")
            promos = PromotionTables(
                cat_promo=archive["cat_promo"],
                word_promo=archive["word_promo"],
                mu=float(meta["mu"]),
                epsilon=float(meta["epsilon"]),
            )
            checkpoint = Checkpoint(
                z=archive["z"], x=archive["x"], alpha=archive["alpha"], promos=promos, meta=meta
            )
    except (OSError, KeyError, ValueError, zipfile.BadZipFile) as e:
        raise DataError(f"Cannot read checkpoint {path}: {e}") from e
    return checkpoint


def restore_state(
    checkpoint: Checkpoint,
    corpus: Corpus,
    seeds: SeedConfig,
    promos: Optional[PromotionTables] = None
) -> ModelState:
    """
    Rebuild a ModelState from a checkpoint.

    Counts are recomputed with ``promos``, or with the tables stored in the
    checkpoint when none are given.

    Raises:
        CheckpointMismatchError: when the checkpoint was trained on another
            corpus or seed set
    """
    if checkpoint.meta["corpus_hash"] != corpus.content_hash():
        raise CheckpointMismatchError("Checkpoint was trained on a different corpus")
    if checkpoint.meta["seeds_hash"] != seeds.content_hash():
        raise CheckpointMismatchError("Checkpoint was trained with a different seed configuration")

    words, offsets = corpus.flat_tokens()
    if checkpoint.z.size != words.size:
        raise CheckpointMismatchError("Checkpoint token count does not match the corpus")
    alpha = checkpoint.alpha.astype(np.int8)
    state = ModelState(
        words=words,
        offsets=offsets,
        num_words=corpus.num_words,
        num_categories=seeds.num_categories,
        z=checkpoint.z.astype(np.int64),
        x=checkpoint.x.astype(np.int8),
        alpha=alpha,
        alpha_count=alpha.sum(axis=1).astype(np.int64),
        iterations_completed=int(checkpoint.meta.get("iterations_completed", 0)),
    )
    return recount(state, promos if promos is not None else checkpoint.promos)


def restore_rng(checkpoint: Checkpoint) -> Optional[np.random.Generator]:
    """Generator positioned where the checkpointed chain stopped, if recorded."""
    saved = checkpoint.meta.get("rng_state")
    if saved is None:
        return None
    bit_generator = getattr(np.random, saved["bit_generator"])()
    bit_generator.state = saved
    return np.random.Generator(bit_generator)
