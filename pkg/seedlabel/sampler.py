"""
Seed-guided biased urn Gibbs sampler.

One iteration resamples the (switch, category) pair of every token with the
promoted fractional counts, then resamples every category selector. Chains
are strictly sequential; independent chains run in parallel processes.

The sweeps are compiled with numba over the flat token arrays and count
tables of :class:`ModelState`. The per-token and per-selector functions
below call the same compiled kernels one step at a time.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union
import logging
import math

import numba
import numpy as np

from seedlabel.config import NEGATIVE_COUNT_TOLERANCE
from seedlabel.corpus import Corpus, SeedConfig, seed_presence
from seedlabel.errors import ConsistencyError
from seedlabel.model import (
    Checkpoint,
    Hyperparams,
    ModelState,
    check_consistency,
    init_state,
    recount,
    restore_rng,
    restore_state,
)
from seedlabel.promotion import PromotionTables, build_promotion_tables

# Configure logging
logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]

# Kernel status codes
_OK = 0
_NEGATIVE_COUNT = 1
_INVALID_WEIGHTS = 2


# ============================================================================
# COMPILED KERNELS
# ============================================================================

@numba.njit(cache=True)
def _settle(value, tolerance):
    # small negatives from fractional round-off become 0; larger ones are left for the caller
    if value < 0.0 and value >= -tolerance:
        return 0.0
    return value


@numba.njit(cache=True)
def _remove_token(d, t, words, x, z, totals, n0_w, n_cw, n_c, n_dc, n_d_dot,
                  cat_promo, word_promo, tolerance):
    w = words[t]
    if x[t] == 0:
        totals[0] -= 1.0
        n0_w[w] = _settle(n0_w[w] - 1.0, tolerance)
        return n0_w[w] >= 0.0

    c = z[t]
    doc_amount = cat_promo[d, c]
    word_amount = word_promo[w, c]
    totals[1] -= 1.0
    n_dc[d, c] = _settle(n_dc[d, c] - doc_amount, tolerance)
    n_d_dot[d] = _settle(n_d_dot[d] - doc_amount, tolerance)
    n_cw[c, w] = _settle(n_cw[c, w] - word_amount, tolerance)
    n_c[c] = _settle(n_c[c] - word_amount, tolerance)
    return n_dc[d, c] >= 0.0 and n_d_dot[d] >= 0.0 and n_cw[c, w] >= 0.0 and n_c[c] >= 0.0


@numba.njit(cache=True)
def _add_token(d, t, k, words, x, z, totals, n0_w, n_cw, n_c, n_dc, n_d_dot, cat_promo, word_promo):
    w = words[t]
    if k == 0:
        x[t] = 0
        z[t] = -1
        totals[0] += 1.0
        n0_w[w] += 1.0
        return

    c = k - 1
    doc_amount = cat_promo[d, c]
    word_amount = word_promo[w, c]
    x[t] = 1
    z[t] = c
    totals[1] += 1.0
    n_dc[d, c] += doc_amount
    n_d_dot[d] += doc_amount
    n_cw[c, w] += word_amount
    n_c[c] += word_amount


@numba.njit(cache=True)
def _fill_token_weights(weights, w, n0, n1, n0_w, n_cw, n_c, n_dc_d, alpha_d,
                        num_words, pi, beta0, beta1, gamma0, gamma1):
    """Write the C + 1 weights into ``weights``; returns their sum, or -1 when any is invalid."""
    num_categories = n_c.shape[0]
    switch_norm = n0 + n1 + 2.0 * pi
    weights[0] = (n0 + pi) / switch_norm * (n0_w[w] + beta0) / (n0 + num_words * beta0)

    doc_total = 0.0
    for c in range(num_categories):
        doc_total += alpha_d[c] * n_dc_d[c] + alpha_d[c] * gamma0 + gamma1

    total = weights[0]
    valid = weights[0] >= 0.0
    for c in range(num_categories):
        doc_term = alpha_d[c] * n_dc_d[c] + alpha_d[c] * gamma0 + gamma1
        weights[c + 1] = (
            (n1 + pi) / switch_norm
            * (n_cw[c, w] + beta1) / (n_c[c] + num_words * beta1)
            * doc_term / doc_total
        )
        valid = valid and weights[c + 1] >= 0.0
        total += weights[c + 1]

    if not valid or not (total > 0.0 and total < np.inf):
        return -1.0
    return total


@numba.njit(cache=True)
def _draw_index(weights, u):
    """Linear scan: first k whose running sum exceeds u times the total."""
    total = 0.0
    for k in range(weights.shape[0]):
        total += weights[k]
    target = u * total
    running = 0.0
    for k in range(weights.shape[0]):
        running += weights[k]
        if target < running:
            return k
    return weights.shape[0] - 1


@numba.njit(cache=True)
def _token_sweep(words, offsets, x, z, alpha, totals, n0_w, n_cw, n_c, n_dc, n_d_dot,
                 cat_promo, word_promo, uniforms, num_words, pi, beta0, beta1, gamma0, gamma1,
                 tolerance):
    weights = np.empty(n_c.shape[0] + 1)
    for d in range(offsets.shape[0] - 1):
        for t in range(offsets[d], offsets[d + 1]):
            if not _remove_token(d, t, words, x, z, totals, n0_w, n_cw, n_c, n_dc, n_d_dot,
                                 cat_promo, word_promo, tolerance):
                return _NEGATIVE_COUNT, t
            total = _fill_token_weights(
                weights, words[t], totals[0], totals[1], n0_w, n_cw, n_c, n_dc[d], alpha[d],
                num_words, pi, beta0, beta1, gamma0, gamma1,
            )
            if total < 0.0:
                return _INVALID_WEIGHTS, t
            k = _draw_index(weights, uniforms[t])
            _add_token(d, t, k, words, x, z, totals, n0_w, n_cw, n_c, n_dc, n_d_dot, cat_promo, word_promo)
    return _OK, -1


@numba.njit(cache=True)
def _selector_log_weights(n_dc, n_rest, selected_rest, num_categories, p, q, gamma0, gamma1, collapsed):
    """(log on, log off); NaN for both when a lnGamma or prior argument is not positive."""
    a = selected_rest * gamma0
    c_g1 = num_categories * gamma1
    prior_on = p + selected_rest
    prior_off = q + num_categories - selected_rest - 1
    if prior_on <= 0.0 or prior_off <= 0.0:
        return np.nan, np.nan

    if collapsed:
        n_total = n_dc + n_rest
        if n_dc + gamma1 <= 0.0 or gamma1 <= 0.0 or a + c_g1 <= 0.0 or a + c_g1 + n_total <= 0.0:
            return np.nan, np.nan
        on = (math.lgamma(n_dc + gamma0 + gamma1) - math.lgamma(gamma0 + gamma1)
              + math.lgamma(a + gamma0 + c_g1) - math.lgamma(a + gamma0 + c_g1 + n_total))
        off = (math.lgamma(n_dc + gamma1) - math.lgamma(gamma1)
               + math.lgamma(a + c_g1) - math.lgamma(a + c_g1 + n_total))
    else:
        if n_dc + gamma0 + gamma1 <= 0.0 or gamma0 + gamma1 <= 0.0 or a + c_g1 + n_rest <= 0.0 or a + c_g1 <= 0.0:
            return np.nan, np.nan
        on = (math.lgamma(n_dc + gamma0 + gamma1) + math.lgamma(a + c_g1 + n_rest)
              + math.lgamma(a + gamma0 + c_g1))
        off = (math.lgamma(gamma0 + gamma1) + math.lgamma(a + gamma0 + c_g1 + n_rest)
               + math.lgamma(a + c_g1))
    return on + math.log(prior_on), off + math.log(prior_off)


@numba.njit(cache=True)
def _on_probability(log_on, log_off):
    top = max(log_on, log_off)
    normaliser = top + math.log(math.exp(log_on - top) + math.exp(log_off - top))
    return math.exp(log_on - normaliser)


@numba.njit(cache=True)
def _selector_sweep(alpha, alpha_count, n_dc, n_d_dot, uniforms, p, q, gamma0, gamma1, collapsed):
    num_documents, num_categories = alpha.shape
    for d in range(num_documents):
        for c in range(num_categories):
            selected_rest = alpha_count[d] - alpha[d, c]
            n_here = max(n_dc[d, c], 0.0)
            n_rest = max(n_d_dot[d] - n_dc[d, c], 0.0)
            log_on, log_off = _selector_log_weights(
                n_here, n_rest, selected_rest, num_categories, p, q, gamma0, gamma1, collapsed
            )
            if np.isnan(log_on):
                return d * num_categories + c
            value = 1 if uniforms[d * num_categories + c] < _on_probability(log_on, log_off) else 0
            alpha[d, c] = value
            alpha_count[d] = selected_rest + value
    return -1


# ============================================================================
# TOKEN KERNEL
# ============================================================================

def _count_tables(state: ModelState) -> tuple:
    return state.n0_w, state.n_cw, state.n_c, state.n_dc, state.n_d_dot


def remove_token(state: ModelState, d: int, t: int, promos: PromotionTables) -> None:
    """Take flat token t of document d out of the counts."""
    totals = np.array([state.n0, state.n1])
    settled = _remove_token(
        d, t, state.words, state.x, state.z, totals, *_count_tables(state),
        promos.cat_promo, promos.word_promo, NEGATIVE_COUNT_TOLERANCE,
    )
    state.n0, state.n1 = float(totals[0]), float(totals[1])
    if not settled:
        raise ConsistencyError(f"A count fell below zero while removing token {t} of document {d}")


def add_token(state: ModelState, d: int, t: int, k: int, promos: PromotionTables) -> None:
    """Assign token t to outcome k (0 = background, c + 1 = category c)."""
    totals = np.array([state.n0, state.n1])
    _add_token(
        d, t, k, state.words, state.x, state.z, totals, *_count_tables(state),
        promos.cat_promo, promos.word_promo,
    )
    state.n0, state.n1 = float(totals[0]), float(totals[1])


def _token_weights(state: ModelState, d: int, w: int, hyper: Hyperparams) -> np.ndarray:
    weights = np.empty(state.num_categories + 1)
    total = _fill_token_weights(
        weights, w, state.n0, state.n1, state.n0_w, state.n_cw, state.n_c, state.n_dc[d], state.alpha[d],
        state.num_words, hyper.pi, hyper.beta0, hyper.beta1, hyper.gamma0, hyper.gamma1,
    )
    if total < 0.0:
        raise ConsistencyError(f"Invalid token weights for document {d}, word {w}: {weights}")
    return weights


def token_distribution(
    state: ModelState,
    d: int,
    i: int,
    promos: PromotionTables,
    hyper: Hyperparams
) -> np.ndarray:
    """
    Unnormalised weights over (background, category 0, ..., category C-1).

    The token's own assignment must already be removed from the counts.

    Args:
        state: Chain state without token (d, i)
        d: Document index
        i: Token position within the document
        promos: Promotion tables (unused by the weights; kept for symmetry with sample_token)
        hyper: Resolved hyperparameters

    Returns:
        Array of length C + 1
    """
    return _token_weights(state, d, state.words[state.offsets[d] + i], hyper)


def sample_token(
    state: ModelState,
    d: int,
    i: int,
    promos: PromotionTables,
    hyper: Hyperparams,
    rng: np.random.Generator
) -> Tuple[int, int]:
    """
    Resample the switch and category of token (d, i).

    Returns:
        New (x, z); z is -1 for the background topic
    """
    t = state.offsets[d] + i
    remove_token(state, d, t, promos)
    k = _draw_index(_token_weights(state, d, state.words[t], hyper), rng.random())
    add_token(state, d, t, k, promos)
    return int(state.x[t]), int(state.z[t])


# ============================================================================
# SELECTOR KERNEL
# ============================================================================

def selector_log_weights(
    n_dc: float,
    n_rest: float,
    selected_rest: int,
    num_categories: int,
    hyper: Hyperparams,
    form: Optional[str] = None
) -> Tuple[float, float]:
    """
    Log weights of a selector being on and off.

    Args:
        n_dc: Category count of the document
        n_rest: Sum of the document's other category counts
        selected_rest: Number of the document's other selectors that are on
        num_categories: C
        hyper: Resolved hyperparameters
        form: "printed" (product of Gamma terms) or "collapsed"
            (Dirichlet-multinomial ratio); defaults to hyper.alpha_form

    Returns:
        (log weight on, log weight off)
    """
    form = form or hyper.alpha_form
    if form not in ("printed", "collapsed"):
        raise ConsistencyError(f"Unknown selector form: {form}")

    log_on, log_off = _selector_log_weights(
        float(n_dc), float(n_rest), int(selected_rest), int(num_categories),
        hyper.p, hyper.q, hyper.gamma0, hyper.gamma1, form == "collapsed",
    )
    if math.isnan(log_on):
        raise ConsistencyError(
            f"Non-positive lnGamma/prior argument in selector kernel: "
            f"n_dc={n_dc}, n_rest={n_rest}, selected_rest={selected_rest}"
        )
    return float(log_on), float(log_off)


def alpha_log_weights(state: ModelState, d: int, c: int, hyper: Hyperparams) -> Tuple[float, float]:
    """Selector log weights for (d, c) with category c excluded from the document totals."""
    n_dc = max(float(state.n_dc[d, c]), 0.0)
    n_rest = max(float(state.n_d_dot[d]) - float(state.n_dc[d, c]), 0.0)
    selected_rest = int(state.alpha_count[d] - state.alpha[d, c])
    return selector_log_weights(n_dc, n_rest, selected_rest, state.num_categories, hyper)


def selector_on_probability(logw_on: float, logw_off: float) -> float:
    """Normalised probability of the on state."""
    return float(_on_probability(logw_on, logw_off))


def sample_alpha(state: ModelState, d: int, c: int, hyper: Hyperparams, rng: np.random.Generator) -> int:
    """Resample selector (d, c); count tables are untouched."""
    selected_rest = state.alpha_count[d] - state.alpha[d, c]
    probability = selector_on_probability(*alpha_log_weights(state, d, c, hyper))
    value = 1 if rng.random() < probability else 0
    state.alpha[d, c] = value
    state.alpha_count[d] = selected_rest + value
    return value


# ============================================================================
# SWEEPS AND CHAINS
# ============================================================================

def run_iteration(
    state: ModelState,
    promos: PromotionTables,
    hyper: Hyperparams,
    rng: np.random.Generator
) -> ModelState:
    """
    One full sweep: every token in document-major order, then every selector.

    One uniform is drawn per token and then one per (document, category)
    selector, in sweep order. Selectors stay fixed when the sparsity
    mechanism is disabled.
    """
    totals = np.array([state.n0, state.n1])
    status, t = _token_sweep(
        state.words, state.offsets, state.x, state.z, state.alpha, totals, *_count_tables(state),
        promos.cat_promo, promos.word_promo, rng.random(state.total_tokens),
        state.num_words, hyper.pi, hyper.beta0, hyper.beta1, hyper.gamma0, hyper.gamma1,
        NEGATIVE_COUNT_TOLERANCE,
    )
    state.n0, state.n1 = float(totals[0]), float(totals[1])
    if status == _NEGATIVE_COUNT:
        raise ConsistencyError(f"A count fell below zero while removing token {t}")
    if status == _INVALID_WEIGHTS:
        raise ConsistencyError(f"Invalid token weights at token {t} (word {state.words[t]})")

    if hyper.sparsity:
        failed = _selector_sweep(
            state.alpha, state.alpha_count, state.n_dc, state.n_d_dot,
            rng.random(state.num_documents * state.num_categories),
            hyper.p, hyper.q, hyper.gamma0, hyper.gamma1, hyper.alpha_form == "collapsed",
        )
        if failed >= 0:
            d, c = divmod(int(failed), state.num_categories)
            raise ConsistencyError(f"Non-positive lnGamma/prior argument for selector ({d}, {c})")

    state.iterations_completed += 1
    return state


@dataclass
class IterationStats:
    """Per-iteration telemetry."""

    iteration: int
    n1_n0_ratio: float
    mean_alpha: float
    extra: Dict[str, float] = field(default_factory=dict)

    def to_row(self) -> Dict[str, float]:
        row = asdict(self)
        extra = row.pop("extra")
        row.update(extra)
        return row


def iteration_stats(state: ModelState) -> IterationStats:
    """Category/background ratio and mean number of selected categories."""
    ratio = state.n1 / state.n0 if state.n0 > 0 else float("inf")
    mean_alpha = float(state.alpha_count.mean()) if state.num_documents else 0.0
    return IterationStats(iteration=state.iterations_completed, n1_n0_ratio=ratio, mean_alpha=mean_alpha)


Monitor = Callable[[ModelState, "GibbsChain"], Dict[str, float]]


class GibbsChain:
    """
    One sampling chain: promotion tables, state, generator and telemetry.

    Build it, then call :meth:`run`; ``state``, ``promos`` and ``rng`` stay
    available afterwards for checkpointing and scoring.
    """

    def __init__(
        self,
        corpus: Corpus,
        seeds: SeedConfig,
        hyper: Hyperparams,
        rng_seed: SeedLike,
        vectors: Optional[Dict[str, np.ndarray]] = None,
        monitor: Optional[Monitor] = None
    ):
        """
        Initialize the chain and its promotion tables.

        Args:
            corpus: Preprocessed corpus
            seeds: Resolved seed configuration
            hyper: Hyperparameters (gamma0 resolved against C here)
            rng_seed: Integer seed or spawned SeedSequence
            vectors: Word vectors for the embedding variant
            monitor: Optional callable adding columns to each iteration's telemetry
        """
        self.corpus = corpus
        self.seeds = seeds
        self.hyper = hyper.resolve(seeds.num_categories)
        self.rng = np.random.default_rng(rng_seed)
        self.monitor = monitor
        self.indicator = seed_presence(corpus, seeds)
        self.promos = build_promotion_tables(corpus, seeds, self.indicator, self.hyper, vectors)
        self.state: Optional[ModelState] = None
        self.trace: List[IterationStats] = []

    def initialize(self, state: Optional[ModelState] = None) -> ModelState:
        """Random initial state, or continue from a restored one."""
        self.state = state if state is not None else init_state(
            self.corpus, self.seeds, self.indicator, self.promos, self.hyper, self.rng
        )
        return self.state

    def step(self) -> IterationStats:
        """Run one iteration and record its telemetry."""
        run_iteration(self.state, self.promos, self.hyper, self.rng)

        every = self.hyper.recount_every
        if every and self.state.iterations_completed % every == 0:
            check_consistency(self.state, self.promos)
            recount(self.state, self.promos)

        stats = iteration_stats(self.state)
        if self.monitor is not None:
            stats.extra.update(self.monitor(self.state, self))
        logger.debug(
            f"iteration {stats.iteration}: n1/n0={stats.n1_n0_ratio:.4f}, "
            f"mean |alpha|={stats.mean_alpha:.3f}"
        )
        self.trace.append(stats)
        return stats

    def run(self, iterations: Optional[int] = None) -> "GibbsChain":
        """Initialize when needed and run ``iterations`` sweeps (default hyper.iterations)."""
        if self.state is None:
            self.initialize()
        iterations = self.hyper.iterations if iterations is None else iterations
        for _ in range(iterations):
            self.step()
        return self


def run_chain(
    corpus: Corpus,
    seeds: SeedConfig,
    hyper: Hyperparams,
    rng_seed: SeedLike,
    vectors: Optional[Dict[str, np.ndarray]] = None,
    on_iteration: Optional[Callable[[ModelState, IterationStats], None]] = None,
    initial_state: Optional[ModelState] = None
) -> ModelState:
    """
    Build promotions, initialize, run hyper.iterations sweeps and return the final state.

    Args:
        corpus: Preprocessed corpus
        seeds: Resolved seed configuration
        hyper: Hyperparameters
        rng_seed: Integer seed or spawned SeedSequence
        vectors: Word vectors for the embedding variant
        on_iteration: Called with the state and telemetry after every sweep
        initial_state: Continue from this state instead of a random start
    """
    chain = GibbsChain(corpus, seeds, hyper, rng_seed, vectors)
    chain.initialize(initial_state)
    for _ in range(chain.hyper.iterations):
        stats = chain.step()
        if on_iteration is not None:
            on_iteration(chain.state, stats)
    return chain.state


def chain_seeds(base_seed: int, runs: int) -> List[np.random.SeedSequence]:
    """Independent, reproducible per-chain seed sequences."""
    return np.random.SeedSequence(base_seed).spawn(runs)


@dataclass
class ChainOutcome:
    """What a finished chain hands back to the orchestrator."""

    run_index: int
    state: ModelState
    promos: PromotionTables
    hyper: Hyperparams
    rng_state: Dict[str, Any]
    trace: List[IterationStats]


def _run_chain_job(job) -> ChainOutcome:
    run_index, corpus, seeds, hyper, seed, vectors, monitor, checkpoint = job
    chain = GibbsChain(corpus, seeds, hyper, seed, vectors, monitor)
    remaining = chain.hyper.iterations

    if checkpoint is not None:
        chain.initialize(restore_state(checkpoint, corpus, seeds, chain.promos))
        restored = restore_rng(checkpoint)
        if restored is not None:
            chain.rng = restored
        remaining = max(chain.hyper.iterations - chain.state.iterations_completed, 0)
        logger.info(f"Resuming chain {run_index} at iteration {chain.state.iterations_completed}")
    else:
        logger.info(f"Starting chain {run_index} ({remaining} iterations)")

    chain.run(remaining)
    logger.info(f"Finished chain {run_index}")
    return ChainOutcome(
        run_index=run_index,
        state=chain.state,
        promos=chain.promos,
        hyper=chain.hyper,
        rng_state=chain.rng.bit_generator.state,
        trace=chain.trace,
    )


def run_chains(
    corpus: Corpus,
    seeds: SeedConfig,
    hyper: Hyperparams,
    vectors: Optional[Dict[str, np.ndarray]] = None,
    jobs: int = 1,
    monitor: Optional[Monitor] = None,
    checkpoints: Optional[Dict[int, Checkpoint]] = None
) -> List[ChainOutcome]:
    """
    Run hyper.runs independent chains, at most ``jobs`` at a time.

    Chain r is seeded with the r-th spawn of hyper.rng_seed, so results do not
    depend on ``jobs``. Runs present in ``checkpoints`` continue from there.
    """
    seeds_per_run = chain_seeds(hyper.rng_seed, hyper.runs)
    checkpoints = checkpoints or {}
    work = [
        (r, corpus, seeds, hyper, seeds_per_run[r], vectors, monitor, checkpoints.get(r))
        for r in range(hyper.runs)
    ]
    if jobs <= 1 or hyper.runs == 1:
        return [_run_chain_job(job) for job in work]

    with ProcessPoolExecutor(max_workers=min(jobs, hyper.runs)) as pool:
        return list(pool.map(_run_chain_job, work))
