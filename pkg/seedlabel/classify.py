"""
Multi-label predictions from a trained chain.

Labels come from the selectors (a category is assigned when its selector is
on); rankings come from summation-over-words scores p(c|d).
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence
import logging
import os

import numpy as np
import pandas as pd

from seedlabel.corpus import Corpus
from seedlabel.errors import ConfigError, DataError
from seedlabel.model import Hyperparams, ModelState, PosteriorEstimates

# Configure logging
logger = logging.getLogger(__name__)

LABEL_SEPARATOR = ";"


@dataclass(frozen=True, eq=False)
class Prediction:
    """
    Labels and scores for one document.

    Attributes:
        doc_id: External document id
        assigned: Category ids labelled positive (never empty)
        scores: p(c|d), length C, sums to 1
    """

    doc_id: str
    assigned: FrozenSet[int]
    scores: np.ndarray


def category_prior(state: ModelState, hyper: Hyperparams) -> np.ndarray:
    """p^(c) from the global category mass with beta1 smoothing."""
    mass = np.maximum(state.n_c, 0.0) + state.num_words * hyper.beta1
    return mass / mass.sum()


def word_category_posterior(estimates: PosteriorEstimates, prior: np.ndarray) -> np.ndarray:
    """C x W matrix of p(c|w) by Bayes' theorem."""
    joint = estimates.phi * prior[:, None]
    return joint / joint.sum(axis=0, keepdims=True)


def category_scores(
    state: ModelState,
    estimates: PosteriorEstimates,
    corpus: Corpus,
    hyper: Hyperparams
) -> np.ndarray:
    """
    Summation-over-words scores.

    p(c|d) is the token average of p(c|w), row-normalised; empty documents
    get the uniform row.

    Args:
        state: Trained chain state
        estimates: Posterior estimates of the same state
        corpus: Corpus the state was trained on
        hyper: Resolved hyperparameters

    Returns:
        D x C matrix of row-stochastic scores
    """
    posterior = word_category_posterior(estimates, category_prior(state, hyper))
    totals = corpus.term_matrix @ posterior.T
    lengths = corpus.doc_lengths.astype(np.float64)

    scores = np.full((corpus.num_documents, state.num_categories), 1.0 / state.num_categories)
    filled = lengths > 0
    averaged = totals[filled] / lengths[filled, None]
    scores[filled] = averaged / averaged.sum(axis=1, keepdims=True)
    return scores


def assigned_labels(state: ModelState, scores: np.ndarray) -> List[FrozenSet[int]]:
    """Categories whose selector is on; argmax of the scores when none is."""
    labels = []
    for d in range(state.num_documents):
        on = np.flatnonzero(state.alpha[d])
        if on.size == 0:
            labels.append(frozenset([int(np.argmax(scores[d]))]))
        else:
            labels.append(frozenset(int(c) for c in on))
    return labels


def topk_labels(scores: np.ndarray, k: int) -> List[FrozenSet[int]]:
    """
    Label the k highest scoring documents of every category positive.

    Ties go to the lower document index.

    Returns:
        Per-document label sets
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    num_docs, num_categories = scores.shape
    if k > num_docs:
        logger.warning(f"top-k of {k} exceeds the {num_docs} documents; using {num_docs}")
        k = num_docs

    labels: List[set] = [set() for _ in range(num_docs)]
    for c in range(num_categories):
        for d in np.argsort(-scores[:, c], kind="stable")[:k]:
            labels[d].add(c)
    return [frozenset(row) for row in labels]


def default_top_k(gold: np.ndarray) -> int:
    """Mean number of gold positives per category, rounded, at least 1."""
    if gold.size == 0:
        raise DataError("Cannot derive top-k from empty gold labels")
    return max(1, int(round(float(gold.sum(axis=0).mean()))))


def predict(
    state: ModelState,
    estimates: PosteriorEstimates,
    corpus: Corpus,
    hyper: Hyperparams,
    top_k: Optional[int] = None
) -> List[Prediction]:
    """
    Predictions for every document of the corpus.

    With the sparsity mechanism on, labels come from the selectors. Without it
    the top-k rule is used, with ``top_k`` falling back to hyper.top_k.
    """
    scores = category_scores(state, estimates, corpus, hyper)
    if hyper.sparsity:
        labels = assigned_labels(state, scores)
    else:
        k = top_k if top_k is not None else hyper.top_k
        if k is None:
            raise ConfigError("The no-sparsity variant needs --top-k or gold labels to derive it")
        labels = topk_labels(scores, k)

    return [
        Prediction(doc_id=doc_id, assigned=labels[d], scores=scores[d])
        for d, doc_id in enumerate(corpus.doc_ids)
    ]


def predictions_frame(predictions: Sequence[Prediction], categories: List[str]) -> pd.DataFrame:
    rows = []
    for prediction in predictions:
        row = {
            "doc_id": prediction.doc_id,
            "labels": LABEL_SEPARATOR.join(categories[c] for c in sorted(prediction.assigned)),
        }
        row.update({name: float(prediction.scores[c]) for c, name in enumerate(categories)})
        rows.append(row)
    return pd.DataFrame(rows, columns=["doc_id", "labels", *categories])


def write_predictions_tsv(predictions: Sequence[Prediction], categories: List[str], path: str) -> None:
    """doc_id, semicolon-joined category names, then one score column per category."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    predictions_frame(predictions, categories).to_csv(
        path, sep="\t", index=False, float_format="%.10g"
    )
    logger.info(f"Wrote {len(predictions)} predictions to {path}")


def read_predictions_tsv(path: str, categories: List[str]) -> List[Prediction]:
    """Read a file written by :func:`write_predictions_tsv`."""
    if not os.path.exists(path):
        raise ConfigError(f"Predictions file not found: {path}")

    frame = pd.read_csv(path, sep="\t", dtype={"doc_id": str, "labels": str}, keep_default_na=False)
    missing = [name for name in ["doc_id", "labels", *categories] if name not in frame.columns]
    if missing:
        raise DataError(f"{path} lacks columns: {', '.join(missing)}")

    index: Dict[str, int] = {name: c for c, name in enumerate(categories)}
    score_matrix = frame[categories].to_numpy(dtype=np.float64)
    predictions = []
    for d, (doc_id, joined) in enumerate(zip(frame["doc_id"], frame["labels"])):
        names = [name for name in joined.split(LABEL_SEPARATOR) if name]
        unknown = [name for name in names if name not in index]
        if unknown:
            raise DataError(f"{path}: unknown categories {unknown} for document {doc_id}")
        predictions.append(Prediction(
            doc_id=doc_id,
            assigned=frozenset(index[name] for name in names),
            scores=score_matrix[d],
        ))
    return predictions
