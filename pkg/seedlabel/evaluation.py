"""
Macro-F1 and Macro-AUC against gold labels, plus cross-run aggregation.
"""

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence
import logging
import math
import os

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from seedlabel.errors import DataError

# Configure logging
logger = logging.getLogger(__name__)

CATEGORY_COLUMNS = ["category", "tp", "fp", "fn", "f1", "auc"]


@dataclass
class CategoryResult:
    """Confusion counts, F1 and AUC of one category (auc is NaN when not computable)."""

    category: str
    tp: int = 0
    fp: int = 0
    fn: int = 0
    f1: float = 0.0
    auc: float = float("nan")


@dataclass
class EvalReport:
    """
    Per-category results and their macro averages.

    ``macro_f1_std`` / ``macro_auc_std`` are filled only when several runs
    were combined.
    """

    per_category: List[CategoryResult] = field(default_factory=list)
    macro_f1: float = 0.0
    macro_auc: float = float("nan")
    runs_aggregated: int = 1
    macro_f1_std: float = 0.0
    macro_auc_std: float = 0.0


def f1_score(tp: int, fp: int, fn: int) -> float:
    """2TP / (2TP + FP + FN), with 0/0 taken as 0."""
    denominator = 2 * tp + fp + fn
    return 2 * tp / denominator if denominator else 0.0


def _aligned(
    predictions: Mapping[str, FrozenSet[int]],
    gold: Mapping[str, FrozenSet[int]]
) -> List[str]:
    if set(predictions) != set(gold):
        only_pred = sorted(set(predictions) - set(gold))[:5]
        only_gold = sorted(set(gold) - set(predictions))[:5]
        raise DataError(
            f"Predictions and gold cover different documents "
            f"(only predicted: {only_pred}, only gold: {only_gold})"
        )
    return sorted(gold)


def macro_f1(
    predictions: Mapping[str, FrozenSet[int]],
    gold: Mapping[str, FrozenSet[int]],
    categories: Sequence[str]
) -> EvalReport:
    """
    Per-category F1 and their unweighted mean.

    Args:
        predictions: doc_id to predicted category ids
        gold: doc_id to gold category ids
        categories: Category names in id order

    Returns:
        EvalReport with F1 fields filled
    """
    doc_ids = _aligned(predictions, gold)
    results = [CategoryResult(category=name) for name in categories]
    for doc_id in doc_ids:
        predicted, truth = predictions[doc_id], gold[doc_id]
        for c in predicted & truth:
            results[c].tp += 1
        for c in predicted - truth:
            results[c].fp += 1
        for c in truth - predicted:
            results[c].fn += 1

    for result in results:
        result.f1 = f1_score(result.tp, result.fp, result.fn)
    mean = float(np.mean([r.f1 for r in results])) if results else 0.0
    return EvalReport(per_category=results, macro_f1=mean)


def rank_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Probability that a random positive outranks a random negative, ties counting 1/2."""
    positive = np.asarray(positive, dtype=bool)
    num_pos = int(positive.sum())
    num_neg = positive.size - num_pos
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - num_pos * (num_pos + 1) / 2) / (num_pos * num_neg))


def macro_auc(scores: np.ndarray, gold: np.ndarray, categories: Sequence[str]) -> EvalReport:
    """
    Per-category rank-statistic AUC and their mean.

    Categories without both a positive and a negative gold document are
    skipped with a warning.

    Args:
        scores: D x C score matrix
        gold: D x C boolean gold matrix in the same document order
        categories: Category names in id order

    Raises:
        DataError: when shapes disagree or no category is computable
    """
    if scores.shape != gold.shape:
        raise DataError(f"Score matrix {scores.shape} and gold matrix {gold.shape} differ in shape")

    results = []
    computable = []
    for c, name in enumerate(categories):
        positives = int(gold[:, c].sum())
        result = CategoryResult(category=name)
        if 0 < positives < gold.shape[0]:
            result.auc = rank_auc(scores[:, c], gold[:, c])
            computable.append(result.auc)
        else:
            logger.warning(f"Skipping AUC for '{name}': needs positive and negative gold documents")
        results.append(result)

    if not computable:
        raise DataError("No category has both positive and negative gold documents")
    return EvalReport(per_category=results, macro_auc=float(np.mean(computable)))


def evaluate(
    predictions: Mapping[str, FrozenSet[int]],
    truth: Mapping[str, FrozenSet[int]],
    scores: np.ndarray,
    gold: np.ndarray,
    categories: Sequence[str]
) -> EvalReport:
    """Merge the F1 and AUC halves into one report."""
    f1_part = macro_f1(predictions, truth, categories)
    auc_part = macro_auc(scores, gold, categories)
    for target, source in zip(f1_part.per_category, auc_part.per_category):
        target.auc = source.auc
    return replace(f1_part, macro_auc=auc_part.macro_auc)


def combine_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """
    Average reports of several runs.

    Per-category counts are summed, per-category F1 and AUC averaged; the
    macro values are the mean of the per-run macro values, with their
    standard deviation.
    """
    if not reports:
        raise DataError("No reports to combine")

    categories = [r.category for r in reports[0].per_category]
    combined = []
    for c, name in enumerate(categories):
        rows = [report.per_category[c] for report in reports]
        aucs = [row.auc for row in rows if not math.isnan(row.auc)]
        combined.append(CategoryResult(
            category=name,
            tp=sum(row.tp for row in rows),
            fp=sum(row.fp for row in rows),
            fn=sum(row.fn for row in rows),
            f1=float(np.mean([row.f1 for row in rows])),
            auc=float(np.mean(aucs)) if aucs else float("nan"),
        ))

    f1_values = np.array([report.macro_f1 for report in reports])
    auc_values = np.array([report.macro_auc for report in reports])
    return EvalReport(
        per_category=combined,
        macro_f1=float(f1_values.mean()),
        macro_auc=float(auc_values.mean()),
        runs_aggregated=sum(report.runs_aggregated for report in reports),
        macro_f1_std=float(f1_values.std()),
        macro_auc_std=float(auc_values.std()),
    )


def per_category_table(report: EvalReport) -> pd.DataFrame:
    """Per-category rows sorted by F1 ascending, ties by category name."""
    rows = sorted(report.per_category, key=lambda r: (r.f1, r.category))
    return pd.DataFrame(
        [[r.category, r.tp, r.fp, r.fn, r.f1, r.auc] for r in rows],
        columns=CATEGORY_COLUMNS,
    )


def write_per_category_csv(report: EvalReport, path: str) -> None:
    """Sorted per-category rows; header only for an empty report."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    per_category_table(report).to_csv(path, index=False)


def report_to_frame(report: EvalReport) -> pd.DataFrame:
    """One-row summary frame."""
    return pd.DataFrame([{
        "macro_f1": report.macro_f1,
        "macro_f1_std": report.macro_f1_std,
        "macro_auc": report.macro_auc,
        "macro_auc_std": report.macro_auc_std,
        "runs": report.runs_aggregated,
    }])


def format_report(report: EvalReport, title: Optional[str] = None) -> str:
    """Human-readable table of the report."""
    lines = []
    if title:
        lines.append(title)
        lines.append("=" * len(title))
    table = per_category_table(report)
    if not table.empty:
        lines.append(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
        lines.append("")
    if report.runs_aggregated > 1:
        lines.append(f"Macro-F1:  {report.macro_f1:.4f} +/- {report.macro_f1_std:.4f}")
        lines.append(f"Macro-AUC: {report.macro_auc:.4f} +/- {report.macro_auc_std:.4f}")
    else:
        lines.append(f"Macro-F1:  {report.macro_f1:.4f}")
        lines.append(f"Macro-AUC: {report.macro_auc:.4f}")
    lines.append(f"Runs:      {report.runs_aggregated}")
    return "\n".join(lines)


def gold_sets(doc_ids: Sequence[str], gold: np.ndarray) -> Dict[str, FrozenSet[int]]:
    """Per-document gold category ids from a boolean D x C matrix."""
    return {doc_id: frozenset(int(c) for c in np.flatnonzero(gold[d])) for d, doc_id in enumerate(doc_ids)}


def evaluate_predictions(
    predictions: Sequence,
    doc_ids: Sequence[str],
    gold: np.ndarray,
    categories: Sequence[str]
) -> EvalReport:
    """
    Evaluate prediction records (``doc_id``, ``assigned``, ``scores``) against gold.

    Args:
        predictions: Prediction records in any order
        doc_ids: Corpus document ids, the row order of ``gold``
        gold: D x C boolean gold matrix
        categories: Category names in id order
    """
    by_id = {prediction.doc_id: prediction for prediction in predictions}
    if len(by_id) != len(predictions):
        duplicated = sorted(doc_id for doc_id, n in Counter(p.doc_id for p in predictions).items() if n > 1)
        raise DataError(f"Duplicate document ids in predictions: {duplicated[:5]}")
    predicted = {doc_id: frozenset(p.assigned) for doc_id, p in by_id.items()}
    truth = gold_sets(doc_ids, gold)
    _aligned(predicted, truth)
    scores = np.vstack([by_id[doc_id].scores for doc_id in doc_ids])
    return evaluate(predicted, truth, scores, gold, categories)
