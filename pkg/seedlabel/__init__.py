"""
seedlabel: seed-guided multi-label topic model for dataless text classification.

This package provides:
- Corpus preprocessing, seed-word configuration and word vectors
- Category and word promotion tables built from the seed words
- A collapsed Gibbs sampler with a background topic, category topics and
  sparse category selectors
- Selector-based multi-label predictions and summation-over-words rankings
- Macro-F1 / Macro-AUC evaluation
- A synthetic corpus generator with planted seed words
"""

from seedlabel.corpus import Corpus, SeedConfig, PreprocessOptions, preprocess, load_corpus, load_seed_config
from seedlabel.promotion import PromotionTables, build_promotion_tables
from seedlabel.model import Hyperparams, ModelState, estimate, top_words
from seedlabel.sampler import GibbsChain, run_chain, run_chains
from seedlabel.classify import Prediction, predict
from seedlabel.evaluation import EvalReport, macro_f1, macro_auc
from seedlabel.synth import SyntheticSpec, generate

__all__ = [
    "Corpus",
    "SeedConfig",
    "PreprocessOptions",
    "preprocess",
    "load_corpus",
    "load_seed_config",
    "PromotionTables",
    "build_promotion_tables",
    "Hyperparams",
    "ModelState",
    "estimate",
    "top_words",
    "GibbsChain",
    "run_chain",
    "run_chains",
    "Prediction",
    "predict",
    "EvalReport",
    "macro_f1",
    "macro_auc",
    "SyntheticSpec",
    "generate",
]

__version__ = "1.0.0"
