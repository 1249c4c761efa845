"""
Command-line interface for seedlabel.

Subcommands cover the whole pipeline: preprocess raw documents, train chains,
predict, evaluate, inspect topics and token assignments, generate synthetic
data and sweep a hyperparameter.

Usage:
    python -m seedlabel generate --output-dir data/synth
    python -m seedlabel preprocess --input data/synth/corpus.jsonl --output data/synth/corpus.json.gz
    python -m seedlabel train --corpus data/synth/corpus.json.gz --seeds data/synth/seeds.txt --output-dir runs
    python -m seedlabel eval --corpus data/synth/corpus.json.gz --seeds data/synth/seeds.txt --runs-dir runs
"""

from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple
import argparse
import glob
import logging
import os
import sys

import numpy as np
import pandas as pd

from seedlabel.classify import (
    Prediction,
    default_top_k,
    predict,
    read_predictions_tsv,
    write_predictions_tsv,
)
from seedlabel.config import (
    ALPHA_FORMS,
    BETA0,
    BETA1,
    EPSILON,
    GAMMA0_NUMERATOR,
    GAMMA1,
    ITERATIONS,
    LOG_FORMAT,
    MIN_DF,
    MIN_TOKEN_LEN,
    MU,
    P,
    PI,
    Q,
    RNG_SEED,
    RUNS,
    SEEDLABEL_LOG_LEVEL,
    SYNTH_BACKGROUND_FRACTION,
    SYNTH_CATEGORIES,
    SYNTH_CONCENTRATION,
    SYNTH_DOC_LENGTH,
    SYNTH_DOCUMENTS,
    SYNTH_OVERLAP,
    SYNTH_SEEDS_PER_CATEGORY,
    SYNTH_VOCAB_SIZE,
    default_jobs,
    load_config_file,
)
from seedlabel.corpus import (
    Corpus,
    PreprocessOptions,
    SeedConfig,
    corpus_stats,
    format_stats,
    get_default_stopwords,
    gold_matrix,
    load_corpus,
    load_seed_config,
    load_word_vectors,
    preprocess,
    read_jsonl,
    read_stopwords,
    save_corpus,
)
from seedlabel.errors import ConfigError, DataError, SeedLabelError
from seedlabel.evaluation import (
    combine_reports,
    evaluate_predictions,
    format_report,
    report_to_frame,
    write_per_category_csv,
)
from seedlabel.model import (
    VARIANTS,
    Checkpoint,
    Hyperparams,
    ModelState,
    estimate,
    load_checkpoint,
    restore_state,
    save_checkpoint,
    top_words,
)
from seedlabel.promotion import write_word_promotion_tsv
from seedlabel.sampler import ChainOutcome, GibbsChain, run_chains
from seedlabel.synth import SyntheticSpec, generate, write_jsonl, write_seed_file

# Configure logging
logger = logging.getLogger(__name__)

SWEEP_PARAMS = ("mu", "gamma0", "pi", "p", "q", "beta0", "beta1", "epsilon")
CONVERGENCE_FILE = "convergence.csv"


def checkpoint_path(directory: str, run_index: int) -> str:
    return os.path.join(directory, f"run_{run_index:02d}.npz")


def predictions_path(directory: str, run_index: int) -> str:
    return os.path.join(directory, f"predictions_run_{run_index:02d}.tsv")


# ============================================================================
# SHARED HELPERS
# ============================================================================

def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) in (None, [], ""):
            raise ConfigError(f"--{name.replace('_', '-')} is required")


def _load_inputs(args: argparse.Namespace) -> Tuple[Corpus, SeedConfig]:
    _require(args, "corpus", "seeds")
    corpus = load_corpus(args.corpus)
    seeds = load_seed_config(args.seeds, corpus)
    return corpus, seeds


def _require_gold(corpus: Corpus, seeds: SeedConfig) -> np.ndarray:
    if corpus.gold_labels is None:
        raise DataError("The corpus carries no gold labels")
    return gold_matrix(corpus, seeds)


def _hyperparams(args: argparse.Namespace, corpus: Corpus, seeds: SeedConfig) -> Hyperparams:
    """Hyperparameters from the model flags, resolved against the seed file's C."""
    hyper = Hyperparams.for_variant(
        args.variant,
        mu=args.mu,
        pi=args.pi,
        p=args.p,
        q=args.q,
        beta0=args.beta0,
        beta1=args.beta1,
        gamma0=args.gamma0,
        gamma1=args.gamma1,
        epsilon=args.epsilon,
        iterations=args.iterations,
        runs=args.runs,
        rng_seed=args.rng_seed,
        top_k=args.top_k,
        alpha_form=args.alpha_form,
    ).resolve(seeds.num_categories)

    if not hyper.sparsity and hyper.top_k is None:
        if corpus.gold_labels is None:
            raise ConfigError("--variant no-sparsity needs --top-k when the corpus has no gold labels")
        k = default_top_k(gold_matrix(corpus, seeds))
        logger.info(f"Using top-k = {k} (mean gold positives per category)")
        hyper = replace(hyper, top_k=k)
    return hyper


def _jobs(args: argparse.Namespace) -> int:
    if args.jobs is None:
        return default_jobs()
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return args.jobs


def _vectors(args: argparse.Namespace, corpus: Corpus, hyper: Hyperparams) -> Optional[Dict[str, np.ndarray]]:
    if hyper.word_promotion != "embedding":
        return None
    if not args.vectors:
        raise ConfigError("--variant word-embedding needs --vectors")
    return load_word_vectors(args.vectors, corpus.vocabulary)


def _checkpoint_paths(directory: str) -> List[str]:
    if not os.path.isdir(directory):
        raise ConfigError(f"Runs directory not found: {directory}")
    paths = sorted(glob.glob(os.path.join(directory, "run_*.npz")))
    if not paths:
        raise DataError(f"No checkpoints (run_*.npz) in {directory}")
    return paths


def predict_state(
    state: ModelState,
    hyper: Hyperparams,
    corpus: Corpus,
    top_k: Optional[int] = None
) -> List[Prediction]:
    """Predictions of one chain state."""
    return predict(state, estimate(state, hyper), corpus, hyper, top_k)


def _predict_checkpoint(
    checkpoint: Checkpoint,
    corpus: Corpus,
    seeds: SeedConfig,
    top_k: Optional[int] = None
) -> List[Prediction]:
    state = restore_state(checkpoint, corpus, seeds)
    return predict_state(state, checkpoint.hyper, corpus, top_k)


class MetricsMonitor:
    """Per-iteration Macro-F1/Macro-AUC of a chain against gold labels."""

    def __init__(self, corpus: Corpus, gold: np.ndarray, categories: Sequence[str]):
        self.corpus = corpus
        self.gold = gold
        self.categories = list(categories)

    def __call__(self, state: ModelState, chain: GibbsChain) -> Dict[str, float]:
        predictions = predict_state(state, chain.hyper, self.corpus)
        report = evaluate_predictions(predictions, self.corpus.doc_ids, self.gold, self.categories)
        return {"macro_f1": report.macro_f1, "macro_auc": report.macro_auc}


def evaluate_outcomes(
    outcomes: Sequence[ChainOutcome],
    corpus: Corpus,
    gold: np.ndarray,
    categories: Sequence[str]
):
    """Combined report over finished chains."""
    reports = [
        evaluate_predictions(predict_state(o.state, o.hyper, corpus), corpus.doc_ids, gold, categories)
        for o in outcomes
    ]
    return combine_reports(reports)


def _write_convergence(outcomes: Sequence[ChainOutcome], path: str, append: bool) -> None:
    rows = [
        {"run": outcome.run_index, **stats.to_row()}
        for outcome in outcomes
        for stats in outcome.trace
    ]
    frame = pd.DataFrame(rows)
    exists = append and os.path.exists(path)
    frame.to_csv(path, mode="a" if exists else "w", header=not exists, index=False)
    logger.info(f"Wrote convergence trace ({len(rows)} rows) to {path}")


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_preprocess(args: argparse.Namespace) -> int:
    """Tokenize a JSON-lines file into a corpus bundle."""
    _require(args, "input")
    if not args.stats_only:
        _require(args, "output")

    if args.stopwords is None:
        stopwords = get_default_stopwords()
    elif args.stopwords == "none":
        stopwords = frozenset()
    else:
        stopwords = read_stopwords(args.stopwords)
    options = PreprocessOptions(
        stopwords=stopwords,
        min_token_len=args.min_len,
        min_df=args.min_df,
        lowercase=not args.no_lowercase,
    )
    corpus = preprocess(read_jsonl(args.input), options)
    print(format_stats(corpus_stats(corpus)))

    if not args.stats_only:
        save_corpus(corpus, args.output)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Run the configured number of chains and checkpoint each."""
    corpus, seeds = _load_inputs(args)
    _require(args, "output_dir")
    jobs = _jobs(args)
    hyper = _hyperparams(args, corpus, seeds)
    vectors = _vectors(args, corpus, hyper)

    monitor = None
    if args.track_metrics:
        if corpus.gold_labels is None:
            logger.warning("--track-metrics ignored: the corpus carries no gold labels")
        else:
            monitor = MetricsMonitor(corpus, gold_matrix(corpus, seeds), seeds.categories)

    checkpoints = {}
    if args.resume:
        for r in range(hyper.runs):
            path = checkpoint_path(args.output_dir, r)
            if os.path.exists(path):
                checkpoints[r] = load_checkpoint(path)

    logger.info(
        f"Training {hyper.runs} chain(s) x {hyper.iterations} iterations "
        f"on {corpus.num_documents} documents, {seeds.num_categories} categories"
    )
    outcomes = run_chains(
        corpus, seeds, hyper, vectors, jobs=jobs, monitor=monitor, checkpoints=checkpoints
    )

    os.makedirs(args.output_dir, exist_ok=True)
    for outcome in outcomes:
        save_checkpoint(
            checkpoint_path(args.output_dir, outcome.run_index),
            outcome.state,
            outcome.promos,
            outcome.hyper,
            corpus,
            seeds,
            run_index=outcome.run_index,
            rng_state=outcome.rng_state,
        )
    _write_convergence(outcomes, os.path.join(args.output_dir, CONVERGENCE_FILE), append=args.resume)

    if args.dump_promotion:
        path = os.path.join(args.output_dir, "word_promotion.tsv")
        write_word_promotion_tsv(
            outcomes[0].promos, corpus.vocabulary, seeds.categories, path, top_n=args.dump_promotion
        )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    """Write a predictions TSV for every checkpoint."""
    corpus, seeds = _load_inputs(args)
    _require(args, "runs_dir")
    output_dir = args.output_dir or args.runs_dir

    for path in _checkpoint_paths(args.runs_dir):
        checkpoint = load_checkpoint(path)
        predictions = _predict_checkpoint(checkpoint, corpus, seeds, args.top_k)
        write_predictions_tsv(predictions, seeds.categories, predictions_path(output_dir, checkpoint.run_index))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    """Average Macro-F1/Macro-AUC over runs."""
    corpus, seeds = _load_inputs(args)
    gold = _require_gold(corpus, seeds)

    if args.predictions:
        runs = [read_predictions_tsv(path, seeds.categories) for path in args.predictions]
    elif args.runs_dir:
        runs = [
            _predict_checkpoint(load_checkpoint(path), corpus, seeds, args.top_k)
            for path in _checkpoint_paths(args.runs_dir)
        ]
    else:
        raise ConfigError("eval needs --runs-dir or --predictions")

    report = combine_reports([
        evaluate_predictions(predictions, corpus.doc_ids, gold, seeds.categories)
        for predictions in runs
    ])
    print(format_report(report, title="Evaluation"))

    if args.output_dir:
        os.makedirs(args.output_dir, exist_ok=True)
        write_per_category_csv(report, os.path.join(args.output_dir, "per_category.csv"))
        report_to_frame(report).to_csv(os.path.join(args.output_dir, "report.csv"), index=False)
        logger.info(f"Wrote evaluation tables to {args.output_dir}")
    return 0


def cmd_topics(args: argparse.Namespace) -> int:
    """Print the top words of every category; seed words carry a '*'."""
    corpus, seeds = _load_inputs(args)
    _require(args, "checkpoint")
    checkpoint = load_checkpoint(args.checkpoint)
    state = restore_state(checkpoint, corpus, seeds)
    estimates = estimate(state, checkpoint.hyper)

    n = min(args.n, corpus.num_words)
    for c, name in enumerate(seeds.categories):
        own_seeds = set(seeds.seed_words[c])
        words = [
            f"{word}*" if word in own_seeds else word
            for word, _ in top_words(estimates, corpus.vocabulary, c, n)
        ]
        print(f"{name}: {' '.join(words)}")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    """Write a synthetic corpus.jsonl and seeds.txt."""
    _require(args, "output_dir")
    spec = SyntheticSpec(
        categories=args.categories,
        documents=args.documents,
        vocab_size=args.vocab_size,
        doc_length=args.doc_length,
        concentration=args.concentration,
        seeds_per_category=args.seeds_per_category,
        background_fraction=args.background_fraction,
        overlap=args.overlap,
        label_skew=args.label_skew,
        rng_seed=args.rng_seed,
    )
    synthetic = generate(spec)
    write_jsonl(synthetic.documents, os.path.join(args.output_dir, "corpus.jsonl"))
    write_seed_file(synthetic.seeds, os.path.join(args.output_dir, "seeds.txt"))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    """Vary one hyperparameter and report mean/std metrics per value."""
    corpus, seeds = _load_inputs(args)
    _require(args, "param", "values", "output")
    gold = _require_gold(corpus, seeds)
    base = _hyperparams(args, corpus, seeds)
    vectors = _vectors(args, corpus, base)

    try:
        values = [float(value) for value in args.values.split(",") if value.strip()]
    except ValueError as e:
        raise ConfigError(f"--values must be comma-separated numbers: {e}") from e

    rows = []
    for value in values:
        hyper = replace(base, **{args.param: value})
        hyper.validate()
        logger.info(f"Sweep {args.param}={value}")
        outcomes = run_chains(corpus, seeds, hyper, vectors, jobs=_jobs(args))
        report = evaluate_outcomes(outcomes, corpus, gold, seeds.categories)
        rows.append({
            "param": args.param,
            "value": value,
            "macro_f1": report.macro_f1,
            "macro_f1_std": report.macro_f1_std,
            "macro_auc": report.macro_auc,
            "macro_auc_std": report.macro_auc_std,
            "runs": report.runs_aggregated,
        })

    frame = pd.DataFrame(rows)
    directory = os.path.dirname(args.output)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(args.output, index=False)
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    return 0


def cmd_assignments(args: argparse.Namespace) -> int:
    """Print the per-token topic assignment of selected documents."""
    corpus, seeds = _load_inputs(args)
    _require(args, "checkpoint", "doc_id")
    checkpoint = load_checkpoint(args.checkpoint)
    state = restore_state(checkpoint, corpus, seeds)
    predictions = predict_state(state, checkpoint.hyper, corpus, args.top_k)

    positions = {doc_id: d for d, doc_id in enumerate(corpus.doc_ids)}
    seed_ids = [set(int(s) for s in ids) for ids in seeds.seeds]
    for doc_id in args.doc_id:
        if doc_id not in positions:
            raise DataError(f"Unknown document id: {doc_id}")
        d = positions[doc_id]
        start, end = state.offsets[d], state.offsets[d + 1]

        rows = []
        for t in range(start, end):
            w = int(state.words[t])
            topic = "background" if state.x[t] == 0 else seeds.categories[state.z[t]]
            seed_of = [seeds.categories[c] for c, ids in enumerate(seed_ids) if w in ids]
            rows.append({"word": corpus.vocabulary[w], "topic": topic, "seed_of": ",".join(seed_of)})

        gold = sorted(corpus.gold_labels[d]) if corpus.gold_labels is not None else []
        predicted = [seeds.categories[c] for c in sorted(predictions[d].assigned)]
        print(f"Document {doc_id}")
        print(f"  gold:      {'; '.join(gold) or '-'}")
        print(f"  predicted: {'; '.join(predicted)}")
        if rows:
            print(pd.DataFrame(rows).to_string(index=False))
        else:
            print("  (no tokens after preprocessing)")
        print()
    return 0


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file with default flag values")
    parser.add_argument("--log-level", default=SEEDLABEL_LOG_LEVEL, help="Logging level")


def _add_input_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", help="Corpus bundle written by preprocess")
    parser.add_argument("--seeds", help="Seed file, one 'name: word word ...' line per category")


def _add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--iterations", type=int, default=ITERATIONS, help="Gibbs sweeps per chain")
    parser.add_argument("--runs", type=int, default=RUNS, help="Independent chains")
    parser.add_argument("--mu", type=float, default=MU, help="Promotion for categories without a seed in the document")
    parser.add_argument("--pi", type=float, default=PI, help="Beta prior on the background/category switch")
    parser.add_argument("--p", type=float, default=P, help="Beta prior on selectors (on)")
    parser.add_argument("--q", type=float, default=Q, help="Beta prior on selectors (off)")
    parser.add_argument("--beta0", type=float, default=BETA0, help="Dirichlet prior of the background topic")
    parser.add_argument("--beta1", type=float, default=BETA1, help="Dirichlet prior of the category topics")
    parser.add_argument(
        "--gamma0", type=float, default=None,
        help=f"Smoothing prior of selected categories (default: {GAMMA0_NUMERATOR}/C)"
    )
    parser.add_argument("--gamma1", type=float, default=GAMMA1, help="Weak smoothing prior")
    parser.add_argument("--epsilon", type=float, default=EPSILON, help="Floor on normalised word relevance")
    parser.add_argument("--rng-seed", type=int, default=RNG_SEED, help="Base seed; chain r uses its r-th spawn")
    parser.add_argument("--variant", choices=VARIANTS, default="full", help="Model variant")
    parser.add_argument("--vectors", help="Word vector text file for --variant word-embedding")
    parser.add_argument("--top-k", type=int, default=None, help="Top-k labelling for --variant no-sparsity")
    parser.add_argument("--alpha-form", choices=ALPHA_FORMS, default="printed", help="Selector kernel form")
    parser.add_argument("--jobs", type=int, default=None, help="Chains run in parallel (default: $SEEDLABEL_JOBS or 1)")


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    """Top-level parser and its subcommand parsers by name."""
    parser = argparse.ArgumentParser(
        prog="seedlabel",
        description="Seed-guided multi-label topic model for dataless text classification",
    )
    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True
    formatter = argparse.ArgumentDefaultsHelpFormatter
    commands: Dict[str, argparse.ArgumentParser] = {}

    sub = subparsers.add_parser("preprocess", help="Build a corpus bundle", formatter_class=formatter)
    sub.add_argument("--input", help="JSON-lines input")
    sub.add_argument("--output", help="Corpus bundle to write")
    sub.add_argument("--min-df", type=int, default=MIN_DF, help="Minimum document frequency")
    sub.add_argument("--min-len", type=int, default=MIN_TOKEN_LEN, help="Minimum token length")
    sub.add_argument("--stopwords", default=None, help="Stopword file, or 'none' (default: the shipped list)")
    sub.add_argument("--no-lowercase", action="store_true", help="Keep case")
    sub.add_argument("--stats-only", action="store_true", help="Print statistics without writing")
    sub.set_defaults(handler=cmd_preprocess)
    commands["preprocess"] = sub

    sub = subparsers.add_parser("train", help="Train chains", formatter_class=formatter)
    _add_input_arguments(sub)
    _add_model_arguments(sub)
    sub.add_argument("--output-dir", help="Directory for checkpoints and the convergence trace")
    sub.add_argument("--track-metrics", action="store_true", help="Record Macro-F1/AUC every iteration")
    sub.add_argument("--dump-promotion", type=int, default=0, help="Write the top-N promoted words per category")
    sub.add_argument("--resume", action="store_true", help="Continue from checkpoints in --output-dir")
    sub.set_defaults(handler=cmd_train)
    commands["train"] = sub

    sub = subparsers.add_parser("predict", help="Write predictions per checkpoint", formatter_class=formatter)
    _add_input_arguments(sub)
    sub.add_argument("--runs-dir", help="Directory of run_*.npz checkpoints")
    sub.add_argument("--output-dir", help="Where to write predictions (default: --runs-dir)")
    sub.add_argument("--top-k", type=int, default=None, help="Override the checkpoint's top-k")
    sub.set_defaults(handler=cmd_predict)
    commands["predict"] = sub

    sub = subparsers.add_parser("eval", help="Evaluate against gold labels", formatter_class=formatter)
    _add_input_arguments(sub)
    sub.add_argument("--runs-dir", help="Directory of run_*.npz checkpoints")
    sub.add_argument("--predictions", nargs="+", help="Prediction TSV files instead of checkpoints")
    sub.add_argument("--output-dir", help="Write per_category.csv and report.csv here")
    sub.add_argument("--top-k", type=int, default=None, help="Override the checkpoint's top-k")
    sub.set_defaults(handler=cmd_eval)
    commands["eval"] = sub

    sub = subparsers.add_parser("topics", help="Top words per category", formatter_class=formatter)
    _add_input_arguments(sub)
    sub.add_argument("--checkpoint", help="Checkpoint to read")
    sub.add_argument("--n", type=int, default=10, help="Words per category")
    sub.set_defaults(handler=cmd_topics)
    commands["topics"] = sub

    sub = subparsers.add_parser("generate", help="Generate a synthetic corpus", formatter_class=formatter)
    sub.add_argument("--output-dir", help="Directory for corpus.jsonl and seeds.txt")
    sub.add_argument("--categories", type=int, default=SYNTH_CATEGORIES)
    sub.add_argument("--documents", type=int, default=SYNTH_DOCUMENTS)
    sub.add_argument("--vocab-size", type=int, default=SYNTH_VOCAB_SIZE)
    sub.add_argument("--doc-length", type=int, default=SYNTH_DOC_LENGTH)
    sub.add_argument("--concentration", type=float, default=SYNTH_CONCENTRATION)
    sub.add_argument("--seeds-per-category", type=int, default=SYNTH_SEEDS_PER_CATEGORY)
    sub.add_argument("--background-fraction", type=float, default=SYNTH_BACKGROUND_FRACTION)
    sub.add_argument("--overlap", type=float, default=SYNTH_OVERLAP)
    sub.add_argument("--label-skew", type=float, default=0.0, help="Category prevalence falls off as 1/(c+1)**skew")
    sub.add_argument("--rng-seed", type=int, default=RNG_SEED)
    sub.set_defaults(handler=cmd_generate)
    commands["generate"] = sub

    sub = subparsers.add_parser("sweep", help="Vary one hyperparameter", formatter_class=formatter)
    _add_input_arguments(sub)
    _add_model_arguments(sub)
    sub.add_argument("--param", choices=SWEEP_PARAMS, help="Hyperparameter to vary")
    sub.add_argument("--values", help="Comma-separated values")
    sub.add_argument("--output", help="CSV to write")
    sub.set_defaults(handler=cmd_sweep)
    commands["sweep"] = sub

    sub = subparsers.add_parser("assignments", help="Per-token assignments of documents", formatter_class=formatter)
    _add_input_arguments(sub)
    sub.add_argument("--checkpoint", help="Checkpoint to read")
    sub.add_argument("--doc-id", nargs="+", help="Document ids to show")
    sub.add_argument("--top-k", type=int, default=None, help="Override the checkpoint's top-k")
    sub.set_defaults(handler=cmd_assignments)
    commands["assignments"] = sub

    for sub in commands.values():
        _add_common_arguments(sub)
    return parser, commands


def _config_value(action: argparse.Action, raw: str, path: str):
    try:
        if isinstance(action, argparse._StoreTrueAction):
            lowered = raw.strip().lower()
            if lowered not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(f"'{raw}' is not a boolean")
            return lowered in ("1", "true", "yes", "on")
        convert = action.type or str
        if action.nargs in ("+", "*"):
            value = [convert(item) for item in raw.split()]
        else:
            value = convert(raw)
    except ValueError as e:
        raise ConfigError(f"{path}: bad value for '{action.dest}': {e}") from e
    if action.choices is not None and value not in action.choices:
        raise ConfigError(f"{path}: '{action.dest}' must be one of {list(action.choices)}")
    return value


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parse the command line, using a --config file for defaults.

    Flags given on the command line override config-file values; unknown
    config keys are a ConfigError.
    """
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args

    sub = commands[args.command]
    actions = {action.dest: action for action in sub._actions if action.dest not in ("help", "config")}
    defaults = {}
    for key, raw in load_config_file(args.config).items():
        if key not in actions:
            raise ConfigError(f"{args.config}: unknown key '{key}' for '{args.command}'")
        defaults[key] = _config_value(actions[key], raw, args.config)
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def configure_logging(level: str) -> None:
    numeric = logging.getLevelName(str(level).upper())
    if not isinstance(numeric, int):
        raise ConfigError(f"Unknown log level: {level}")
    logging.basicConfig(level=numeric, format=LOG_FORMAT)
    logging.getLogger().setLevel(numeric)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    try:
        args = parse_args(argv)
        configure_logging(args.log_level)
        return args.handler(args)

    except SeedLabelError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return 1

    except Exception as e:
        logger.error(f"Internal error: {e}", exc_info=True)
        print(f"internal error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
