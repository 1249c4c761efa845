"""
Corpus ingestion for seedlabel.
Handles tokenizing raw documents, building the vocabulary and document-frequency
index, persisting corpus bundles, and loading seed-word configuration.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence
from collections import Counter
import gzip
import hashlib
import json
import logging
import os
import re

import numpy as np
import scipy.sparse as sp

from seedlabel.config import (
    CORPUS_FORMAT,
    CORPUS_FORMAT_VERSION,
    LOWERCASE,
    MIN_DF,
    MIN_TOKEN_LEN,
    STOPWORDS_FILE,
)
from seedlabel.errors import ConfigError, ConsistencyError, DataError

# Configure logging
logger = logging.getLogger(__name__)

# Runs of letters and digits; everything else separates tokens
TOKEN_PATTERN = re.compile(r"[^\W_]+")
SEED_SEPARATOR = re.compile(r"[\s,]+")


class RawDocument(NamedTuple):
    """One input record: external id, raw text and optional gold labels."""

    doc_id: str
    text: str
    labels: Optional[List[str]] = None


@dataclass(frozen=True)
class PreprocessOptions:
    """Filtering rules applied by :func:`preprocess`."""

    stopwords: FrozenSet[str] = frozenset()
    min_token_len: int = MIN_TOKEN_LEN
    min_df: int = MIN_DF
    lowercase: bool = LOWERCASE

    def __post_init__(self):
        if self.min_token_len < 1:
            raise ConfigError(f"min_token_len must be >= 1, got {self.min_token_len}")
        if self.min_df < 1:
            raise ConfigError(f"min_df must be >= 1, got {self.min_df}")

    def to_dict(self) -> Dict[str, object]:
        return {
            "stopwords": sorted(self.stopwords),
            "min_token_len": self.min_token_len,
            "min_df": self.min_df,
            "lowercase": self.lowercase,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "PreprocessOptions":
        return cls(
            stopwords=frozenset(data.get("stopwords", [])),
            min_token_len=int(data.get("min_token_len", MIN_TOKEN_LEN)),
            min_df=int(data.get("min_df", MIN_DF)),
            lowercase=bool(data.get("lowercase", LOWERCASE)),
        )


@dataclass(frozen=True, eq=False)
class Corpus:
    """
    Tokenized documents over a dense integer vocabulary.

    ``df_index`` is a D x W sparse incidence matrix in CSC layout: column ``w``
    lists the documents containing word ``w``. ``term_matrix`` holds the
    per-document token counts in CSR layout.
    """

    documents: List[np.ndarray]
    doc_ids: List[str]
    vocabulary: List[str]
    gold_labels: Optional[List[FrozenSet[str]]] = None
    options: Optional[PreprocessOptions] = None
    word_to_id: Dict[str, int] = field(init=False, repr=False)
    doc_lengths: np.ndarray = field(init=False, repr=False)
    term_matrix: sp.csr_matrix = field(init=False, repr=False)
    df_index: sp.csc_matrix = field(init=False, repr=False)

    def __post_init__(self):
        num_words = len(self.vocabulary)
        if len(self.doc_ids) != len(self.documents):
            raise DataError(
                f"{len(self.doc_ids)} document ids for {len(self.documents)} documents"
            )
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise DataError("Document ids must be unique")
        if self.gold_labels is not None and len(self.gold_labels) != len(self.documents):
            raise DataError("Gold labels must cover every document")

        word_to_id = {word: idx for idx, word in enumerate(self.vocabulary)}
        if len(word_to_id) != num_words:
            raise DataError("Vocabulary contains duplicate words")

        documents = [np.asarray(doc, dtype=np.int64) for doc in self.documents]
        for doc_id, doc in zip(self.doc_ids, documents):
            if doc.size and (doc.min() < 0 or doc.max() >= num_words):
                raise DataError(f"Document {doc_id} has token ids outside [0, {num_words})")

        lengths = np.array([doc.size for doc in documents], dtype=np.int64)
        rows = np.repeat(np.arange(len(documents)), lengths)
        cols = np.concatenate(documents) if documents else np.zeros(0, dtype=np.int64)
        counts = sp.coo_matrix(
            (np.ones(cols.size, dtype=np.int64), (rows, cols)),
            shape=(len(documents), num_words),
        ).tocsr()
        counts.sum_duplicates()
        incidence = counts.copy()
        incidence.data[:] = 1
        incidence = incidence.tocsc()
        incidence.sort_indices()

        object.__setattr__(self, "documents", documents)
        object.__setattr__(self, "word_to_id", word_to_id)
        object.__setattr__(self, "doc_lengths", lengths)
        object.__setattr__(self, "term_matrix", counts)
        object.__setattr__(self, "df_index", incidence)

    @property
    def num_documents(self) -> int:
        return len(self.documents)

    @property
    def num_words(self) -> int:
        return len(self.vocabulary)

    @property
    def total_tokens(self) -> int:
        return int(self.doc_lengths.sum())

    @property
    def document_frequency(self) -> np.ndarray:
        """df(w) for every word id."""
        return np.diff(self.df_index.indptr)

    def flat_tokens(self):
        """Concatenated token ids and the D+1 document offsets into them."""
        offsets = np.zeros(self.num_documents + 1, dtype=np.int64)
        np.cumsum(self.doc_lengths, out=offsets[1:])
        tokens = np.concatenate(self.documents) if self.documents else np.zeros(0, dtype=np.int64)
        return tokens.astype(np.int64), offsets

    def content_hash(self) -> str:
        """SHA-256 over vocabulary, document ids and token streams."""
        digest = hashlib.sha256()
        digest.update("\n".join(self.vocabulary).encode("utf-8"))
        digest.update(b"\x00")
        digest.update("\n".join(self.doc_ids).encode("utf-8"))
        for doc in self.documents:
            digest.update(b"\x01")
            digest.update(doc.astype("<i8").tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class CorpusStats:
    """Summary counts in the layout of a dataset statistics table."""

    documents: int
    vocabulary: int
    avg_len: float
    total_tokens: int
    empty_documents: int
    cardinality: Optional[float] = None
    label_count: Optional[int] = None


class Preprocessor:
    """Tokenizes and filters raw text according to PreprocessOptions."""

    def __init__(self, options: PreprocessOptions):
        """Initialize the preprocessor with its filtering rules."""
        self.options = options

    def tokenize(self, text: str) -> List[str]:
        """Split on non-alphanumeric characters, then drop stopwords and short tokens."""
        if self.options.lowercase:
            text = text.lower()
        return [
            token for token in TOKEN_PATTERN.findall(text)
            if len(token) >= self.options.min_token_len and token not in self.options.stopwords
        ]

    def build(self, raw_documents: Sequence[RawDocument]) -> Corpus:
        """
        Build a Corpus from raw documents.

        Document frequency for the min_df cut is counted after stopword and
        length filtering. Word ids are assigned in first-occurrence order.

        Args:
            raw_documents: Sequence of (id, text, optional labels) records

        Returns:
            Corpus with vocabulary, df_index and gold labels (when every record has labels)
        """
        if not raw_documents:
            raise DataError("No documents to preprocess")

        tokenized = [self.tokenize(RawDocument(*record).text) for record in raw_documents]

        document_frequency = Counter()
        for tokens in tokenized:
            document_frequency.update(set(tokens))
        kept = {word for word, df in document_frequency.items() if df >= self.options.min_df}

        word_to_id: Dict[str, int] = {}
        documents = []
        for tokens in tokenized:
            ids = []
            for token in tokens:
                if token not in kept:
                    continue
                if token not in word_to_id:
                    word_to_id[token] = len(word_to_id)
                ids.append(word_to_id[token])
            documents.append(np.array(ids, dtype=np.int64))

        if not word_to_id:
            raise DataError("Corpus is empty after preprocessing")

        records = [RawDocument(*record) for record in raw_documents]
        doc_ids = [str(record.doc_id) for record in records]

        empty = [doc_id for doc_id, doc in zip(doc_ids, documents) if doc.size == 0]
        if empty:
            preview = ", ".join(empty[:5])
            logger.warning(
                f"{len(empty)} document(s) empty after preprocessing (kept): {preview}"
                + (" ..." if len(empty) > 5 else "")
            )

        gold = None
        unlabeled = sum(1 for record in records if record.labels is None)
        if unlabeled == 0:
            gold = [frozenset(str(label) for label in record.labels) for record in records]
        elif unlabeled < len(records):
            logger.warning(
                f"{unlabeled} of {len(records)} records have no labels; "
                f"gold labels are dropped for the whole corpus"
            )

        corpus = Corpus(
            documents=documents,
            doc_ids=doc_ids,
            vocabulary=list(word_to_id),
            gold_labels=gold,
            options=self.options,
        )
        logger.info(
            f"Preprocessed {corpus.num_documents} documents: W={corpus.num_words}, "
            f"{corpus.total_tokens} tokens ({len(document_frequency) - len(kept)} rare words removed)"
        )
        return corpus


def preprocess(raw_documents: Sequence[RawDocument], opts: PreprocessOptions) -> Corpus:
    """Tokenize, filter and index raw documents (see :meth:`Preprocessor.build`)."""
    return Preprocessor(opts).build(raw_documents)


# ============================================================================
# FILE FORMATS
# ============================================================================

def _read_lines(path: str) -> List[str]:
    """Lines of a UTF-8 text file; undecodable bytes are a data error."""
    try:
        with open(path, encoding="utf-8") as handle:
            return handle.readlines()
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: not valid UTF-8 ({e})") from e


def read_stopwords(path: str) -> FrozenSet[str]:
    """Read a stopword list, one word per line."""
    if not os.path.exists(path):
        raise ConfigError(f"Stopword file not found: {path}")
    return frozenset(line.strip() for line in _read_lines(path) if line.strip())


def read_jsonl(path: str) -> List[RawDocument]:
    """
    Read raw documents from a JSON-lines file.

    Each line holds ``{"id": str, "text": str, "labels": [str, ...]}`` with
    ``labels`` optional.

    Args:
        path: Input file path

    Returns:
        List of RawDocument records in file order
    """
    if not os.path.exists(path):
        raise ConfigError(f"Input file not found: {path}")

    documents = []
    for line_number, line in enumerate(_read_lines(path), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}:{line_number}: invalid JSON ({e})") from e
        if not isinstance(record, dict) or "id" not in record or "text" not in record:
            raise DataError(f"{path}:{line_number}: record needs 'id' and 'text' fields")
        if not isinstance(record["text"], str):
            raise DataError(f"{path}:{line_number}: 'text' must be a string")
        labels = record.get("labels")
        if labels is not None and not isinstance(labels, list):
            raise DataError(f"{path}:{line_number}: 'labels' must be a list")
        documents.append(RawDocument(
            doc_id=str(record["id"]),
            text=record["text"],
            labels=[str(label) for label in labels] if labels is not None else None,
        ))

    logger.info(f"Read {len(documents)} documents from {path}")
    return documents


def save_corpus(corpus: Corpus, path: str) -> None:
    """Write a corpus bundle (gzip-compressed JSON)."""
    bundle = {
        "format": CORPUS_FORMAT,
        "version": CORPUS_FORMAT_VERSION,
        "vocabulary": corpus.vocabulary,
        "doc_ids": corpus.doc_ids,
        "documents": [doc.tolist() for doc in corpus.documents],
        "gold_labels": (
            [sorted(labels) for labels in corpus.gold_labels]
            if corpus.gold_labels is not None else None
        ),
        "options": corpus.options.to_dict() if corpus.options is not None else None,
    }
    with gzip.open(path, "wt", encoding="utf-8") as handle:
        json.dump(bundle, handle)
    logger.info(f"Saved corpus bundle to {path}")


def load_corpus(path: str) -> Corpus:
    """Read a corpus bundle written by :func:`save_corpus`."""
    if not os.path.exists(path):
        raise ConfigError(f"Corpus bundle not found: {path}")
    try:
        with gzip.open(path, "rt", encoding="utf-8") as handle:
            bundle = json.load(handle)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"Cannot read corpus bundle {path}: {e}") from e

    if bundle.get("format") != CORPUS_FORMAT:
        raise DataError(f"{path} is not a corpus bundle")
    if bundle.get("version") != CORPUS_FORMAT_VERSION:
        raise ConfigError(f"Unsupported corpus bundle version: {bundle.get('version')}")

    gold = bundle.get("gold_labels")
    options = bundle.get("options")
    return Corpus(
        documents=[np.array(doc, dtype=np.int64) for doc in bundle["documents"]],
        doc_ids=bundle["doc_ids"],
        vocabulary=bundle["vocabulary"],
        gold_labels=[frozenset(labels) for labels in gold] if gold is not None else None,
        options=PreprocessOptions.from_dict(options) if options is not None else None,
    )


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Aggregate D, W, average length and label cardinality."""
    num_docs = corpus.num_documents
    cardinality = None
    label_count = None
    if corpus.gold_labels is not None and num_docs:
        cardinality = float(np.mean([len(labels) for labels in corpus.gold_labels]))
        label_count = len(set().union(*corpus.gold_labels))
    return CorpusStats(
        documents=num_docs,
        vocabulary=corpus.num_words,
        avg_len=float(corpus.doc_lengths.mean()) if num_docs else 0.0,
        total_tokens=corpus.total_tokens,
        empty_documents=int((corpus.doc_lengths == 0).sum()),
        cardinality=cardinality,
        label_count=label_count,
    )


def format_stats(stats: CorpusStats) -> str:
    """Render CorpusStats as a short table."""
    lines = [
        f"#documents   {stats.documents:,}",
        f"#vocabulary  {stats.vocabulary:,}",
        f"#avgLen      {stats.avg_len:.2f}",
        f"#tokens      {stats.total_tokens:,}",
        f"#empty       {stats.empty_documents:,}",
    ]
    if stats.cardinality is not None:
        lines.append(f"#categories  {stats.label_count}")
        lines.append(f"#cardinality {stats.cardinality:.2f}")
    return "\n".join(lines)


# ============================================================================
# SEED WORDS
# ============================================================================

@dataclass(frozen=True, eq=False)
class SeedConfig:
    """
    Category names and their seed words.

    ``seed_words`` keeps the words as written; ``seeds`` holds the resolved
    vocabulary ids and is None until :func:`resolve_seeds` has run.
    """

    categories: List[str]
    seed_words: List[List[str]]
    seeds: Optional[List[np.ndarray]] = None

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    @property
    def is_resolved(self) -> bool:
        return self.seeds is not None

    def content_hash(self) -> str:
        self._require_resolved()
        digest = hashlib.sha256()
        for name, ids in zip(self.categories, self.seeds):
            digest.update(name.encode("utf-8"))
            digest.update(b"\x00")
            digest.update(np.asarray(ids, dtype="<i8").tobytes())
        return digest.hexdigest()

    def _require_resolved(self):
        if self.seeds is None:
            raise ConsistencyError("Seed configuration has not been resolved against a corpus")


def parse_seed_file(path: str, lowercase: bool = True) -> SeedConfig:
    """
    Parse a seed file: one ``name: word word ...`` line per category.

    Blank lines and lines starting with ``#`` are ignored; commas are accepted
    between seed words.
    """
    if not os.path.exists(path):
        raise ConfigError(f"Seed file not found: {path}")

    categories: List[str] = []
    seed_words: List[List[str]] = []
    for line_number, line in enumerate(_read_lines(path), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise DataError(f"{path}:{line_number}: expected 'name: seed words'")
        name, _, words = line.partition(":")
        name = name.strip()
        if not name:
            raise DataError(f"{path}:{line_number}: empty category name")
        if name in categories:
            raise DataError(f"{path}:{line_number}: duplicate category '{name}'")
        words = [w.lower() if lowercase else w for w in SEED_SEPARATOR.split(words.strip()) if w]
        if not words:
            raise DataError(f"{path}:{line_number}: category '{name}' has no seed words")
        categories.append(name)
        seed_words.append(list(dict.fromkeys(words)))

    if len(categories) < 2:
        raise DataError(f"{path}: at least 2 categories are required, found {len(categories)}")
    return SeedConfig(categories=categories, seed_words=seed_words)


def resolve_seeds(config: SeedConfig, corpus: Corpus) -> SeedConfig:
    """
    Map seed words to vocabulary ids.

    Words missing from the vocabulary are dropped with a warning; a category
    left without seeds is an error.
    """
    resolved = []
    for name, words in zip(config.categories, config.seed_words):
        ids = []
        for word in words:
            word_id = corpus.word_to_id.get(word)
            if word_id is None:
                logger.warning(
                    f"Seed word '{word}' of category '{name}' is not in the vocabulary "
                    f"(absent or removed by preprocessing filters); dropped"
                )
                continue
            ids.append(word_id)
        if not ids:
            raise DataError(f"Category '{name}' has no seed word in the vocabulary")
        resolved.append(np.array(ids, dtype=np.int64))

    logger.info(
        f"Resolved {sum(len(ids) for ids in resolved)} seed words "
        f"for {len(config.categories)} categories"
    )
    return SeedConfig(categories=list(config.categories), seed_words=config.seed_words, seeds=resolved)


def load_seed_config(path: str, corpus: Corpus) -> SeedConfig:
    """Parse a seed file and resolve it against the corpus vocabulary."""
    lowercase = corpus.options.lowercase if corpus.options is not None else True
    return resolve_seeds(parse_seed_file(path, lowercase=lowercase), corpus)


def seed_presence(corpus: Corpus, seeds: SeedConfig) -> np.ndarray:
    """
    D x C indicator: 1 when document d contains at least one seed word of category c.

    Args:
        corpus: Preprocessed corpus
        seeds: Seed configuration resolved against this corpus

    Returns:
        uint8 matrix of shape (D, C)
    """
    seeds._require_resolved()
    indicator = np.zeros((corpus.num_documents, seeds.num_categories), dtype=np.uint8)
    for c, ids in enumerate(seeds.seeds):
        hits = np.asarray(corpus.df_index[:, ids].sum(axis=1)).ravel()
        indicator[:, c] = hits > 0
    return indicator


def gold_matrix(corpus: Corpus, seeds: SeedConfig) -> np.ndarray:
    """
    D x C boolean matrix of gold labels in seed-config category order.

    Gold labels naming no configured category are ignored with a warning.
    """
    if corpus.gold_labels is None:
        raise DataError("Corpus has no gold labels")

    index = {name: c for c, name in enumerate(seeds.categories)}
    gold = np.zeros((corpus.num_documents, seeds.num_categories), dtype=bool)
    unknown: Counter = Counter()
    for d, labels in enumerate(corpus.gold_labels):
        for label in labels:
            if label in index:
                gold[d, index[label]] = True
            else:
                unknown[label] += 1
    if unknown:
        logger.warning(f"Ignoring gold labels outside the category list: {dict(unknown)}")
    return gold


def load_word_vectors(path: str, vocabulary: Optional[Iterable[str]] = None) -> Dict[str, np.ndarray]:
    """
    Load word vectors from the common text layout (``word v1 v2 ...`` per line).

    An optional first line holding only ``count dim`` is skipped. Only words in
    ``vocabulary`` are kept when it is given.
    """
    if not os.path.exists(path):
        raise ConfigError(f"Vector file not found: {path}")

    wanted = set(vocabulary) if vocabulary is not None else None
    vectors: Dict[str, np.ndarray] = {}
    dimension = None
    with open(path, encoding="utf-8", errors="replace") as handle:
        for line_number, line in enumerate(handle, 1):
            parts = line.rstrip().split()
            if not parts:
                continue
            if line_number == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            word, values = parts[0], parts[1:]
            if dimension is None:
                dimension = len(values)
            elif len(values) != dimension:
                raise DataError(
                    f"{path}:{line_number}: vector has {len(values)} values, expected {dimension}"
                )
            if wanted is not None and word not in wanted:
                continue
            try:
                vectors[word] = np.array(values, dtype=np.float64)
            except ValueError as e:
                raise DataError(f"{path}:{line_number}: non-numeric vector value") from e

    logger.info(f"Loaded {len(vectors)} word vectors (dim={dimension}) from {path}")
    return vectors


# Singleton instance
_default_stopwords = None


def get_default_stopwords() -> FrozenSet[str]:
    """Get or load the shipped stopword list."""
    global _default_stopwords
    if _default_stopwords is None:
        _default_stopwords = read_stopwords(STOPWORDS_FILE)
    return _default_stopwords
