"""Bag-of-ngram features: tokenization, vocabulary fitting, TF-IDF weighting.

A document is a list of token segments (one segment per utterance); bigrams
are formed inside a segment and never across segment boundaries. A plain list
of tokens is accepted as a single segment.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import FitError, ValidationError
from .jsonio import atomic_write_text, json_loads, sha256_text

_TOKEN = re.compile(r"[0-9a-z]+")

Doc = Sequence  # Sequence[str] or Sequence[Sequence[str]]


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; punctuation splits. "COVID-19" -> [covid, 19]."""
    return _TOKEN.findall(text.lower())


def _as_segments(doc: Doc) -> list[Sequence[str]]:
    if not doc:
        return []
    if isinstance(doc[0], str):
        return [doc]
    return list(doc)


def doc_terms(doc: Doc) -> Iterator[str]:
    """Stream unigrams and within-segment adjacency bigrams.

    Yield order is positional: each token, then the bigram it completes, so
    first-seen vocabulary order is deterministic.
    """
    for segment in _as_segments(doc):
        previous = None
        for token in segment:
            yield token
            if previous is not None:
                yield f"{previous} {token}"
            previous = token


@dataclass
class Vocabulary:
    terms: list[str]
    df: np.ndarray  # document frequency per term
    n_docs: int
    min_df: int
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.df = np.asarray(self.df, dtype=np.int64)
        if self.df.shape != (len(self.terms),):
            raise ValidationError("df length must match terms")
        self.index = {term: i for i, term in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise ValidationError("vocabulary terms must be unique")

    def __len__(self) -> int:
        return len(self.terms)

    def idf(self) -> np.ndarray:
        # Smoothed log ratio, floored at 1 by the +1 term.
        return np.log((1.0 + self.n_docs) / (1.0 + self.df)) + 1.0


@dataclass
class SparseVector:
    """(index, weight) pairs with strictly ascending indices."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.indices.shape != self.values.shape:
            raise ValidationError("sparse vector indices/values length mismatch")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise ValidationError("sparse vector indices must be strictly ascending")

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))

    def to_dense(self, size: int) -> np.ndarray:
        dense = np.zeros(size)
        dense[self.indices] = self.values
        return dense


def fit_vocabulary(docs: Iterable[Doc], min_df: int = 2) -> Vocabulary:
    """Collect unigrams and bigrams with document frequency >= min_df.

    Terms keep first-seen order, which makes feature indices reproducible for
    a given corpus ordering.
    """
    if min_df < 1:
        raise ValidationError("min_df must be >= 1")
    order: dict[str, None] = {}
    df_counts: Counter[str] = Counter()
    n_docs = 0
    for doc in docs:
        n_docs += 1
        seen: set[str] = set()
        for term in doc_terms(doc):
            if term not in order:
                order[term] = None
            if term not in seen:
                seen.add(term)
                df_counts[term] += 1
    terms = [term for term in order if df_counts[term] >= min_df]
    if not terms:
        raise FitError(
            f"empty vocabulary: no term reaches document frequency {min_df} "
            f"across {n_docs} documents"
        )
    df = np.array([df_counts[term] for term in terms], dtype=np.int64)
    return Vocabulary(terms=terms, df=df, n_docs=n_docs, min_df=min_df)


def _term_counts(vocab: Vocabulary, doc: Doc) -> tuple[np.ndarray, np.ndarray]:
    counts: Counter[int] = Counter()
    for term in doc_terms(doc):
        j = vocab.index.get(term)
        if j is not None:
            counts[j] += 1
    if not counts:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[j] for j in indices], dtype=np.float64)
    return indices, values


def count_transform(vocab: Vocabulary, doc: Doc) -> SparseVector:
    """Raw in-vocabulary term counts. Out-of-vocabulary terms are dropped."""
    indices, values = _term_counts(vocab, doc)
    return SparseVector(indices=indices, values=values)


def tfidf_transform(vocab: Vocabulary, doc: Doc) -> SparseVector:
    """TF-IDF with idf = ln((1+n_docs)/(1+df)) + 1, L2-normalized.

    A document with no in-vocabulary terms maps to the zero vector.
    """
    indices, values = _term_counts(vocab, doc)
    if len(indices) == 0:
        return SparseVector(indices=indices, values=values)
    weights = values * vocab.idf()[indices]
    norm = np.sqrt(np.sum(weights**2))
    if norm > 0:
        weights = weights / norm
    return SparseVector(indices=indices, values=weights)


def vectors_to_csr(vectors: Sequence[SparseVector], n_features: int) -> sp.csr_matrix:
    data: list[np.ndarray] = []
    indices: list[np.ndarray] = []
    indptr = [0]
    for vector in vectors:
        if vector.nnz and vector.indices[-1] >= n_features:
            raise ValidationError(
                f"sparse vector index {int(vector.indices[-1])} outside "
                f"feature space of size {n_features}"
            )
        data.append(vector.values)
        indices.append(vector.indices)
        indptr.append(indptr[-1] + vector.nnz)
    if not vectors:
        return sp.csr_matrix((0, n_features))
    return sp.csr_matrix(
        (
            np.concatenate(data) if data else np.empty(0),
            np.concatenate(indices) if indices else np.empty(0, dtype=np.int64),
            np.array(indptr),
        ),
        shape=(len(vectors), n_features),
    )


def vocabulary_hash(vocab: Vocabulary) -> str:
    payload = json.dumps(
        {
            "terms": vocab.terms,
            "df": vocab.df.tolist(),
            "n_docs": vocab.n_docs,
            "min_df": vocab.min_df,
        },
        sort_keys=True,
    )
    return sha256_text(payload)


def vocabulary_to_record(vocab: Vocabulary) -> dict:
    return {
        "terms": list(vocab.terms),
        "df": vocab.df.tolist(),
        "n_docs": vocab.n_docs,
        "min_df": vocab.min_df,
    }


def vocabulary_from_record(record: dict) -> Vocabulary:
    return Vocabulary(
        terms=list(record["terms"]),
        df=np.asarray(record["df"], dtype=np.int64),
        n_docs=int(record["n_docs"]),
        min_df=int(record["min_df"]),
    )


def save_vocabulary(path: str | Path, vocab: Vocabulary) -> None:
    atomic_write_text(path, json.dumps(vocabulary_to_record(vocab)) + "\n")


def load_vocabulary(path: str | Path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as handle:
        return vocabulary_from_record(json_loads(handle.read()))
