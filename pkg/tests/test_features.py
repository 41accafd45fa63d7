"""Tokenization, vocabulary fitting, and TF-IDF transforms."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinconv import (
    FitError,
    SparseVector,
    ValidationError,
    Vocabulary,
    count_transform,
    fit_vocabulary,
    tfidf_transform,
    tokenize,
    vectors_to_csr,
)
from clinconv.features import doc_terms, load_vocabulary, save_vocabulary, vocabulary_hash

DOCS = [
    [["chest", "pain", "today"], ["no", "chest", "pain"]],
    [["chest", "pain"], ["short", "of", "breath"]],
    [["routine", "visit"]],
]


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("COVID-19, again?") == ["covid", "19", "again"]
    assert tokenize("...") == []


def test_doc_terms_keeps_bigrams_inside_segments():
    terms = list(doc_terms([["a", "b"], ["c"]]))
    assert terms == ["a", "b", "a b", "c"]


def test_doc_terms_accepts_flat_token_list():
    assert list(doc_terms(["a", "b"])) == ["a", "b", "a b"]


def test_fit_vocabulary_orders_by_first_appearance():
    vocab = fit_vocabulary(DOCS, min_df=2)
    assert vocab.terms.index("chest") < vocab.terms.index("pain")
    assert "chest pain" in vocab.terms  # bigram present in two documents
    assert "routine" not in vocab.terms  # document frequency 1


def test_fit_vocabulary_counts_document_frequency_once_per_doc():
    vocab = fit_vocabulary(DOCS, min_df=1)
    assert vocab.df[vocab.index["chest"]] == 2  # repeated inside doc counts once
    assert vocab.n_docs == 3


def test_fit_vocabulary_rejects_unreachable_min_df():
    with pytest.raises(FitError):
        fit_vocabulary(DOCS, min_df=4)


def test_count_transform_drops_out_of_vocabulary_terms():
    vocab = fit_vocabulary(DOCS, min_df=2)
    vector = count_transform(vocab, [["chest", "pain", "unseen"]])
    dense = vector.to_dense(len(vocab))
    assert dense[vocab.index["chest"]] == 1
    assert dense.sum() == 3  # chest, pain, "chest pain"


def test_tfidf_of_empty_document_is_zero_vector():
    vocab = fit_vocabulary(DOCS, min_df=2)
    vector = tfidf_transform(vocab, [])
    assert vector.nnz == 0 and vector.norm() == 0.0


def test_tfidf_norm_is_unit_for_nonempty_documents():
    vocab = fit_vocabulary(DOCS, min_df=1)
    for doc in DOCS:
        assert tfidf_transform(vocab, doc).norm() == pytest.approx(1.0, abs=1e-12)


def test_rarer_terms_weigh_more():
    vocab = fit_vocabulary(DOCS, min_df=1)
    vector = tfidf_transform(vocab, [["chest", "routine"]])
    dense = vector.to_dense(len(vocab))
    assert dense[vocab.index["routine"]] > dense[vocab.index["chest"]]


def test_sparse_vector_requires_ascending_indices():
    with pytest.raises(ValidationError):
        SparseVector(indices=np.array([3, 1]), values=np.array([1.0, 2.0]))


def test_vectors_to_csr_round_trips_dense():
    vocab = fit_vocabulary(DOCS, min_df=1)
    vectors = [tfidf_transform(vocab, doc) for doc in DOCS]
    X = vectors_to_csr(vectors, len(vocab))
    dense = np.vstack([v.to_dense(len(vocab)) for v in vectors])
    np.testing.assert_allclose(X.toarray(), dense, atol=0)


def test_vectors_to_csr_rejects_out_of_range_index():
    bad = SparseVector(indices=np.array([5]), values=np.array([1.0]))
    with pytest.raises(ValidationError):
        vectors_to_csr([bad], 3)


def test_vocabulary_save_load_round_trip(tmp_path):
    vocab = fit_vocabulary(DOCS, min_df=1)
    path = tmp_path / "vocab.json"
    save_vocabulary(path, vocab)
    loaded = load_vocabulary(path)
    assert loaded.terms == vocab.terms
    assert loaded.n_docs == vocab.n_docs
    assert vocabulary_hash(loaded) == vocabulary_hash(vocab)


def test_duplicate_terms_rejected():
    with pytest.raises(ValidationError):
        Vocabulary(terms=["a", "a"], df=np.array([1, 1]), n_docs=1, min_df=1)


@st.composite
def token_docs(draw):
    token = st.text(alphabet="abcdef", min_size=1, max_size=3)
    segment = st.lists(token, min_size=0, max_size=5)
    return draw(st.lists(st.lists(segment, min_size=0, max_size=4), min_size=1, max_size=6))


@given(token_docs())
@settings(max_examples=80, deadline=None)
def test_tfidf_norm_is_always_zero_or_one(docs):
    try:
        vocab = fit_vocabulary(docs, min_df=1)
    except FitError:
        return  # every document empty
    for doc in docs:
        norm = tfidf_transform(vocab, doc).norm()
        assert norm == pytest.approx(0.0, abs=1e-12) or norm == pytest.approx(
            1.0, abs=1e-12
        )


@given(token_docs(), st.integers(min_value=1, max_value=3))
@settings(max_examples=80, deadline=None)
def test_vocabulary_terms_meet_min_df(docs, min_df):
    try:
        vocab = fit_vocabulary(docs, min_df=min_df)
    except FitError:
        return
    assert np.all(vocab.df >= min_df)
    assert len(set(vocab.terms)) == len(vocab.terms)
