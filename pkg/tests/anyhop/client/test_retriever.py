"""Tests for the TF-IDF inverted index."""

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from anyhop.client._exceptions import (
    EmptyCorpusError,
    ModelMismatchError,
    UnknownDocumentError,
)
from anyhop.client.corpus import build_corpus
from anyhop.client.retriever import (
    InvertedIndex,
    build_index,
    extract_terms,
    query_terms,
)


WORDS = [
    "Kobale",
    "Rasuno",
    "Temira",
    "Pelika",
    "headquarters",
    "rivalry",
    "tosa",
    "lesa",
    "mofa",
    "missing",
    "[SEP]",
]


def brute_force_scores(corpus, query_text):
    """Score every document from raw term counts."""
    n_docs = len(corpus)
    doc_terms = {doc.id: extract_terms(doc.tokens) for doc in corpus}
    doc_freq: Counter[str] = Counter()
    for terms in doc_terms.values():
        doc_freq.update(terms.keys())
    query = query_terms(query_text)
    scores = {}
    for doc_id, terms in doc_terms.items():
        total = 0.0
        for term in sorted(query):
            if term not in terms:
                continue
            idf = math.log(1.0 + n_docs / doc_freq[term])
            total += (query[term] * idf) * ((1.0 + math.log(terms[term])) * idf)
        scores[doc_id] = total
    return scores


def test_extract_terms_unigrams_and_bigrams():
    """Test that terms are casefolded unigrams and adjacent bigrams."""
    assert extract_terms(["Ed", "Wood", "ed"]) == Counter(
        {"ed": 2, "wood": 1, "ed wood": 1, "wood ed": 1}
    )


def test_query_terms_do_not_cross_separators():
    """Test that bigrams stop at clue separators."""
    joined = query_terms("Temira headquarters")
    split = query_terms("Temira [SEP] headquarters")
    assert "temira headquarters" in joined
    assert "temira headquarters" not in split
    assert "[sep]" not in split
    assert split == Counter({"temira": 1, "headquarters": 1})


def test_build_index_layout(tiny_index):
    """Test vocabulary order and postings."""
    assert tiny_index.n_docs == 4
    assert tiny_index.doc_ids == ["d1", "d2", "d3", "d4"]
    assert tiny_index.terms == sorted(tiny_index.terms)
    assert tiny_index.postings("kobale") == [("d1", 3), ("d2", 1), ("d3", 1)]
    assert tiny_index.postings("kobale rasuno") == [("d1", 1)]
    assert tiny_index.postings("rasuno kobale") == [("d2", 1)]
    assert tiny_index.n_postings == int(tiny_index.indptr[-1])


def test_retrieve_unique_term():
    """Test the score of a term found in one document."""
    index = build_index(
        build_corpus(
            [
                {"id": "a", "title": "A", "text": "alpha"},
                {"id": "b", "title": "B", "text": "beta"},
                {"id": "c", "title": "C", "text": "gamma"},
                {"id": "d", "title": "D", "text": "delta"},
            ]
        )
    )
    [(doc_id, score)] = index.retrieve("beta", top_n=3)
    assert doc_id == "b"
    assert score == pytest.approx(math.log(5.0) ** 2)


def test_retrieve_orders_by_score_then_id(tiny_index):
    """Test descending scores with ties broken by ascending doc id."""
    results = tiny_index.retrieve("kobale", top_n=10)
    assert [doc_id for doc_id, _ in results] == ["d1", "d2", "d3"]
    assert results[1][1] == results[2][1]
    assert results[0][1] > results[1][1]


def test_retrieve_ties_between_identical_documents():
    """Test that equal documents come back in id order."""
    index = build_index(
        build_corpus(
            [
                {"id": "b", "title": "B", "text": "zeta eta"},
                {"id": "a", "title": "A", "text": "zeta eta"},
                {"id": "c", "title": "C", "text": "theta"},
            ]
        )
    )
    assert [doc_id for doc_id, _ in index.retrieve("zeta", top_n=2)] == ["a", "b"]
    assert [doc_id for doc_id, _ in index.retrieve("zeta", top_n=1)] == ["a"]


def test_retrieve_truncates_and_skips_zero_scores(tiny_index):
    """Test top-N truncation and that non-matching documents are dropped."""
    assert len(tiny_index.retrieve("kobale", top_n=2)) == 2
    assert tiny_index.retrieve("nothing here", top_n=5) == []
    assert tiny_index.retrieve("", top_n=5) == []


def test_retrieve_rejects_non_positive_top_n(tiny_index):
    """Test that top_n must be at least one."""
    with pytest.raises(ValueError, match="top_n"):
        tiny_index.retrieve("kobale", top_n=0)


def test_score_unknown_document(tiny_index):
    """Test that scoring an unknown id raises UnknownDocumentError."""
    with pytest.raises(UnknownDocumentError):
        tiny_index.score("kobale", "d9")


def test_score_without_overlap_is_zero(tiny_index):
    """Test that a document sharing no terms scores zero."""
    assert tiny_index.score("Pelika", "d4") == 0.0


@settings(
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
@given(st.lists(st.sampled_from(WORDS), max_size=8))
def test_scores_match_brute_force(tiny_corpus, words):
    """Test vectorized and single-document scores against a brute force."""
    index = build_index(tiny_corpus)
    text = " ".join(words)
    expected = brute_force_scores(tiny_corpus, text)
    query = index.build_query(text)
    all_scores = index.score_all(query)
    for i, doc_id in enumerate(index.doc_ids):
        assert index.score(query, doc_id) == all_scores[i]
        assert all_scores[i] == pytest.approx(expected[doc_id], rel=1e-12)

    results = index.retrieve(query, top_n=3)
    ranked = sorted(
        ((doc_id, s) for doc_id, s in expected.items() if s > 0),
        key=lambda item: (-item[1], item[0]),
    )
    assert [doc_id for doc_id, _ in results] == [doc_id for doc_id, _ in ranked[:3]]


def test_build_index_empty_corpus():
    """Test that an empty corpus cannot be indexed."""
    with pytest.raises(EmptyCorpusError):
        build_index(build_corpus([]))


def test_save_and_load(tiny_index, tmp_path):
    """Test that a loaded index scores like the original."""
    path = tmp_path / "index" / "index.npz"
    tiny_index.save(path)
    loaded = InvertedIndex.load(path)
    assert loaded.terms == tiny_index.terms
    assert loaded.doc_ids == tiny_index.doc_ids
    assert np.array_equal(loaded.post_weight, tiny_index.post_weight)
    assert loaded.retrieve("Kobale Rasuno", 4) == tiny_index.retrieve(
        "Kobale Rasuno", 4
    )


def test_load_missing_file(tmp_path):
    """Test loading an index that was never written."""
    with pytest.raises(FileNotFoundError, match="Could not find index"):
        InvertedIndex.load(tmp_path / "index.npz")


def test_load_rejects_other_format_version(tiny_index, tmp_path):
    """Test that a foreign format version raises ModelMismatchError."""
    path = tmp_path / "index.npz"
    np.savez(
        path,
        format_version=np.array(99),
        terms=np.array(tiny_index.terms, dtype=np.str_),
        doc_ids=np.array(tiny_index.doc_ids, dtype=np.str_),
        indptr=tiny_index.indptr,
        post_docs=tiny_index.post_docs,
        post_tf=tiny_index.post_tf,
    )
    with pytest.raises(ModelMismatchError, match="99"):
        InvertedIndex.load(path)
