"""TF-IDF retrieval over an inverted index.

Terms are casefolded unigrams and adjacent bigrams (two tokens joined by a
space). Scores are

    score(q, d) = sum_t c(t, q) * idf(t) * (1 + ln c(t, d)) * idf(t)
    idf(t) = ln(1 + n_docs / df(t))

with no length normalization. Postings are stored in compressed sparse row
arrays; per-term contributions are accumulated in ascending term id order, which
keeps the vectorized scores bit-identical to scoring one document at a time.
"""

import logging
import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import numpy.typing as npt

from anyhop.client._client_vars import INDEX_FORMAT_VERSION, SEP_TOKEN
from anyhop.client._exceptions import (
    EmptyCorpusError,
    ModelMismatchError,
    UnknownDocumentError,
)
from anyhop.client.corpus import tokenize
from anyhop.client.models import Corpus


logger = logging.getLogger(__name__)


def extract_terms(tokens: Sequence[str]) -> Counter[str]:
    """Count casefolded unigrams and adjacent bigrams of a token sequence."""
    folded = [token.casefold() for token in tokens]
    counts = Counter(folded)
    counts.update(f"{a} {b}" for a, b in zip(folded, folded[1:]))
    return counts


def query_terms(text: str) -> Counter[str]:
    """Count the terms of a query.

    ``[SEP]`` markers split the query into segments; bigrams never cross a
    marker and the marker itself is not a term.
    """
    counts: Counter[str] = Counter()
    for segment in text.split(SEP_TOKEN):
        counts.update(extract_terms(tokenize(segment)))
    return counts


@dataclass(frozen=True)
class SparseQuery:
    """Query weights ``c(t, q) * idf(t)`` keyed by term id."""

    weights: dict[int, float]


class InvertedIndex:
    """Immutable inverted index.

    Parameters
    ----------
    terms : list[str]
        Vocabulary in term id order, sorted
    doc_ids : list[str]
        Document ids in internal order, sorted
    indptr : np.ndarray
        Offsets of each term's postings, length ``len(terms) + 1``
    post_docs : np.ndarray
        Internal document index of every posting, ascending within a term
    post_tf : np.ndarray
        Term frequency of every posting
    """

    def __init__(
        self,
        terms: list[str],
        doc_ids: list[str],
        indptr: npt.NDArray[np.int64],
        post_docs: npt.NDArray[np.int32],
        post_tf: npt.NDArray[np.int32],
    ):
        self.terms = terms
        self.doc_ids = doc_ids
        self.vocab = {term: term_id for term_id, term in enumerate(terms)}
        self._doc_index = {doc_id: i for i, doc_id in enumerate(doc_ids)}
        self.indptr = indptr
        self.post_docs = post_docs
        self.post_tf = post_tf
        self.doc_freq = np.diff(indptr)

        n_docs = len(doc_ids)
        self.idf = np.array(
            [math.log(1.0 + n_docs / int(df)) for df in self.doc_freq],
            dtype=np.float64,
        )
        log_tf = {int(tf): 1.0 + math.log(int(tf)) for tf in np.unique(post_tf)}
        tf_weight = np.array([log_tf[int(tf)] for tf in post_tf], dtype=np.float64)
        term_of_posting = np.repeat(np.arange(len(terms)), self.doc_freq)
        self.post_weight = tf_weight * self.idf[term_of_posting]

    @property
    def n_docs(self) -> int:
        """Number of indexed documents."""
        return len(self.doc_ids)

    @property
    def n_postings(self) -> int:
        """Total number of postings."""
        return int(self.post_docs.shape[0])

    def postings(self, term: Union[str, int]) -> list[tuple[str, int]]:
        """Return ``(doc id, term frequency)`` pairs of a term, by doc id."""
        term_id = self.vocab[term] if isinstance(term, str) else term
        lo, hi = self.indptr[term_id], self.indptr[term_id + 1]
        return [
            (self.doc_ids[int(doc)], int(tf))
            for doc, tf in zip(self.post_docs[lo:hi], self.post_tf[lo:hi])
        ]

    def build_query(self, text: str) -> SparseQuery:
        """Weight the in-vocabulary terms of a query text."""
        weights = {}
        for term, count in query_terms(text).items():
            term_id = self.vocab.get(term)
            if term_id is not None:
                weights[term_id] = count * float(self.idf[term_id])
        return SparseQuery(weights=weights)

    def score(self, query: Union[SparseQuery, str], doc_id: str) -> float:
        """Score one document against a query.

        Parameters
        ----------
        query : SparseQuery or str
            Weighted query or raw query text
        doc_id : str
            Document to score

        Returns
        -------
        float
            Non-negative score, 0 when no terms overlap

        Raises
        ------
        UnknownDocumentError
            If the document is not indexed
        """
        if doc_id not in self._doc_index:
            raise UnknownDocumentError(f"Unknown document id: {doc_id}")
        if isinstance(query, str):
            query = self.build_query(query)
        doc = self._doc_index[doc_id]
        total = 0.0
        for term_id in sorted(query.weights):
            lo, hi = self.indptr[term_id], self.indptr[term_id + 1]
            pos = lo + int(np.searchsorted(self.post_docs[lo:hi], doc))
            if pos < hi and self.post_docs[pos] == doc:
                total += float(query.weights[term_id] * self.post_weight[pos])
        return total

    def score_all(self, query: SparseQuery) -> npt.NDArray[np.float64]:
        """Score every document, in internal document order."""
        scores = np.zeros(self.n_docs, dtype=np.float64)
        for term_id in sorted(query.weights):
            lo, hi = self.indptr[term_id], self.indptr[term_id + 1]
            scores[self.post_docs[lo:hi]] += (
                query.weights[term_id] * self.post_weight[lo:hi]
            )
        return scores

    def retrieve(
        self, query: Union[SparseQuery, str], top_n: int
    ) -> list[tuple[str, float]]:
        """Return the top-N documents with a positive score.

        Parameters
        ----------
        query : SparseQuery or str
            Weighted query or raw query text
        top_n : int
            Maximum number of results, at least 1

        Returns
        -------
        list[tuple[str, float]]
            ``(doc id, score)`` by descending score, ties by ascending doc id
        """
        if top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {top_n}")
        if isinstance(query, str):
            query = self.build_query(query)
        scores = self.score_all(query)
        candidates = np.flatnonzero(scores > 0)
        order = candidates[np.lexsort((candidates, -scores[candidates]))][:top_n]
        return [(self.doc_ids[int(i)], float(scores[i])) for i in order]

    def save(self, path: Union[str, Path]) -> None:
        """Write the index to an ``.npz`` archive."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as f:
            np.savez(
                f,
                format_version=np.array(INDEX_FORMAT_VERSION),
                terms=np.array(self.terms, dtype=np.str_),
                doc_ids=np.array(self.doc_ids, dtype=np.str_),
                indptr=self.indptr,
                post_docs=self.post_docs,
                post_tf=self.post_tf,
            )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "InvertedIndex":
        """Read an index written by :meth:`save`.

        Raises
        ------
        FileNotFoundError
            If the file does not exist
        ModelMismatchError
            If the file has another format version
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Could not find index: {path}")
        with np.load(path, allow_pickle=False) as data:
            version = int(data["format_version"])
            if version != INDEX_FORMAT_VERSION:
                raise ModelMismatchError(
                    f"Index {path} has format version {version}, "
                    f"expected {INDEX_FORMAT_VERSION}"
                )
            return cls(
                terms=[str(term) for term in data["terms"]],
                doc_ids=[str(doc_id) for doc_id in data["doc_ids"]],
                indptr=data["indptr"].astype(np.int64),
                post_docs=data["post_docs"].astype(np.int32),
                post_tf=data["post_tf"].astype(np.int32),
            )


def build_index(corpus: Corpus) -> InvertedIndex:
    """Build the inverted index of a corpus.

    Parameters
    ----------
    corpus : Corpus
        Non-empty corpus

    Returns
    -------
    InvertedIndex
        Index over casefolded unigrams and bigrams

    Raises
    ------
    EmptyCorpusError
        If the corpus has no documents
    """
    if len(corpus) == 0:
        raise EmptyCorpusError("Cannot build an index over an empty corpus")
    doc_ids = sorted(corpus.doc_ids)
    postings: dict[str, list[tuple[int, int]]] = {}
    for doc_index, doc_id in enumerate(doc_ids):
        for term, tf in extract_terms(corpus.get(doc_id).tokens).items():
            postings.setdefault(term, []).append((doc_index, tf))

    terms = sorted(postings)
    lengths = np.array([len(postings[term]) for term in terms], dtype=np.int64)
    indptr = np.zeros(len(terms) + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    post_docs = np.array(
        [doc for term in terms for doc, _ in postings[term]], dtype=np.int32
    )
    post_tf = np.array(
        [tf for term in terms for _, tf in postings[term]], dtype=np.int32
    )
    index = InvertedIndex(terms, doc_ids, indptr, post_docs, post_tf)
    logger.info(
        "Indexed %d documents, %d terms, %d postings",
        index.n_docs,
        len(terms),
        index.n_postings,
    )
    return index
