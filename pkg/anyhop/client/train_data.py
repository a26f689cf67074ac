"""Training samples for the reranker, the reader and the question updater.

Reranker samples hold six documents: the gold documents of the question (all
of them, or a random proper subset when there are several) plus noisy
documents drawn with probability proportional to their TF-IDF score among the
top 50 non-gold candidates. A seeded 30% of the questions get one more sample
whose question was rewritten with a clue span.

Reader samples hold four documents and come in five types:

1. gold documents in chain order followed by the best TF-IDF negatives
2. type 1 shuffled
3. type 1 with one gold document replaced by a negative
4. a non-gold document containing the answer plus negatives
5. negatives only, labeled no-answer

Updater samples teach the bridge of each chain step: the clue is the earliest
occurrence of the next gold document's title inside the current one.

Every builder processes questions in id order, each with its own generator
derived from the seed and the question id.
"""

import hashlib
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from anyhop.client._client_vars import (
    NOISY_CANDIDATE_POOL,
    READER_SAMPLE_SIZE,
    RERANKER_GOLD_PER_SAMPLE,
    RERANKER_SAMPLE_SIZE,
    UPDATER_QUESTION_FRACTION,
)
from anyhop.client._utils import iter_jsonl, write_jsonl
from anyhop.client.config import EncoderConfig
from anyhop.client.corpus import tokenize
from anyhop.client.models import Corpus, Document, QARecord, Question
from anyhop.client.reranker import RerankerExample, prepare_input
from anyhop.client.retriever import InvertedIndex
from anyhop.client.span import SpanExample, SpanLabel, SpanParams, prepare_examples
from anyhop.client.updater import extract_clue_span, update_question


UPDATER_NEGATIVES = 3


def _question_record(question: Question) -> dict[str, Any]:
    return {"question": question.original_text, "clues": list(question.clue_spans)}


def _question_from(record: dict[str, Any]) -> Question:
    return Question(
        original_text=str(record["question"]),
        clue_spans=tuple(str(clue) for clue in record.get("clues", ())),
    )


@dataclass(frozen=True)
class RerankerSample:
    """Reranker training sample.

    Attributes
    ----------
    id : str
        Source question id
    question : Question
        Question, possibly rewritten with a clue span
    doc_ids : tuple[str, ...]
        Documents in sample order
    labels : tuple[int, ...]
        1 for gold documents, 0 otherwise
    strategy : str
        ``full``, ``partial`` or ``updated``
    """

    id: str
    question: Question
    doc_ids: tuple[str, ...]
    labels: tuple[int, ...]
    strategy: str

    def to_record(self) -> dict[str, Any]:
        """Return the sample file representation."""
        return {
            "id": self.id,
            **_question_record(self.question),
            "docs": list(self.doc_ids),
            "labels": list(self.labels),
            "strategy": self.strategy,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "RerankerSample":
        """Build from a decoded sample file line."""
        return cls(
            id=str(record["id"]),
            question=_question_from(record),
            doc_ids=tuple(str(doc_id) for doc_id in record["docs"]),
            labels=tuple(int(label) for label in record["labels"]),
            strategy=str(record.get("strategy", "full")),
        )


@dataclass(frozen=True)
class ReaderSample:
    """Reader training sample, ``answer`` is None for no-answer samples."""

    id: str
    question: Question
    doc_ids: tuple[str, ...]
    answer: Optional[SpanLabel]
    sample_type: int

    def to_record(self) -> dict[str, Any]:
        """Return the sample file representation."""
        return {
            "id": self.id,
            **_question_record(self.question),
            "docs": list(self.doc_ids),
            "answer": self.answer.to_record() if self.answer else None,
            "type": self.sample_type,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "ReaderSample":
        """Build from a decoded sample file line."""
        answer = record.get("answer")
        return cls(
            id=str(record["id"]),
            question=_question_from(record),
            doc_ids=tuple(str(doc_id) for doc_id in record["docs"]),
            answer=SpanLabel.from_record(answer) if answer else None,
            sample_type=int(record["type"]),
        )


@dataclass(frozen=True)
class UpdaterSample:
    """Updater training sample with its oracle clue span."""

    id: str
    question: Question
    doc_ids: tuple[str, ...]
    clue: SpanLabel

    def to_record(self) -> dict[str, Any]:
        """Return the sample file representation."""
        return {
            "id": self.id,
            **_question_record(self.question),
            "docs": list(self.doc_ids),
            "clue": self.clue.to_record(),
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "UpdaterSample":
        """Build from a decoded sample file line."""
        return cls(
            id=str(record["id"]),
            question=_question_from(record),
            doc_ids=tuple(str(doc_id) for doc_id in record["docs"]),
            clue=SpanLabel.from_record(record["clue"]),
        )


Sample = Union[RerankerSample, ReaderSample, UpdaterSample]
SAMPLE_TYPES: dict[str, type[Any]] = {
    "reranker": RerankerSample,
    "reader": ReaderSample,
    "updater": UpdaterSample,
}


def question_rng(seed: int, question_id: str) -> np.random.Generator:
    """Return the generator of one question, independent of question order."""
    digest = hashlib.blake2b(question_id.encode(), digest_size=8).digest()
    return np.random.default_rng([seed, int.from_bytes(digest, "little")])


def find_span(tokens: Sequence[str], target: str) -> Optional[tuple[int, int]]:
    """Locate the earliest case-insensitive occurrence of ``target``.

    Returns
    -------
    tuple[int, int] or None
        Half-open token range, None when absent or ``target`` has no tokens
    """
    needle = [token.casefold() for token in tokenize(target)]
    if not needle:
        return None
    folded = [token.casefold() for token in tokens]
    width = len(needle)
    for start in range(len(folded) - width + 1):
        if folded[start : start + width] == needle:
            return start, start + width
    return None


def oracle_clues(record: QARecord, corpus: Corpus) -> tuple[str, ...]:
    """Titles of the gold documents after the first, in chain order."""
    return tuple(corpus.get(doc_id).title for doc_id in record.supporting[1:])


def sample_noisy(
    candidates: Sequence[tuple[str, float]], k: int, rng: np.random.Generator
) -> list[str]:
    """Draw ``k`` distinct documents with probability proportional to score.

    Parameters
    ----------
    candidates : Sequence[tuple[str, float]]
        ``(doc id, TF-IDF score)`` pairs with positive scores
    k : int
        Number of documents to draw, at most ``len(candidates)``
    rng : np.random.Generator
        Random source

    Returns
    -------
    list[str]
        Drawn doc ids in draw order
    """
    if k <= 0 or not candidates:
        return []
    scores = np.array([score for _, score in candidates], dtype=np.float64)
    size = min(k, len(candidates))
    probs = scores / scores.sum()
    picks = rng.choice(len(candidates), size=size, replace=False, p=probs)
    return [candidates[int(i)][0] for i in picks]


def _fill_random(
    chosen: list[str],
    k: int,
    corpus: Corpus,
    exclude: set[str],
    rng: np.random.Generator,
) -> list[str]:
    """Top ``chosen`` up to ``k`` ids with uniform draws from the rest of the corpus."""
    if len(chosen) >= k:
        return chosen[:k]
    taken = exclude | set(chosen)
    pool = [doc_id for doc_id in corpus.doc_ids if doc_id not in taken]
    extra = rng.choice(len(pool), size=min(k - len(chosen), len(pool)), replace=False)
    return chosen + [pool[int(i)] for i in sorted(extra)]


def _noisy_candidates(
    question: Question, index: InvertedIndex, exclude: set[str]
) -> list[tuple[str, float]]:
    retrieved = index.retrieve(question.rendered, NOISY_CANDIDATE_POOL + len(exclude))
    return [hit for hit in retrieved if hit[0] not in exclude][:NOISY_CANDIDATE_POOL]


def _shuffled(
    doc_ids: Sequence[str], labels: Sequence[int], rng: np.random.Generator
) -> tuple[tuple[str, ...], tuple[int, ...]]:
    order = rng.permutation(len(doc_ids))
    return (
        tuple(doc_ids[int(i)] for i in order),
        tuple(labels[int(i)] for i in order),
    )


def _sorted_questions(dataset: Iterable[QARecord]) -> list[QARecord]:
    return sorted(dataset, key=lambda record: record.id)


def _reranker_sample(
    record: QARecord,
    question: Question,
    gold: Sequence[str],
    corpus: Corpus,
    index: InvertedIndex,
    strategy: str,
    rng: np.random.Generator,
) -> RerankerSample:
    all_gold = set(record.supporting)
    n_noisy = RERANKER_SAMPLE_SIZE - len(gold)
    noisy = sample_noisy(_noisy_candidates(question, index, all_gold), n_noisy, rng)
    noisy = _fill_random(noisy, n_noisy, corpus, all_gold, rng)
    doc_ids, labels = _shuffled(
        [*gold, *noisy], [1] * len(gold) + [0] * len(noisy), rng
    )
    return RerankerSample(
        id=record.id,
        question=question,
        doc_ids=doc_ids,
        labels=labels,
        strategy=strategy,
    )


def _gold_subset(
    supporting: Sequence[str], size: int, rng: np.random.Generator
) -> list[str]:
    picks = sorted(rng.choice(len(supporting), size=size, replace=False))
    return [supporting[int(i)] for i in picks]


def build_reranker_samples(
    dataset: Sequence[QARecord],
    corpus: Corpus,
    index: InvertedIndex,
    seed: int = 0,
    updater: Optional[SpanParams] = None,
    encoder: Optional[EncoderConfig] = None,
) -> list[RerankerSample]:
    """Build reranker samples for every question with gold documents.

    Parameters
    ----------
    dataset : Sequence[QARecord]
        Questions with their gold supporting documents
    corpus : Corpus
        Document collection
    index : InvertedIndex
        Index over ``corpus``
    seed : int, default=0
        Sampling seed
    updater : SpanParams, optional
        Trained updater rewriting the question of the selected 30%; without
        it the oracle clue (the next gold title) is appended
    encoder : EncoderConfig, optional
        Encoder of ``updater``, required with it

    Returns
    -------
    list[RerankerSample]
        Samples in question id order: ``full``, ``partial`` when the question
        has two or more gold documents and, for the selected questions,
        ``updated``
    """
    if updater is not None and encoder is None:
        raise ValueError("An encoder config is required together with the updater")
    samples = []
    for record in _sorted_questions(dataset):
        if not record.supporting:
            warnings.warn(
                f"Question {record.id} has no gold documents, skipped",
                UserWarning,
                stacklevel=2,
            )
            continue
        rng = question_rng(seed, record.id)
        question = Question(original_text=record.question)
        n_gold = len(record.supporting)
        full_size = min(RERANKER_GOLD_PER_SAMPLE, n_gold)
        full = _gold_subset(record.supporting, full_size, rng)
        full_sample = _reranker_sample(
            record, question, full, corpus, index, "full", rng
        )
        samples.append(full_sample)
        if n_gold > 1:
            partial_size = int(rng.integers(1, n_gold))
            partial = _gold_subset(record.supporting, partial_size, rng)
            samples.append(
                _reranker_sample(
                    record, question, partial, corpus, index, "partial", rng
                )
            )

        if rng.random() >= UPDATER_QUESTION_FRACTION:
            continue
        if updater is not None and encoder is not None:
            docs = [corpus.get(doc_id) for doc_id in full_sample.doc_ids]
            clue = extract_clue_span(question, docs, updater, encoder)
        else:
            clues = oracle_clues(record, corpus)
            clue = clues[0] if clues else ""
        if not clue:
            continue
        updated = update_question(question, clue)
        samples.append(
            _reranker_sample(record, updated, full, corpus, index, "updated", rng)
        )
    return samples


def _answer_bearing(
    doc_ids: Iterable[str], corpus: Corpus, answer: str
) -> dict[str, tuple[int, int]]:
    spans = {}
    for doc_id in doc_ids:
        span = find_span(corpus.get(doc_id).tokens, answer)
        if span is not None:
            spans[doc_id] = span
    return spans


def _label(
    doc_ids: Sequence[str], spans: dict[str, tuple[int, int]], prefer: Optional[str]
) -> Optional[SpanLabel]:
    ordered = sorted(doc_ids, key=lambda doc_id: doc_id != prefer)
    for doc_id in ordered:
        if doc_id in spans:
            start, end = spans[doc_id]
            return SpanLabel(list(doc_ids).index(doc_id), start, end)
    return None


def build_reader_samples(
    dataset: Sequence[QARecord],
    corpus: Corpus,
    index: InvertedIndex,
    seed: int = 0,
) -> list[ReaderSample]:
    """Build the five reader sample types for every question.

    The question of every sample carries the oracle clue chain, as it reads at
    the last retrieval round. Questions with a single gold document fill the
    gold slots with negatives; type 3 needs two gold documents and type 4 an
    answer-bearing non-gold document among the retrieval candidates.

    Returns
    -------
    list[ReaderSample]
        Samples in question id order, types ascending within a question
    """
    samples = []
    for record in _sorted_questions(dataset):
        if not record.supporting:
            warnings.warn(
                f"Question {record.id} has no gold documents, skipped",
                UserWarning,
                stacklevel=2,
            )
            continue
        rng = question_rng(seed, record.id)
        question = Question(
            original_text=record.question, clue_spans=oracle_clues(record, corpus)
        )
        all_gold = set(record.supporting)
        gold = list(record.supporting[-2:])
        gold_spans = _answer_bearing(gold, corpus, record.answer)
        answer_doc = next((d for d in reversed(gold) if d in gold_spans), None)
        if answer_doc is None:
            warnings.warn(
                f"Answer of question {record.id} not found in its gold documents, "
                "skipped",
                UserWarning,
                stacklevel=2,
            )
            continue

        candidates = [
            doc_id
            for doc_id, _ in index.retrieve(
                question.rendered, NOISY_CANDIDATE_POOL + len(all_gold)
            )
            if doc_id not in all_gold
        ]
        bearing = _answer_bearing(candidates, corpus, record.answer)
        negatives = [doc_id for doc_id in candidates if doc_id not in bearing]
        negatives = _fill_random(
            negatives, READER_SAMPLE_SIZE, corpus, all_gold | set(bearing), rng
        )
        spans = {**gold_spans, **bearing}

        def emit(doc_ids: Sequence[str], sample_type: int) -> None:
            samples.append(
                ReaderSample(
                    id=record.id,
                    question=question,
                    doc_ids=tuple(doc_ids),
                    answer=_label(doc_ids, spans, answer_doc),
                    sample_type=sample_type,
                )
            )

        first = gold + negatives[: READER_SAMPLE_SIZE - len(gold)]
        emit(first, 1)
        emit([first[int(i)] for i in rng.permutation(len(first))], 2)
        unused = negatives[len(first) - len(gold) :]
        if len(gold) >= 2 and unused:
            replaced = list(first)
            replaced[int(rng.integers(len(gold)))] = unused[0]
            emit(replaced, 3)
        if bearing:
            emit([next(iter(bearing)), *negatives[: READER_SAMPLE_SIZE - 1]], 4)
        if negatives:
            emit(negatives[:READER_SAMPLE_SIZE], 5)
    return samples


def build_updater_samples(
    dataset: Sequence[QARecord],
    corpus: Corpus,
    seed: int = 0,
    index: Optional[InvertedIndex] = None,
) -> list[UpdaterSample]:
    """Build one updater sample per bridge of every multi-hop chain.

    For the bridge from gold document ``s`` to ``s + 1`` the question carries
    the oracle clues of the earlier bridges, and the documents are gold
    document ``s`` plus up to three TF-IDF negatives when an index is given,
    in shuffled order. Chains whose next title does not occur in the current
    gold document are skipped with a warning.

    Returns
    -------
    list[UpdaterSample]
        Samples in question id order, bridges ascending within a question
    """
    samples = []
    for record in _sorted_questions(dataset):
        if len(record.supporting) < 2:
            continue
        rng = question_rng(seed, record.id)
        clues = oracle_clues(record, corpus)
        all_gold = set(record.supporting)
        for step in range(len(record.supporting) - 1):
            current = corpus.get(record.supporting[step])
            span = find_span(current.tokens, clues[step])
            if span is None:
                warnings.warn(
                    f"Question {record.id}: title {clues[step]!r} does not occur in "
                    f"{current.id}, skipped",
                    UserWarning,
                    stacklevel=2,
                )
                break
            question = Question(original_text=record.question, clue_spans=clues[:step])
            negatives: list[str] = []
            if index is not None:
                negatives = [
                    doc_id
                    for doc_id, _ in index.retrieve(
                        question.rendered, UPDATER_NEGATIVES + len(all_gold)
                    )
                    if doc_id not in all_gold
                ][:UPDATER_NEGATIVES]
            doc_ids = [current.id, *negatives]
            order = [doc_ids[int(i)] for i in rng.permutation(len(doc_ids))]
            samples.append(
                UpdaterSample(
                    id=record.id,
                    question=question,
                    doc_ids=tuple(order),
                    clue=SpanLabel(
                        doc=order.index(current.id),
                        token_start=span[0],
                        token_end=span[1],
                    ),
                )
            )
    return samples


def save_samples(path: Union[str, Path], samples: Iterable[Sample]) -> int:
    """Write samples as line-delimited records, returning their number."""
    return write_jsonl(path, (sample.to_record() for sample in samples))


def load_samples(path: Union[str, Path], kind: str) -> list[Any]:
    """Read a sample file written by :func:`save_samples`.

    Raises
    ------
    ValueError
        If ``kind`` is not ``reranker``, ``reader`` or ``updater``
    """
    if kind not in SAMPLE_TYPES:
        raise ValueError(f"Unknown sample kind: {kind}")
    sample_type = SAMPLE_TYPES[kind]
    return [sample_type.from_record(record) for _, record in iter_jsonl(path)]


def _docs(corpus: Corpus, doc_ids: Sequence[str]) -> list[Document]:
    return [corpus.get(doc_id) for doc_id in doc_ids]


def to_reranker_examples(
    samples: Sequence[RerankerSample],
    corpus: Corpus,
    encoder: EncoderConfig,
    entity_cap: int,
) -> list[RerankerExample]:
    """Encode reranker samples and build their entity graphs."""
    return [
        RerankerExample(
            inputs=prepare_input(
                sample.question, _docs(corpus, sample.doc_ids), encoder, entity_cap
            ),
            labels=np.asarray(sample.labels, dtype=np.float64),
        )
        for sample in samples
    ]


def to_span_examples(
    samples: Sequence[Union[ReaderSample, UpdaterSample]],
    corpus: Corpus,
    encoder: EncoderConfig,
) -> list[SpanExample]:
    """Encode reader or updater samples, skipping truncated gold spans."""
    return prepare_examples(
        (
            (
                sample.question,
                _docs(corpus, sample.doc_ids),
                sample.answer if isinstance(sample, ReaderSample) else sample.clue,
            )
            for sample in samples
        ),
        encoder,
    )


def sample_counts(samples: Iterable[Sample]) -> dict[str, int]:
    """Count samples per strategy, reader type or bridge step."""
    counts: dict[str, int] = {}
    for sample in samples:
        if isinstance(sample, RerankerSample):
            key = sample.strategy
        elif isinstance(sample, ReaderSample):
            key = f"type_{sample.sample_type}"
        else:
            key = f"bridge_{len(sample.question.clue_spans) + 1}"
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))
