"""Iterative retrieve, rerank, read loop.

Each round retrieves the top-N documents for the current question, admits new
ones into the pool up to the reranker input cap, reranks the pool and keeps the
top K, then asks the reader. A span answer ends the loop; otherwise the updater
appends a clue span to the question and the next round starts. After the last
allowed round the reader is forced to answer, flagged as low confidence.
"""

import logging
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from anyhop.client.config import EncoderConfig, PipelineConfig
from anyhop.client.graph import DEFAULT_ENTITY_CAP
from anyhop.client.models import (
    Answer,
    AnswerKind,
    Corpus,
    HopBucket,
    HopRecord,
    Question,
    QuestionRecord,
    Trace,
)
from anyhop.client.reader import read
from anyhop.client.reranker import GraphReranker, RerankerParams, filter_topk
from anyhop.client.retriever import InvertedIndex
from anyhop.client.span import ReaderParams, SpanParams
from anyhop.client.updater import extract_clue_span, update_question


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineModels:
    """Trained models of the pipeline and the encoder they share.

    Attributes
    ----------
    reranker : RerankerParams
        Graph reranker parameters
    reader : ReaderParams
        Reader parameters
    updater : SpanParams, optional
        Question updater parameters; without them questions are never updated
    encoder : EncoderConfig
        Encoder every model was trained against
    entity_cap : int
        Maximum graph nodes per reranked document set
    """

    reranker: RerankerParams
    reader: ReaderParams
    updater: Optional[SpanParams]
    encoder: EncoderConfig
    entity_cap: int = DEFAULT_ENTITY_CAP


@dataclass(frozen=True)
class PoolEntry:
    """A document of the pool with its first retrieval score and hop."""

    doc_id: str
    tfidf: float
    first_hop: int


@dataclass
class RetrievalState:
    """Mutable state of one question's loop.

    Attributes
    ----------
    hop : int
        Current round, starting at 1
    question : Question
        Current question, clue spans included
    pool : list[PoolEntry]
        Kept documents after the last round, best first
    trace : list[HopRecord]
        Records of the finished rounds
    """

    hop: int
    question: Question
    pool: list[PoolEntry] = field(default_factory=list)
    trace: list[HopRecord] = field(default_factory=list)


def answer_question(
    question: Union[str, Question],
    config: PipelineConfig,
    models: PipelineModels,
    index: InvertedIndex,
    corpus: Corpus,
) -> tuple[Answer, Trace]:
    """Answer one question with at most ``config.max_hops`` retrieval rounds.

    Parameters
    ----------
    question : str or Question
        Question text
    config : PipelineConfig
        Loop limits and ablation switches
    models : PipelineModels
        Trained models
    index : InvertedIndex
        Index over ``corpus``
    corpus : Corpus
        Indexed documents

    Returns
    -------
    tuple[Answer, Trace]
        The answer and one record per round. When the first round retrieves
        nothing the answer is ``NO_ANSWER`` with an empty trace.
    """
    if isinstance(question, str):
        question = Question(original_text=question)
    reranker = GraphReranker(
        models.reranker,
        models.encoder,
        entity_cap=models.entity_cap,
        use_graph=config.use_graph,
    )
    state = RetrievalState(hop=1, question=question)
    answer = Answer(kind=AnswerKind.NO_ANSWER)

    for hop in range(1, config.max_hops + 1):
        state.hop = hop
        state.question = replace(state.question, hop=hop)
        query = state.question.rendered
        retrieved = index.retrieve(query, config.retrieve_top_n)
        if hop == 1 and not retrieved:
            logger.info("No document matches %r", query)
            return answer, Trace()

        pooled = {entry.doc_id for entry in state.pool}
        admitted = [
            PoolEntry(doc_id, score, hop)
            for doc_id, score in retrieved
            if doc_id not in pooled
        ][: config.rerank_cap - len(state.pool)]
        candidates = state.pool + admitted
        docs = [corpus.get(entry.doc_id) for entry in candidates]

        if config.iterative_reranking:
            scores, _ = reranker.score(state.question, docs)
            doc_scores = [float(score) for score in scores]
        else:
            doc_scores = [entry.tfidf for entry in candidates]
        order = filter_topk(
            doc_scores,
            config.keep_top_k,
            first_hops=[entry.first_hop for entry in candidates],
            doc_ids=[entry.doc_id for entry in candidates],
        )
        state.pool = [candidates[i] for i in order]
        kept_docs = [docs[i] for i in order]
        kept = [(docs[i].id, doc_scores[i]) for i in order]

        answer = read(
            state.question,
            kept_docs,
            models.reader,
            models.encoder,
            force=hop == config.max_hops,
        )
        decision = AnswerKind.NO_ANSWER if answer.low_confidence else answer.kind
        clue = None
        if (
            decision is AnswerKind.NO_ANSWER
            and hop < config.max_hops
            and config.use_updater
            and models.updater is not None
        ):
            clue = extract_clue_span(
                state.question, kept_docs, models.updater, models.encoder
            ) or None
        state.trace.append(
            HopRecord(
                hop=hop,
                query=query,
                retrieved=retrieved,
                kept=kept,
                decision=decision,
                clue=clue,
            )
        )
        logger.debug(
            "hop %d: %s, kept %s", hop, decision.value, [k for k, _ in kept]
        )
        if decision is AnswerKind.SPAN:
            return answer, Trace(hops=state.trace)
        if clue is not None:
            state.question = update_question(state.question, clue)

    return answer, Trace(hops=state.trace)


class Pipeline:
    """Question answering over one index with one set of models.

    The index, corpus and parameters are never mutated, so one instance can
    answer questions from several threads at once.
    """

    def __init__(
        self,
        index: InvertedIndex,
        corpus: Corpus,
        models: PipelineModels,
        config: PipelineConfig,
    ):
        self.index = index
        self.corpus = corpus
        self.models = models
        self.config = config

    def answer(self, question: Union[str, Question]) -> tuple[Answer, Trace]:
        """Answer one question, see :func:`answer_question`."""
        return answer_question(
            question, self.config, self.models, self.index, self.corpus
        )


def hop_histogram(records: Sequence[QuestionRecord]) -> dict[int, HopBucket]:
    """Break scored questions down by the round they stopped at.

    Parameters
    ----------
    records : Sequence[QuestionRecord]
        Scored questions, non-empty

    Returns
    -------
    dict[int, HopBucket]
        One bucket per observed hop count, in ascending order; fractions sum
        to 1
    """
    if not records:
        raise ValueError("hop_histogram needs at least one question")
    buckets: dict[int, list[QuestionRecord]] = defaultdict(list)
    for record in records:
        buckets[record.hops].append(record)
    total = len(records)
    histogram = {}
    for hop in sorted(buckets):
        members = buckets[hop]
        n = len(members)
        histogram[hop] = HopBucket(
            count=n,
            fraction=n / total,
            answer_em=sum(r.answer_em for r in members) / n,
            answer_f1=sum(r.answer_f1 for r in members) / n,
            paragraph_em=sum(r.paragraph_em for r in members) / n,
        )
    return histogram
