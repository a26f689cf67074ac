"""Tests for the iterative retrieve, rerank and read loop."""

from dataclasses import replace
from unittest.mock import patch

import pytest

from anyhop.client.config import PipelineConfig
from anyhop.client.controller import (
    Pipeline,
    PipelineModels,
    answer_question,
    hop_histogram,
)
from anyhop.client.models import Answer, AnswerKind, QuestionRecord
from anyhop.client.reranker import RerankerParams
from anyhop.client.span import ReaderParams, SpanParams


QUESTION = "Kobale rivalry ?"
NO_ANSWER = Answer(
    kind=AnswerKind.NO_ANSWER,
    text="Pelika",
    doc_id="d2",
    token_start=1,
    token_end=2,
    span_prob=0.1,
    na_prob=0.9,
)
SPAN = Answer(
    kind=AnswerKind.SPAN, text="Pelika", doc_id="d2", token_start=1, token_end=2
)
FORCED = replace(NO_ANSWER, kind=AnswerKind.SPAN, low_confidence=True)


def _abstain(question, docs, params, encoder, force=False):
    return FORCED if force else NO_ANSWER


@pytest.fixture
def models(small_encoder):
    """Return untrained models over the small encoder."""
    return PipelineModels(
        reranker=RerankerParams.initialize(8, seed=0),
        reader=ReaderParams.initialize(8, seed=0),
        updater=SpanParams.initialize(8, seed=0),
        encoder=small_encoder,
    )


@pytest.fixture
def tfidf_config():
    """Return a three-hop loop that filters with TF-IDF scores."""
    return PipelineConfig(
        max_hops=3,
        retrieve_top_n=2,
        keep_top_k=2,
        rerank_cap=3,
        iterative_reranking=False,
    )


def test_no_retrieval_returns_no_answer(models, tiny_index, tiny_corpus):
    """Test that a question matching nothing ends before any round."""
    answer, trace = answer_question(
        "zzz yyy", PipelineConfig(), models, tiny_index, tiny_corpus
    )
    assert answer.kind is AnswerKind.NO_ANSWER
    assert trace.num_hops == 0


def test_span_answer_stops_the_loop(models, tiny_index, tiny_corpus, tfidf_config):
    """Test that a span answer at the first round ends the loop."""
    with patch("anyhop.client.controller.read", return_value=SPAN) as read, patch(
        "anyhop.client.controller.extract_clue_span"
    ) as extract:
        answer, trace = answer_question(
            QUESTION, tfidf_config, models, tiny_index, tiny_corpus
        )
    assert answer == SPAN
    assert trace.num_hops == 1
    assert trace.hops[0].decision is AnswerKind.SPAN
    assert trace.hops[0].clue is None
    assert read.call_count == 1
    extract.assert_not_called()


def test_abstaining_reader_walks_every_hop(
    models, tiny_index, tiny_corpus, tfidf_config
):
    """Test clue updates between rounds and the forced final answer."""
    with patch(
        "anyhop.client.controller.read", side_effect=_abstain
    ) as read, patch(
        "anyhop.client.controller.extract_clue_span", return_value="Felabo"
    ) as extract:
        answer, trace = answer_question(
            QUESTION, tfidf_config, models, tiny_index, tiny_corpus
        )

    assert answer.kind is AnswerKind.SPAN
    assert answer.low_confidence
    assert answer.text == "Pelika"
    assert trace.num_hops == 3
    assert read.call_count == 3
    assert extract.call_count == 2
    assert [call.kwargs["force"] for call in read.call_args_list] == [
        False,
        False,
        True,
    ]
    assert all(record.decision is AnswerKind.NO_ANSWER for record in trace.hops)
    assert [record.clue for record in trace.hops] == ["Felabo", "Felabo", None]
    assert [record.query for record in trace.hops] == [
        "Kobale rivalry ?",
        "Kobale rivalry ? [SEP] Felabo",
        "Kobale rivalry ? [SEP] Felabo [SEP] Felabo",
    ]
    assert [[doc_id for doc_id, _ in record.kept] for record in trace.hops] == [
        ["d2", "d1"],
        ["d2", "d4"],
        ["d2", "d4"],
    ]
    for record in trace.hops:
        assert len(record.retrieved) <= tfidf_config.retrieve_top_n
        assert len(record.kept) <= tfidf_config.keep_top_k
        scores = [score for _, score in record.kept]
        assert scores == sorted(scores, reverse=True)

    questions = [call.args[0] for call in read.call_args_list]
    assert [question.hop for question in questions] == [1, 2, 3]
    assert questions[2].clue_spans == ("Felabo", "Felabo")
    assert questions[2].original_text == QUESTION


def test_updater_switched_off(models, tiny_index, tiny_corpus, tfidf_config):
    """Test that without the updater every round reuses the original question."""
    config = tfidf_config.model_copy(update={"use_updater": False})
    with patch("anyhop.client.controller.read", return_value=NO_ANSWER), patch(
        "anyhop.client.controller.extract_clue_span"
    ) as extract:
        _, trace = answer_question(QUESTION, config, models, tiny_index, tiny_corpus)
    extract.assert_not_called()
    assert {record.query for record in trace.hops} == {QUESTION}
    assert trace.num_hops == 3


def test_missing_updater_model(models, tiny_index, tiny_corpus, tfidf_config):
    """Test that a pipeline without updater parameters never updates."""
    no_updater = PipelineModels(
        reranker=models.reranker,
        reader=models.reader,
        updater=None,
        encoder=models.encoder,
    )
    with patch("anyhop.client.controller.read", return_value=NO_ANSWER):
        _, trace = answer_question(
            QUESTION, tfidf_config, no_updater, tiny_index, tiny_corpus
        )
    assert all(record.clue is None for record in trace.hops)


def test_empty_clue_keeps_the_question(models, tiny_index, tiny_corpus, tfidf_config):
    """Test that an empty clue span leaves the question as it was."""
    with patch("anyhop.client.controller.read", return_value=NO_ANSWER), patch(
        "anyhop.client.controller.extract_clue_span", return_value=""
    ):
        _, trace = answer_question(
            QUESTION, tfidf_config, models, tiny_index, tiny_corpus
        )
    assert [record.clue for record in trace.hops] == [None, None, None]
    assert {record.query for record in trace.hops} == {QUESTION}


def test_forced_answer_without_span(models, tiny_index, tiny_corpus, tfidf_config):
    """Test that forcing keeps NO_ANSWER when the reader had no span at all."""
    empty = Answer(kind=AnswerKind.NO_ANSWER, low_confidence=True)
    config = tfidf_config.model_copy(update={"max_hops": 1})
    with patch("anyhop.client.controller.read", return_value=empty) as read:
        answer, trace = answer_question(
            QUESTION, config, models, tiny_index, tiny_corpus
        )
    assert answer.kind is AnswerKind.NO_ANSWER
    assert answer.low_confidence
    assert trace.num_hops == 1
    assert read.call_args.kwargs["force"] is True
    assert trace.hops[0].decision is AnswerKind.NO_ANSWER


def test_untrained_models_run_deterministically(models, tiny_index, tiny_corpus):
    """Test a full loop with real models, twice."""
    config = PipelineConfig(max_hops=2, retrieve_top_n=3, keep_top_k=2, rerank_cap=4)
    pipeline = Pipeline(tiny_index, tiny_corpus, models, config)
    first = pipeline.answer(QUESTION)
    second = pipeline.answer(QUESTION)
    assert first == second

    answer, trace = first
    assert 1 <= trace.num_hops <= 2
    for record in trace.hops:
        kept_ids = [doc_id for doc_id, _ in record.kept]
        assert len(kept_ids) == len(set(kept_ids)) <= 2
        assert all(0.0 < score < 1.0 for _, score in record.kept)
    if answer.doc_id is not None:
        assert answer.doc_id in [doc_id for doc_id, _ in trace.hops[-1].kept]


def test_graph_ablation_runs(models, tiny_index, tiny_corpus):
    """Test that the loop runs with the graph switched off."""
    config = PipelineConfig(max_hops=1, keep_top_k=2, use_graph=False)
    answer, trace = answer_question(QUESTION, config, models, tiny_index, tiny_corpus)
    assert trace.num_hops == 1
    assert answer.low_confidence or answer.kind is AnswerKind.SPAN


def _record(hops, answer_em, paragraph_em=0):
    return QuestionRecord(
        id=f"q{hops}{answer_em}",
        hops=hops,
        gold_hops=hops,
        paragraph_em=paragraph_em,
        paragraph_recall=0.0,
        answer_em=answer_em,
        answer_f1=float(answer_em),
    )


def test_hop_histogram():
    """Test buckets by stopping round."""
    histogram = hop_histogram(
        [_record(2, 1, 1), _record(1, 1), _record(2, 0), _record(1, 0)]
    )
    assert list(histogram) == [1, 2]
    assert histogram[1].count == 2
    assert histogram[2].answer_em == 0.5
    assert histogram[2].paragraph_em == 0.5
    assert sum(bucket.fraction for bucket in histogram.values()) == pytest.approx(1)


def test_hop_histogram_empty():
    """Test that an empty record list is rejected."""
    with pytest.raises(ValueError):
        hop_histogram([])
