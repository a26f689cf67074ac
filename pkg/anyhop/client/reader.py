"""Extractive reader with no-answer gating."""

from collections.abc import Sequence

from anyhop.client._client_vars import MAX_ANSWER_LENGTH
from anyhop.client._exceptions import EmptyDocumentSetError
from anyhop.client.config import EncoderConfig
from anyhop.client.encoder import get_encoder
from anyhop.client.models import Answer, AnswerKind, Document, Question
from anyhop.client.reranker import run_gradient_descent
from anyhop.client.span import (
    ReaderParams,
    SpanExample,
    batch_loss_and_grad,
    best_span,
    span_scores,
)


def read(
    question: Question,
    docs: Sequence[Document],
    params: ReaderParams,
    encoder: EncoderConfig,
    force: bool = False,
) -> Answer:
    """Extract the best answer span from the kept documents, or abstain.

    Parameters
    ----------
    question : Question
        Current question, clue spans included
    docs : Sequence[Document]
        Final kept documents, non-empty
    params : ReaderParams
        Trained reader parameters
    encoder : EncoderConfig
        Encoder the parameters were trained against
    force : bool, default=False
        Ignore the no-answer probability and return the best span flagged
        as low confidence when the reader would have abstained

    Returns
    -------
    Answer
        ``NO_ANSWER`` exactly when ``na_prob`` exceeds the best span
        probability; a tie answers the span

    Raises
    ------
    EmptyDocumentSetError
        If ``docs`` is empty
    """
    if not docs:
        raise EmptyDocumentSetError("The reader needs at least one document")
    encoded = get_encoder(encoder).encode_docs(question, docs)
    scores = span_scores(encoded, params)
    na_prob = float(scores.na_prob) if scores.na_prob is not None else 0.0
    choice = best_span(
        encoded, scores.start_probs, scores.end_probs, MAX_ANSWER_LENGTH
    )
    if choice is None:
        return Answer(kind=AnswerKind.NO_ANSWER, na_prob=na_prob, low_confidence=force)

    abstain = na_prob > choice.prob
    doc = docs[choice.doc]
    return Answer(
        kind=AnswerKind.NO_ANSWER if abstain and not force else AnswerKind.SPAN,
        text=" ".join(doc.tokens[choice.token_start : choice.token_end]),
        doc_id=doc.id,
        token_start=choice.token_start,
        token_end=choice.token_end,
        span_prob=choice.prob,
        na_prob=na_prob,
        low_confidence=force and abstain,
    )


def train_reader(
    examples: Sequence[SpanExample],
    params: ReaderParams,
    steps: int,
    lr: float,
    seed: int = 0,
    batch_size: int = 8,
    log_every: int = 50,
) -> tuple[ReaderParams, list[float]]:
    """Train the reader with plain gradient descent.

    The loss of a sample is the start/end cross-entropy of its gold span, when
    it has one, plus the binary cross-entropy of the no-answer probability.
    Arguments and return value follow :func:`anyhop.client.reranker.train`.
    """
    trained, losses = run_gradient_descent(
        examples,
        params,
        batch_loss_and_grad,
        steps=steps,
        lr=lr,
        seed=seed,
        batch_size=batch_size,
        log_every=log_every,
        name="reader",
    )
    return trained, losses
