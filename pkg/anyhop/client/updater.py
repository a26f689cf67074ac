"""Question updater: clue span extraction and question rewriting.

The updater shares the span extractor architecture of the reader, without the
no-answer head and with its own parameters. Its clue span is appended to the
question so the next retrieval round can reach documents that share no terms
with the original question.
"""

from collections.abc import Sequence
from dataclasses import replace
from typing import Optional

from anyhop.client._client_vars import MAX_CLUE_LENGTH
from anyhop.client._exceptions import EmptyDocumentSetError
from anyhop.client.config import EncoderConfig
from anyhop.client.encoder import get_encoder
from anyhop.client.models import Document, Question
from anyhop.client.reranker import run_gradient_descent
from anyhop.client.span import (
    SpanChoice,
    SpanExample,
    SpanParams,
    batch_loss_and_grad,
    best_span,
    span_scores,
)


def locate_clue_span(
    question: Question,
    docs: Sequence[Document],
    params: SpanParams,
    encoder: EncoderConfig,
) -> Optional[SpanChoice]:
    """Return the best clue span position, None when no document token is left.

    Raises
    ------
    EmptyDocumentSetError
        If ``docs`` is empty
    """
    if not docs:
        raise EmptyDocumentSetError("The question updater needs at least one document")
    encoded = get_encoder(encoder).encode_docs(question, docs)
    scores = span_scores(encoded, params)
    return best_span(encoded, scores.start_probs, scores.end_probs, MAX_CLUE_LENGTH)


def extract_clue_span(
    question: Question,
    docs: Sequence[Document],
    params: SpanParams,
    encoder: EncoderConfig,
) -> str:
    """Extract the clue span of the kept documents as text.

    Parameters
    ----------
    question : Question
        Current question
    docs : Sequence[Document]
        Kept documents, non-empty
    params : SpanParams
        Trained updater parameters
    encoder : EncoderConfig
        Encoder the parameters were trained against

    Returns
    -------
    str
        Tokens of the argmax span joined by spaces, at most 10 tokens from a
        single document; empty when every document was truncated away

    Raises
    ------
    EmptyDocumentSetError
        If ``docs`` is empty
    """
    choice = locate_clue_span(question, docs, params, encoder)
    if choice is None:
        return ""
    return " ".join(docs[choice.doc].tokens[choice.token_start : choice.token_end])


def update_question(question: Question, clue: str) -> Question:
    """Append a clue span to the question.

    The original text and hop index are untouched; duplicate clues are
    appended as given.

    Raises
    ------
    ValueError
        If ``clue`` is empty
    """
    if not clue.strip():
        raise ValueError("Clue span must be non-empty")
    return replace(question, clue_spans=(*question.clue_spans, clue))


def train_updater(
    examples: Sequence[SpanExample],
    params: SpanParams,
    steps: int,
    lr: float,
    seed: int = 0,
    batch_size: int = 8,
    log_every: int = 50,
) -> tuple[SpanParams, list[float]]:
    """Train the updater on start/end cross-entropy of the oracle clue span."""
    trained, losses = run_gradient_descent(
        examples,
        params,
        batch_loss_and_grad,
        steps=steps,
        lr=lr,
        seed=seed,
        batch_size=batch_size,
        log_every=log_every,
        name="updater",
    )
    return trained, losses
