"""Span extractor shared by the reader and the question updater.

The frozen encodings of the question against every document are concatenated,
contextualized by one trainable transformer layer and fed to linear start and
end heads. Start and end probabilities are softmaxes over the non-padding rows.
The reader adds a no-answer head on the first sequence-start row.

A span ``(i, j)`` is admissible when both ends are document-token rows of the
same block, ``i <= j`` and ``j - i`` is below the length limit.
"""

import math
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from anyhop.client._exceptions import TrainingDivergedError
from anyhop.client._layers import (
    Array,
    ParamSet,
    TransformerParams,
    bce_with_logits,
    masked_softmax,
    sigmoid,
    transformer_backward,
    transformer_forward,
)
from anyhop.client.config import EncoderConfig
from anyhop.client.encoder import EncodedDocs, get_encoder
from anyhop.client.models import Document, Question


@dataclass
class SpanParams(ParamSet):
    """Weights of a start/end span extractor.

    Attributes
    ----------
    context : TransformerParams
        Contextualizing layer over the concatenated encodings
    start_w, end_w : np.ndarray
        ``h`` start and end head weights
    start_b, end_b : np.ndarray
        Head biases, shape ``(1,)``
    """

    context: TransformerParams
    start_w: Array
    start_b: Array
    end_w: Array
    end_b: Array

    @property
    def hidden_size(self) -> int:
        """Encoder embedding size h."""
        return int(self.start_w.shape[0])

    @classmethod
    def initialize(cls, hidden_size: int, seed: int = 0) -> "SpanParams":
        """Seeded initialization."""
        rng = np.random.default_rng(seed)
        scale = 0.1 / math.sqrt(hidden_size)
        return cls(
            context=TransformerParams.initialize(hidden_size, rng),
            start_w=rng.normal(0.0, scale, hidden_size),
            start_b=np.zeros(1),
            end_w=rng.normal(0.0, scale, hidden_size),
            end_b=np.zeros(1),
        )


@dataclass
class ReaderParams(SpanParams):
    """Span extractor with a no-answer head.

    Attributes
    ----------
    na_w : np.ndarray
        ``h`` no-answer head weight, applied to the first sequence-start row
    na_b : np.ndarray
        No-answer head bias, shape ``(1,)``
    """

    na_w: Array
    na_b: Array

    @classmethod
    def initialize(cls, hidden_size: int, seed: int = 0) -> "ReaderParams":
        """Seeded initialization."""
        base = SpanParams.initialize(hidden_size, seed)
        rng = np.random.default_rng([seed, 1])
        return cls(
            context=base.context,
            start_w=base.start_w,
            start_b=base.start_b,
            end_w=base.end_w,
            end_b=base.end_b,
            na_w=rng.normal(0.0, 0.1 / math.sqrt(hidden_size), hidden_size),
            na_b=np.zeros(1),
        )


@dataclass(frozen=True)
class SpanScores:
    """Output of one span extractor forward pass.

    Attributes
    ----------
    start_probs, end_probs : np.ndarray
        Probabilities over all rows, zero on padding rows
    na_prob : float, optional
        No-answer probability, None without a no-answer head
    """

    start_probs: Array
    end_probs: Array
    na_prob: Optional[float]


@dataclass(frozen=True)
class SpanChoice:
    """Best admissible span, ``token_end`` exclusive."""

    doc: int
    token_start: int
    token_end: int
    prob: float


def _forward(
    encoded: EncodedDocs, params: SpanParams
) -> tuple[SpanScores, dict[str, Any]]:
    valid = encoded.valid_mask
    x, context_cache = transformer_forward(encoded.v, valid, params.context)
    start_logits = x @ params.start_w + params.start_b[0]
    end_logits = x @ params.end_w + params.end_b[0]
    start_probs = masked_softmax(start_logits, valid)
    end_probs = masked_softmax(end_logits, valid)
    na_logit = None
    na_prob = None
    if isinstance(params, ReaderParams):
        na_logit = float(x[0] @ params.na_w + params.na_b[0])
        na_prob = float(sigmoid(na_logit))
    scores = SpanScores(start_probs=start_probs, end_probs=end_probs, na_prob=na_prob)
    cache = {"x": x, "context": context_cache, "na_logit": na_logit}
    return scores, cache


def span_scores(encoded: EncodedDocs, params: SpanParams) -> SpanScores:
    """Compute start, end and no-answer probabilities."""
    scores, _ = _forward(encoded, params)
    return scores


def best_span(
    encoded: EncodedDocs,
    start_probs: Array,
    end_probs: Array,
    max_length: int,
) -> Optional[SpanChoice]:
    """Find the admissible span maximizing ``P_start[i] * P_end[j]``.

    Parameters
    ----------
    encoded : EncodedDocs
        Row layout of the encoding
    start_probs, end_probs : np.ndarray
        Probabilities over all rows
    max_length : int
        Spans satisfy ``j - i < max_length``

    Returns
    -------
    SpanChoice or None
        Best span, ties resolved towards the earlier document, then the
        earlier start, then the earlier end; None when no document token
        survived truncation
    """
    best: Optional[SpanChoice] = None
    for k in range(encoded.num_docs):
        rows = encoded.doc_rows(k)
        if not rows:
            continue
        first, n = rows[0], len(rows)
        starts = start_probs[first : first + n]
        ends = end_probs[first : first + n]
        width = min(max_length, n)
        table = np.full((n, width), -1.0)
        for offset in range(width):
            table[: n - offset, offset] = starts[: n - offset] * ends[offset:]
        flat = int(np.argmax(table))
        i, offset = divmod(flat, width)
        prob = float(table[i, offset])
        if best is None or prob > best.prob:
            best = SpanChoice(doc=k, token_start=i, token_end=i + offset + 1, prob=prob)
    return best


@dataclass(frozen=True)
class SpanLabel:
    """Gold span over tokens ``[token_start, token_end)`` of document ``doc``."""

    doc: int
    token_start: int
    token_end: int

    def to_record(self) -> dict[str, int]:
        """Return the sample file representation."""
        return {"doc": self.doc, "start": self.token_start, "end": self.token_end}

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "SpanLabel":
        """Build from a decoded sample file entry."""
        return cls(
            doc=int(record["doc"]),
            token_start=int(record["start"]),
            token_end=int(record["end"]),
        )


@dataclass(frozen=True)
class SpanExample:
    """A prepared span extraction sample.

    ``start_row`` and ``end_row`` index rows of ``encoded.v``; both are None for
    no-answer samples.
    """

    encoded: EncodedDocs
    start_row: Optional[int]
    end_row: Optional[int]

    @property
    def answerable(self) -> bool:
        """Whether the sample carries a gold span."""
        return self.start_row is not None


def prepare_example(
    question: Question,
    docs: Sequence[Document],
    label: Optional[SpanLabel],
    encoder: EncoderConfig,
) -> Optional[SpanExample]:
    """Encode one sample and map its gold span onto encoding rows.

    Returns None when any token of the gold span was truncated away.
    """
    encoded = get_encoder(encoder).encode_docs(question, docs)
    if label is None:
        return SpanExample(encoded=encoded, start_row=None, end_row=None)
    start_row = encoded.token_row(label.doc, label.token_start)
    end_row = encoded.token_row(label.doc, label.token_end - 1)
    if start_row is None or end_row is None:
        return None
    return SpanExample(encoded=encoded, start_row=start_row, end_row=end_row)


def prepare_examples(
    samples: Iterable[tuple[Question, Sequence[Document], Optional[SpanLabel]]],
    encoder: EncoderConfig,
) -> list[SpanExample]:
    """Prepare samples, skipping those whose gold span was truncated."""
    examples = []
    skipped = 0
    for question, docs, label in samples:
        example = prepare_example(question, docs, label, encoder)
        if example is None:
            skipped += 1
        else:
            examples.append(example)
    if skipped:
        warnings.warn(
            f"Skipped {skipped} samples whose gold span lies beyond "
            f"the encoder length of {encoder.max_length}",
            UserWarning,
            stacklevel=2,
        )
    return examples


def loss_and_grad(
    example: SpanExample, params: SpanParams
) -> tuple[float, SpanParams]:
    """Span extraction loss of one sample and its exact gradients.

    The loss is ``-ln P_start(gold) - ln P_end(gold)`` for answerable samples,
    plus the binary cross-entropy of the no-answer probability when ``params``
    has a no-answer head.

    Raises
    ------
    TrainingDivergedError
        If the loss is not finite
    """
    scores, cache = _forward(example.encoded, params)
    x = cache["x"]
    loss = 0.0
    dstart = np.zeros(x.shape[0])
    dend = np.zeros(x.shape[0])
    if example.start_row is not None and example.end_row is not None:
        loss -= float(np.log(scores.start_probs[example.start_row]))
        loss -= float(np.log(scores.end_probs[example.end_row]))
        dstart = scores.start_probs.copy()
        dstart[example.start_row] -= 1.0
        dend = scores.end_probs.copy()
        dend[example.end_row] -= 1.0

    dx = np.outer(dstart, params.start_w) + np.outer(dend, params.end_w)
    grads_heads: dict[str, Array] = {
        "start_w": dstart @ x,
        "start_b": np.array([dstart.sum()]),
        "end_w": dend @ x,
        "end_b": np.array([dend.sum()]),
    }
    if isinstance(params, ReaderParams):
        label = 0.0 if example.answerable else 1.0
        na_logit = cache["na_logit"]
        loss += float(bce_with_logits(na_logit, label))
        dna = float(sigmoid(na_logit)) - label
        dx[0] += dna * params.na_w
        grads_heads["na_w"] = dna * x[0]
        grads_heads["na_b"] = np.array([dna])

    if not math.isfinite(loss):
        raise TrainingDivergedError(f"Span extractor loss is not finite: {loss}")
    _, d_context = transformer_backward(dx, cache["context"], params.context)
    return loss, type(params)(context=d_context, **grads_heads)


def batch_loss_and_grad(
    batch: Sequence[SpanExample], params: SpanParams
) -> tuple[float, SpanParams]:
    """Average :func:`loss_and_grad` over a batch."""
    total = 0.0
    grads = params.zeros_like()
    for example in batch:
        loss, sample_grads = loss_and_grad(example, params)
        total += loss
        grads = grads.add(sample_grads)
    scale = 1.0 / len(batch)
    return total * scale, grads.map(lambda tensor: tensor * scale)
