"""Deterministic contextual encoder for (question, document) pairs.

Each pair is laid out as ``[CLS] question [SEP] document [SEP]`` and padded or
truncated to ``L`` rows, truncating the document before the question. A
position's embedding is the sum of a seeded-hash token vector, a segment vector
(question or document) and a sinusoidal position vector, followed by one
window-3 mean-mixing pass. Afterwards the sequence-start row holds the mean of
the pair's non-padding rows, so it summarizes the pair the way the start row of
a pretrained encoder does.

Any encoder producing an ``L x h`` block per pair together with the row layout
of :class:`EncodedDocs` can replace this one.
"""

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import numpy.typing as npt

from anyhop.client._client_vars import CLS_TOKEN, SEP_TOKEN
from anyhop.client._exceptions import MentionTruncatedError
from anyhop.client.config import EncoderConfig
from anyhop.client.corpus import tokenize_question
from anyhop.client.models import Document, EntityMention, Question


SEGMENT_SCALE = 0.5
POSITION_SCALE = 0.5

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class EncodedPair:
    """One encoded (question, document) pair.

    Attributes
    ----------
    block : np.ndarray
        ``L x h`` rows, zero beyond ``length``
    length : int
        Number of non-padding rows
    question_length : int
        Question tokens kept, occupying rows ``1 .. question_length``
    doc_length : int
        Document tokens kept, starting at row ``question_length + 2``
    """

    block: Array
    length: int
    question_length: int
    doc_length: int

    @property
    def doc_offset(self) -> int:
        """Row of the first document token."""
        return self.question_length + 2


@dataclass(frozen=True)
class EncodedDocs:
    """Concatenated encodings of one question against several documents.

    Attributes
    ----------
    v : np.ndarray
        ``(|D| * L) x h`` tensor, block ``k`` holds document ``k``
    max_length : int
        Rows per block ``L``
    pairs : tuple[EncodedPair, ...]
        Layout of every block
    """

    v: Array
    max_length: int
    pairs: tuple[EncodedPair, ...]

    @property
    def num_docs(self) -> int:
        """Number of encoded documents."""
        return len(self.pairs)

    @property
    def cls_positions(self) -> list[int]:
        """Row of each document's sequence-start marker, ``k * L``."""
        return [k * self.max_length for k in range(self.num_docs)]

    def token_row(self, doc: int, token: int) -> Optional[int]:
        """Row of document token ``token`` of block ``doc``, None if truncated."""
        pair = self.pairs[doc]
        if not 0 <= token < pair.doc_length:
            return None
        return doc * self.max_length + pair.doc_offset + token

    def mention_rows(self, doc: int, mention: EntityMention) -> Optional[list[int]]:
        """Rows of a mention, None when any of its tokens was truncated."""
        if mention.token_end > self.pairs[doc].doc_length:
            return None
        start = doc * self.max_length + self.pairs[doc].doc_offset
        return list(range(start + mention.token_start, start + mention.token_end))

    def question_rows(self, doc: int = 0) -> list[int]:
        """Rows of the question tokens in block ``doc``."""
        start = doc * self.max_length + 1
        return list(range(start, start + self.pairs[doc].question_length))

    def doc_rows(self, doc: int) -> list[int]:
        """Rows of the kept document tokens of block ``doc``."""
        start = doc * self.max_length + self.pairs[doc].doc_offset
        return list(range(start, start + self.pairs[doc].doc_length))

    @property
    def valid_mask(self) -> npt.NDArray[np.bool_]:
        """True for every non-padding row."""
        mask = np.zeros(self.v.shape[0], dtype=bool)
        for k, pair in enumerate(self.pairs):
            mask[k * self.max_length : k * self.max_length + pair.length] = True
        return mask

    @property
    def doc_token_mask(self) -> npt.NDArray[np.bool_]:
        """True for rows holding document tokens."""
        mask = np.zeros(self.v.shape[0], dtype=bool)
        for k in range(self.num_docs):
            mask[self.doc_rows(k)] = True
        return mask

    @property
    def row_doc(self) -> npt.NDArray[np.int64]:
        """Block index of every row."""
        return np.repeat(np.arange(self.num_docs), self.max_length)


class HashEncoder:
    """Seeded-hash embedding encoder.

    Parameters
    ----------
    config : EncoderConfig
        Sequence length, embedding size and seed
    """

    def __init__(self, config: EncoderConfig):
        self.config = config
        size = config.hidden_size
        rng = np.random.default_rng([config.seed, 1])
        self._segments = rng.standard_normal((2, size)) * SEGMENT_SCALE
        self._positions = _sinusoidal(config.max_length, size) * POSITION_SCALE
        self._token_cache: dict[str, Array] = {}

    def token_vector(self, token: str) -> Array:
        """Return the hash vector of a token, case-insensitive."""
        key = token.casefold()
        vector = self._token_cache.get(key)
        if vector is None:
            digest = hashlib.blake2b(
                f"{self.config.seed}\x00{key}".encode(), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vector = rng.standard_normal(self.config.hidden_size)
            self._token_cache[key] = vector
        return vector

    def encode_tokens(
        self, question_tokens: Sequence[str], doc_tokens: Sequence[str]
    ) -> EncodedPair:
        """Encode a pair given as token sequences."""
        length_limit = self.config.max_length
        available = length_limit - 3
        question = list(question_tokens[:available])
        doc = list(doc_tokens[: available - len(question)])

        sequence = [CLS_TOKEN, *question, SEP_TOKEN, *doc, SEP_TOKEN]
        n = len(sequence)
        segment_ids = np.array([0] * (len(question) + 2) + [1] * (len(doc) + 1))
        x = np.stack([self.token_vector(token) for token in sequence])
        x = x + self._segments[segment_ids] + self._positions[:n]

        padded = np.vstack([np.zeros((1, x.shape[1])), x, np.zeros((1, x.shape[1]))])
        counts = np.full(n, 3.0)
        counts[0] -= 1
        counts[-1] -= 1
        mixed = (padded[:-2] + padded[1:-1] + padded[2:]) / counts[:, None]
        mixed[0] = mixed.mean(axis=0)

        block = np.zeros((length_limit, self.config.hidden_size))
        block[:n] = mixed
        return EncodedPair(
            block=block,
            length=n,
            question_length=len(question),
            doc_length=len(doc),
        )

    def encode_pair(self, question: Question, doc: Document) -> EncodedPair:
        """Encode one (question, document) pair."""
        return self.encode_tokens(tokenize_question(question), doc.tokens)

    def encode_docs(self, question: Question, docs: Sequence[Document]) -> EncodedDocs:
        """Encode a question against every document and concatenate the blocks."""
        question_tokens = tokenize_question(question)
        pairs = tuple(self.encode_tokens(question_tokens, doc.tokens) for doc in docs)
        v = (
            np.vstack([pair.block for pair in pairs])
            if pairs
            else np.zeros((0, self.config.hidden_size))
        )
        return EncodedDocs(v=v, max_length=self.config.max_length, pairs=pairs)


def _sinusoidal(length: int, size: int) -> Array:
    positions = np.arange(length)[:, None]
    rates = 1.0 / np.power(10000.0, np.arange(0, size, 2) / size)
    table = np.zeros((length, size))
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates)
    return table


@lru_cache(maxsize=8)
def get_encoder(config: EncoderConfig) -> HashEncoder:
    """Return the shared encoder instance of a configuration."""
    return HashEncoder(config)


def encode_pair(question: Question, doc: Document, config: EncoderConfig) -> Array:
    """Encode one (question, document) pair into an ``L x h`` block."""
    return get_encoder(config).encode_pair(question, doc).block


def encode_docs(
    question: Question, docs: Sequence[Document], config: EncoderConfig
) -> EncodedDocs:
    """Encode a question against an ordered document list."""
    return get_encoder(config).encode_docs(question, docs)


def _pool(rows: Array) -> Array:
    return np.concatenate([rows.mean(axis=0), rows.max(axis=0)])


def pool_entity(encoded: EncodedDocs, doc: int, mention: EntityMention) -> Array:
    """Mean and max pool a mention's token rows into a ``2h`` vector.

    Raises
    ------
    MentionTruncatedError
        If any token of the mention lies beyond the encoded region
    """
    rows = encoded.mention_rows(doc, mention)
    if rows is None:
        raise MentionTruncatedError(
            f"Mention {mention.entity_key!r} of document {doc} was truncated"
        )
    return _pool(encoded.v[rows])


def pool_question(encoded: EncodedDocs, doc: int = 0) -> Array:
    """Mean and max pool the question rows of block ``doc``.

    The question rows are identical in every block; an empty question pools to
    the zero vector.
    """
    rows = encoded.question_rows(doc)
    if not rows:
        return np.zeros(2 * encoded.v.shape[1])
    return _pool(encoded.v[rows])
