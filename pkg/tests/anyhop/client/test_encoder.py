"""Tests for the hash encoder and the pooling helpers."""

import numpy as np
import pytest

from anyhop.client._exceptions import MentionTruncatedError
from anyhop.client.encoder import (
    HashEncoder,
    encode_docs,
    encode_pair,
    pool_entity,
    pool_question,
)
from anyhop.client.models import EntityMention, Question


QUESTION = Question("where is Kobale ?")


def test_encode_pair_layout(tiny_corpus, small_encoder):
    """Test the row layout of one encoded pair."""
    encoder = HashEncoder(small_encoder)
    pair = encoder.encode_pair(QUESTION, tiny_corpus.get("d2"))
    assert pair.block.shape == (32, 8)
    assert pair.question_length == 4
    assert pair.doc_length == 8
    assert pair.length == 4 + 8 + 3
    assert pair.doc_offset == 6
    assert not pair.block[pair.length :].any()
    assert np.abs(pair.block[: pair.length]).sum(axis=1).min() > 0


def test_encoding_is_deterministic(tiny_corpus, small_encoder):
    """Test that independent encoders agree bit for bit."""
    doc = tiny_corpus.get("d1")
    first = HashEncoder(small_encoder).encode_pair(QUESTION, doc).block
    second = HashEncoder(small_encoder).encode_pair(QUESTION, doc).block
    assert np.array_equal(first, second)
    assert np.array_equal(first, encode_pair(QUESTION, doc, small_encoder))


def test_seed_changes_encoding(tiny_corpus, small_encoder):
    """Test that another seed gives another encoding."""
    doc = tiny_corpus.get("d1")
    other = small_encoder.model_copy(update={"seed": 1})
    assert not np.array_equal(
        encode_pair(QUESTION, doc, small_encoder), encode_pair(QUESTION, doc, other)
    )


def test_token_vectors_ignore_case(small_encoder):
    """Test that hash vectors are keyed by the casefolded token."""
    encoder = HashEncoder(small_encoder)
    assert np.array_equal(
        encoder.token_vector("Kobale"), encoder.token_vector("KOBALE")
    )
    assert not np.array_equal(
        encoder.token_vector("kobale"), encoder.token_vector("rasuno")
    )


def test_document_truncated_before_question(small_encoder):
    """Test that the document gives way to the question."""
    encoder = HashEncoder(small_encoder.model_copy(update={"max_length": 8}))
    pair = encoder.encode_tokens(["a", "b", "c"], ["x", "y", "z", "w"])
    assert (pair.question_length, pair.doc_length, pair.length) == (3, 2, 8)

    long_question = encoder.encode_tokens(list("abcdefghij"), ["x"])
    assert (long_question.question_length, long_question.doc_length) == (5, 0)


def test_encode_docs_concatenates_blocks(tiny_corpus, small_encoder):
    """Test that block k of the concatenation is the encoding of document k."""
    docs = [tiny_corpus.get(doc_id) for doc_id in ("d3", "d1")]
    encoded = encode_docs(QUESTION, docs, small_encoder)
    assert encoded.v.shape == (64, 8)
    assert encoded.cls_positions == [0, 32]
    for k, doc in enumerate(docs):
        block = encoded.v[k * 32 : (k + 1) * 32]
        assert np.array_equal(block, encode_pair(QUESTION, doc, small_encoder))
    assert encoded.valid_mask.sum() == sum(pair.length for pair in encoded.pairs)
    assert encoded.doc_token_mask.sum() == 8 + 11
    assert list(encoded.row_doc[[0, 31, 32, 63]]) == [0, 0, 1, 1]


def test_encode_docs_empty(small_encoder):
    """Test that an empty document list encodes to zero rows."""
    encoded = encode_docs(QUESTION, [], small_encoder)
    assert encoded.v.shape == (0, 8)
    assert encoded.num_docs == 0


def test_row_lookup(tiny_corpus, small_encoder):
    """Test token and mention row lookup, with truncation."""
    config = small_encoder.model_copy(update={"max_length": 12})
    encoded = encode_docs(QUESTION, [tiny_corpus.get("d1")], config)
    assert encoded.pairs[0].doc_length == 5
    assert encoded.token_row(0, 0) == 6
    assert encoded.token_row(0, 5) is None
    assert encoded.mention_rows(0, EntityMention("kobale", 4, 5)) == [10]
    assert encoded.mention_rows(0, EntityMention("rasuno", 5, 6)) is None
    assert encoded.question_rows() == [1, 2, 3, 4]
    assert encoded.doc_rows(0) == [6, 7, 8, 9, 10]


def test_pool_entity(tiny_corpus, small_encoder):
    """Test mean and max pooling of mention rows."""
    encoded = encode_docs(QUESTION, [tiny_corpus.get("d2")], small_encoder)
    mention = EntityMention("rasuno pelika", 0, 2)
    rows = encoded.v[[6, 7]]
    pooled = pool_entity(encoded, 0, mention)
    assert pooled.shape == (16,)
    assert np.allclose(pooled[:8], rows.mean(axis=0))
    assert np.allclose(pooled[8:], rows.max(axis=0))


def test_pool_entity_truncated(tiny_corpus, small_encoder):
    """Test that pooling a truncated mention raises MentionTruncatedError."""
    config = small_encoder.model_copy(update={"max_length": 12})
    encoded = encode_docs(QUESTION, [tiny_corpus.get("d1")], config)
    with pytest.raises(MentionTruncatedError, match="kobale"):
        pool_entity(encoded, 0, EntityMention("kobale", 8, 9))


def test_question_rows_match_across_blocks(tiny_corpus, small_encoder):
    """Test that every block holds the same question encoding."""
    docs = [tiny_corpus.get(doc_id) for doc_id in ("d1", "d2", "d4")]
    encoded = encode_docs(QUESTION, docs, small_encoder)
    first = pool_question(encoded, 0)
    for k in (1, 2):
        assert np.array_equal(pool_question(encoded, k), first)


def test_pool_question_empty(tiny_corpus, small_encoder):
    """Test that an empty question pools to zeros."""
    encoded = encode_docs(Question(""), [tiny_corpus.get("d4")], small_encoder)
    assert encoded.question_rows() == []
    assert np.array_equal(pool_question(encoded), np.zeros(16))
