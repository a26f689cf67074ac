"""Tests for the synthetic benchmark generator."""

import pytest

from anyhop.client._exceptions import InfeasibleSpecError
from anyhop.client.config import SynthSpec
from anyhop.client.corpus import ingest_corpus, tokenize
from anyhop.client.evaluation import load_dataset
from anyhop.client.retriever import extract_terms, query_terms
from anyhop.client.synth import (
    QUESTION_WORDS,
    _hop_counts,
    build_benchmark,
    generate,
)


@pytest.mark.parametrize(
    "n_questions, hop_mix, expected",
    [
        (10, {1: 1 / 3, 2: 2 / 3}, {1: 3, 2: 7}),
        (3, {1: 0.5, 2: 0.5}, {1: 2, 2: 1}),
        (6, {1: 0.5, 2: 0.25, 3: 0.25}, {1: 3, 2: 2, 3: 1}),
        (4, {3: 1.0}, {3: 4}),
    ],
)
def test_hop_counts(n_questions, hop_mix, expected):
    """Test largest-remainder splitting with ties going to fewer hops."""
    counts = _hop_counts(n_questions, hop_mix)
    assert counts == expected
    assert sum(counts.values()) == n_questions


def test_build_benchmark_is_deterministic(bench_spec, bench):
    """Test that one spec always yields the same records."""
    assert build_benchmark(bench_spec) == bench
    other = build_benchmark(bench_spec.model_copy(update={"seed": 4}))
    assert other != bench


def test_benchmark_shape(bench_spec, bench):
    """Test document and question counts, ids and splits."""
    assert len(bench.corpus) == bench_spec.n_docs
    ids = [record["id"] for record in bench.corpus]
    assert ids == sorted(ids)
    assert len(set(ids)) == len(ids)
    assert len({record["title"] for record in bench.corpus}) == len(ids)

    assert len(bench.questions) == bench_spec.n_questions
    assert bench.questions_per_hops == {1: 6, 2: 6}
    assert sum(record["split"] == "dev" for record in bench.questions) == 3
    qids = [record["id"] for record in bench.questions]
    assert qids == sorted(qids)


def test_questions_follow_their_chain(bench):
    """Test the answer location and the bridge titles of every question."""
    docs = {record["id"]: record for record in bench.corpus}
    for question in bench.questions:
        chain = [docs[doc_id] for doc_id in question["supporting"]]
        assert len(chain) == question["hops"]
        assert question["answer"] in tokenize(chain[-1]["text"])
        assert chain[0]["title"] in question["question"]
        for current, following in zip(chain, chain[1:]):
            assert following["title"] in tokenize(current["text"])


def test_last_hop_shares_no_term_with_question(bench):
    """Test that multi-hop answers are unreachable from the question alone."""
    docs = {record["id"]: record for record in bench.corpus}
    for question in bench.questions:
        if question["hops"] < 2:
            continue
        last = docs[question["supporting"][-1]]
        doc_terms = extract_terms(tokenize(last["text"]))
        assert not set(query_terms(question["question"])) & set(doc_terms)


def test_question_words_never_occur_in_documents(bench):
    """Test that documents avoid the question template words."""
    for record in bench.corpus:
        tokens = {token.casefold() for token in tokenize(record["text"])}
        assert not tokens & QUESTION_WORDS


def test_three_hop_questions():
    """Test chains through a mentor to an employer."""
    bench = build_benchmark(
        SynthSpec(
            seed=1,
            n_docs=30,
            n_entities=8,
            n_questions=6,
            hop_mix={1: 0.0, 2: 0.5, 3: 0.5},
            vocab_size=40,
        )
    )
    three = [record for record in bench.questions if record["hops"] == 3]
    assert len(three) == 3
    for record in three:
        assert "mentor" in record["question"]
        assert len(set(record["supporting"])) == 3


@pytest.mark.parametrize(
    "spec",
    [
        SynthSpec(n_docs=10, n_entities=3, n_questions=5, hop_mix={1: 1.0}),
        SynthSpec(n_docs=4, n_entities=3, n_questions=3, hop_mix={2: 1.0}),
        SynthSpec(n_docs=4, n_entities=2, n_questions=3, hop_mix={3: 1.0}),
    ],
)
def test_infeasible_specs(spec):
    """Test that specs without enough entities are rejected."""
    with pytest.raises(InfeasibleSpecError):
        build_benchmark(spec)


@pytest.mark.parametrize(
    "hop_mix",
    [{}, {4: 1.0}, {1: 0.5}, {1: 1.5, 2: -0.5}],
)
def test_spec_validation(hop_mix):
    """Test the hop mix validator."""
    with pytest.raises(ValueError):
        SynthSpec(hop_mix=hop_mix)


def test_generate_writes_readable_files(bench_spec, tmp_path):
    """Test that generated files load as a corpus and a dataset."""
    corpus_path, qa_path = generate(bench_spec, tmp_path / "bench")
    corpus = ingest_corpus(corpus_path)
    dataset = load_dataset(qa_path)
    assert len(corpus) == bench_spec.n_docs
    assert len(dataset) == bench_spec.n_questions
    for record in dataset:
        assert all(doc_id in corpus for doc_id in record.supporting)
