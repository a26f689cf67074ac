"""Shared fixtures for the anyhop tests."""

import pytest

from anyhop.client.config import EncoderConfig, SynthSpec
from anyhop.client.corpus import build_corpus
from anyhop.client.evaluation import load_dataset
from anyhop.client.models import Corpus, QARecord
from anyhop.client.retriever import InvertedIndex, build_index
from anyhop.client.synth import SynthBenchmark, build_benchmark, write_benchmark


TINY_RECORDS = [
    {
        "id": "d1",
        "title": "Kobale",
        "text": "Kobale Temira headquarters . Kobale Rasuno rivalry . Kobale vimo .",
    },
    {
        "id": "d2",
        "title": "Rasuno",
        "text": "Rasuno Pelika headquarters . Rasuno Kobale rivalry .",
    },
    {
        "id": "d3",
        "title": "Dumavi",
        "text": "Dumavi Kobale employment . Dumavi tosa lesa .",
    },
    {
        "id": "d4",
        "title": "Felabo",
        "text": "Felabo Dumavi admiration . Felabo mofa .",
    },
]


@pytest.fixture
def tiny_records():
    """Return four linked corpus records."""
    return [dict(record) for record in TINY_RECORDS]


@pytest.fixture
def tiny_corpus() -> Corpus:
    """Return the corpus of the four linked records."""
    return build_corpus(TINY_RECORDS)


@pytest.fixture
def tiny_index(tiny_corpus) -> InvertedIndex:
    """Return the index of the tiny corpus."""
    return build_index(tiny_corpus)


@pytest.fixture
def small_encoder() -> EncoderConfig:
    """Return an encoder config small enough for fast tests."""
    return EncoderConfig(max_length=32, hidden_size=8, seed=0)


@pytest.fixture(scope="session")
def bench_spec() -> SynthSpec:
    """Return a small synthetic benchmark spec with one- and two-hop questions."""
    return SynthSpec(
        seed=3,
        n_docs=40,
        n_entities=12,
        n_questions=12,
        hop_mix={1: 0.5, 2: 0.5},
        vocab_size=50,
        dev_fraction=0.25,
    )


@pytest.fixture(scope="session")
def bench(bench_spec) -> SynthBenchmark:
    """Return the generated small benchmark."""
    return build_benchmark(bench_spec)


@pytest.fixture(scope="session")
def bench_corpus(bench) -> Corpus:
    """Return the corpus of the small benchmark."""
    return build_corpus(bench.corpus)


@pytest.fixture(scope="session")
def bench_index(bench_corpus) -> InvertedIndex:
    """Return the index of the small benchmark."""
    return build_index(bench_corpus)


@pytest.fixture(scope="session")
def bench_dataset(bench) -> list[QARecord]:
    """Return the QA records of the small benchmark."""
    return [QARecord.from_record(record) for record in bench.questions]


@pytest.fixture
def bench_dir(bench, tmp_path):
    """Write the small benchmark to disk and return its directory."""
    write_benchmark(bench, tmp_path / "bench")
    return tmp_path / "bench"


@pytest.fixture
def bench_files(bench_dir):
    """Return the corpus and QA paths of the written benchmark."""
    corpus_path = bench_dir / "corpus.jsonl"
    qa_path = bench_dir / "qa.jsonl"
    assert load_dataset(qa_path)
    return corpus_path, qa_path
