"""Unit tests for helper components in the anyhop.client module."""

import warnings

import numpy as np
import pytest

from anyhop.client._exceptions import ModelMismatchError
from anyhop.client._helper import BatchAnswerer, IndexStore, ModelStore, ModelTrainer
from anyhop.client.config import RunConfig
from anyhop.client.controller import Pipeline
from anyhop.client.models import QARecord
from anyhop.client.reranker import RerankerParams
from anyhop.client.span import ReaderParams, SpanParams
from anyhop.client.train_data import (
    build_reader_samples,
    build_reranker_samples,
    build_updater_samples,
    save_samples,
)


RECORDS = [
    QARecord("q2", "where is Kobale based ?", "Temira", ("d1",), 1),
    QARecord("q1", "where is the rival of Kobale based ?", "Pelika", ("d1", "d2"), 2),
    QARecord("q3", "who employs the one Felabo admires ?", "Kobale", ("d4", "d3"), 2),
]


@pytest.fixture
def run_config() -> RunConfig:
    """Return a configuration small enough for fast training."""
    return RunConfig.from_flat(
        {
            "encoder.L": 32,
            "encoder.h": 8,
            "pipeline.H": 2,
            "pipeline.N": 3,
            "pipeline.K": 2,
            "pipeline.D_cap": 4,
            "train.steps": 3,
            "train.lr": 0.01,
            "train.batch_size": 2,
        }
    )


class TestIndexStore:
    """Tests for the IndexStore class."""

    def test_save_and_load(self, tmp_path, tiny_corpus, tiny_index):
        """Test that the index and its corpus copy survive a round trip."""
        store = IndexStore(tmp_path / "index")
        store.save(tiny_index, tiny_corpus)
        assert store.index_path.is_file()
        assert store.corpus_path.is_file()

        index, corpus = store.load()
        assert corpus == tiny_corpus
        assert index.retrieve("Kobale", 3) == tiny_index.retrieve("Kobale", 3)

    def test_load_missing(self, tmp_path):
        """Test that a missing index directory raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            IndexStore(tmp_path / "missing").load()


class TestModelStore:
    """Tests for the ModelStore class."""

    def test_paths(self, tmp_path, run_config):
        """Test file names per model kind."""
        store = ModelStore(tmp_path, run_config)
        assert store.path("reranker") == tmp_path / "reranker.npz"
        assert not store.exists("reader")
        with pytest.raises(ValueError, match="Unknown model kind"):
            store.path("retriever")

    def test_initial_parameters(self, tmp_path, run_config):
        """Test the parameter class and size of every kind."""
        store = ModelStore(tmp_path, run_config)
        reranker = store.initial("reranker")
        assert isinstance(reranker, RerankerParams)
        assert reranker.hidden_size == 8
        assert reranker.num_layers == 2
        assert isinstance(store.initial("reader"), ReaderParams)
        updater = store.initial("updater")
        assert isinstance(updater, SpanParams)
        assert not isinstance(updater, ReaderParams)
        with pytest.raises(ValueError, match="Unknown model kind"):
            store.initial("graph")

    def test_save_and_load(self, tmp_path, run_config):
        """Test a round trip and the encoder check on load."""
        store = ModelStore(tmp_path, run_config)
        params = store.initial("reader", seed=4)
        path = store.save("reader", params)
        assert path == tmp_path / "reader.npz"
        assert store.exists("reader")
        loaded = store.load("reader")
        for name, tensor in params.named_tensors().items():
            assert np.array_equal(loaded.named_tensors()[name], tensor)

        wider = RunConfig.from_flat({"encoder.L": 32, "encoder.h": 16})
        with pytest.raises(ModelMismatchError):
            ModelStore(tmp_path, wider).load("reader")
        with pytest.raises(FileNotFoundError):
            store.load("updater")

    def test_pipeline_models_without_updater(self, tmp_path, run_config):
        """Test that a missing updater is tolerated with a warning."""
        store = ModelStore(tmp_path, run_config)
        store.save("reranker", store.initial("reranker"))
        store.save("reader", store.initial("reader"))
        with pytest.warns(UserWarning, match="No updater found"):
            models = store.pipeline_models()
        assert models.updater is None
        assert models.encoder == run_config.encoder
        assert models.entity_cap == run_config.reranker.entity_cap

        quiet = RunConfig.from_flat(
            {"encoder.L": 32, "encoder.h": 8, "pipeline.use_updater": False}
        )
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert ModelStore(tmp_path, quiet).pipeline_models().updater is None

        store.save("updater", store.initial("updater"))
        assert isinstance(store.pipeline_models().updater, SpanParams)


class TestModelTrainer:
    """Tests for the ModelTrainer class."""

    def test_unknown_kind(self, run_config, tiny_corpus):
        """Test that only trainable kinds are accepted."""
        with pytest.raises(ValueError, match="Unknown model kind"):
            ModelTrainer("retriever", run_config, tiny_corpus)

    @pytest.mark.parametrize("kind", ["reranker", "reader", "updater"])
    def test_train(self, kind, tmp_path, run_config, tiny_corpus, tiny_index):
        """Test training every kind from a sample file."""
        builders = {
            "reranker": lambda: build_reranker_samples(
                RECORDS, tiny_corpus, tiny_index
            ),
            "reader": lambda: build_reader_samples(RECORDS, tiny_corpus, tiny_index),
            "updater": lambda: build_updater_samples(RECORDS, tiny_corpus),
        }
        samples_path = tmp_path / f"{kind}.jsonl"
        save_samples(samples_path, builders[kind]())

        trainer = ModelTrainer(kind, run_config, tiny_corpus)
        response = trainer.train(samples_path, tmp_path / "models")
        assert response.kind == kind
        assert response.steps == 3
        assert response.params_path == tmp_path / "models" / f"{kind}.npz"
        assert response.params_path.is_file()
        assert np.isfinite(response.initial_loss)
        assert np.isfinite(response.final_loss)
        ModelStore(tmp_path / "models", run_config).load(kind)

    def test_train_without_samples(self, tmp_path, run_config, tiny_corpus):
        """Test that an empty sample file cannot be trained on."""
        samples_path = tmp_path / "reader.jsonl"
        samples_path.write_text("")
        trainer = ModelTrainer("reader", run_config, tiny_corpus)
        with pytest.raises(ValueError, match="No training samples"):
            trainer.train(samples_path, tmp_path / "models")


class TestBatchAnswerer:
    """Tests for the BatchAnswerer class."""

    @pytest.fixture
    def pipeline(self, tmp_path, run_config, tiny_corpus, tiny_index) -> Pipeline:
        """Return a pipeline with untrained models over the tiny corpus."""
        store = ModelStore(tmp_path, run_config)
        for kind in ("reranker", "reader", "updater"):
            store.save(kind, store.initial(kind))
        return Pipeline(
            tiny_index, tiny_corpus, store.pipeline_models(), run_config.pipeline
        )

    def test_rejects_zero_workers(self, pipeline):
        """Test that at least one worker is required."""
        with pytest.raises(ValueError, match="workers"):
            BatchAnswerer(pipeline, workers=0)

    def test_predictions_are_ordered(self, pipeline):
        """Test id order and agreement with single questions."""
        predictions = BatchAnswerer(pipeline).run(RECORDS)
        assert [prediction.id for prediction in predictions] == ["q1", "q2", "q3"]
        for prediction in predictions:
            record = next(r for r in RECORDS if r.id == prediction.id)
            answer, trace = pipeline.answer(record.question)
            assert prediction.answer == answer.text
            assert prediction.kept == trace.final_kept
            assert prediction.hops == trace.num_hops
            assert prediction.kind is answer.kind

    def test_threads_match_sequential_run(self, pipeline):
        """Test that several workers give the same predictions."""
        sequential = BatchAnswerer(pipeline, workers=1).run(RECORDS)
        threaded = BatchAnswerer(pipeline, workers=3).run(RECORDS)
        assert threaded == sequential
