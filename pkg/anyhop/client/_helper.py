"""Helper classes for the client.

This module provides the classes behind :class:`anyhop.client.api.AnyHopClient`:
index and model persistence, model training from sample files, and batch
question answering.
"""

import logging
import warnings
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional, Union

from anyhop.client._client_vars import CORPUS_FILE, INDEX_FILE, MODEL_FILES
from anyhop.client.config import RunConfig
from anyhop.client.controller import Pipeline, PipelineModels
from anyhop.client.corpus import ingest_corpus, save_corpus
from anyhop.client.models import (
    Corpus,
    Prediction,
    QARecord,
    TrainResponse,
)
from anyhop.client.reader import train_reader
from anyhop.client.reranker import RerankerParams, train
from anyhop.client.retriever import InvertedIndex
from anyhop.client.span import ReaderParams, SpanParams
from anyhop.client.train_data import (
    load_samples,
    to_reranker_examples,
    to_span_examples,
)
from anyhop.client.updater import train_updater


logger = logging.getLogger(__name__)


class IndexStore:
    """Index directory holding the inverted index and a copy of its corpus.

    Parameters
    ----------
    index_dir : str or Path
        Directory of the index
    """

    def __init__(self, index_dir: Union[str, Path]):
        self.index_dir = Path(index_dir)

    @property
    def index_path(self) -> Path:
        """Path of the index archive."""
        return self.index_dir / INDEX_FILE

    @property
    def corpus_path(self) -> Path:
        """Path of the corpus copy."""
        return self.index_dir / CORPUS_FILE

    def save(self, index: InvertedIndex, corpus: Corpus) -> None:
        """Write the index and its corpus."""
        index.save(self.index_path)
        save_corpus(corpus, self.corpus_path)

    def load(self) -> tuple[InvertedIndex, Corpus]:
        """Read the index and its corpus.

        Raises
        ------
        FileNotFoundError
            If either file is missing
        """
        index = InvertedIndex.load(self.index_path)
        corpus = ingest_corpus(self.corpus_path)
        return index, corpus


class ModelStore:
    """Model directory holding one parameter file per trained model.

    Parameters
    ----------
    models_dir : str or Path
        Directory of the parameter files
    config : RunConfig
        Run configuration, fixing the encoder and the reranker architecture
    """

    def __init__(self, models_dir: Union[str, Path], config: RunConfig):
        self.models_dir = Path(models_dir)
        self.config = config

    def path(self, kind: str) -> Path:
        """Return the parameter file of a model kind."""
        if kind not in MODEL_FILES:
            raise ValueError(f"Unknown model kind: {kind}")
        return self.models_dir / MODEL_FILES[kind]

    def exists(self, kind: str) -> bool:
        """Whether the parameter file of a model kind exists."""
        return self.path(kind).is_file()

    def initial(self, kind: str, seed: Optional[int] = None) -> Any:
        """Return freshly initialized parameters of a model kind."""
        size = self.config.encoder.hidden_size
        seed = self.config.train.seed if seed is None else seed
        if kind == "reranker":
            return RerankerParams.initialize(
                size, num_layers=self.config.reranker.num_layers, seed=seed
            )
        if kind == "reader":
            return ReaderParams.initialize(size, seed=seed)
        if kind == "updater":
            return SpanParams.initialize(size, seed=seed)
        raise ValueError(f"Unknown model kind: {kind}")

    def load(self, kind: str) -> Any:
        """Load the parameters of a model kind.

        Raises
        ------
        FileNotFoundError
            If the parameter file is missing
        ModelMismatchError
            If the file does not match the configured encoder and architecture
        """
        template = self.initial(kind)
        return template.load_into(self.path(kind), kind, self.config.encoder)

    def save(self, kind: str, params: Any) -> Path:
        """Write the parameters of a model kind, returning the file path."""
        path = self.path(kind)
        params.save(path, kind, self.config.encoder)
        return path

    def pipeline_models(self) -> PipelineModels:
        """Load every model the pipeline needs.

        A missing updater is tolerated with a warning: questions are then never
        rewritten.
        """
        updater = None
        if self.exists("updater"):
            updater = self.load("updater")
        elif self.config.pipeline.use_updater:
            warnings.warn(
                f"No updater found at {self.path('updater')}, questions will not "
                "be updated",
                UserWarning,
                stacklevel=2,
            )
        return PipelineModels(
            reranker=self.load("reranker"),
            reader=self.load("reader"),
            updater=updater,
            encoder=self.config.encoder,
            entity_cap=self.config.reranker.entity_cap,
        )


class ModelTrainer:
    """Train one model kind from a sample file.

    Parameters
    ----------
    kind : str
        ``reranker``, ``reader`` or ``updater``
    config : RunConfig
        Run configuration, ``train.*`` keys drive the optimizer
    corpus : Corpus
        Documents the samples refer to
    """

    def __init__(self, kind: str, config: RunConfig, corpus: Corpus):
        if kind not in MODEL_FILES:
            raise ValueError(f"Unknown model kind: {kind}")
        self.kind = kind
        self.config = config
        self.corpus = corpus

    def _examples(self, samples_path: Union[str, Path]) -> list[Any]:
        samples = load_samples(samples_path, self.kind)
        encoder = self.config.encoder
        if self.kind == "reranker":
            return to_reranker_examples(
                samples, self.corpus, encoder, self.config.reranker.entity_cap
            )
        return to_span_examples(samples, self.corpus, encoder)

    def train(
        self, samples_path: Union[str, Path], out_dir: Union[str, Path]
    ) -> TrainResponse:
        """Train from freshly initialized parameters and save the result."""
        store = ModelStore(out_dir, self.config)
        examples = self._examples(samples_path)
        logger.info("Training %s on %d samples", self.kind, len(examples))
        train_config = self.config.train
        trainers: dict[str, Callable[..., tuple[Any, list[float]]]] = {
            "reranker": train,
            "reader": train_reader,
            "updater": train_updater,
        }
        params, losses = trainers[self.kind](
            examples,
            store.initial(self.kind),
            steps=train_config.steps,
            lr=train_config.lr,
            seed=train_config.seed,
            batch_size=train_config.batch_size,
            log_every=train_config.log_every,
        )
        path = store.save(self.kind, params)
        return TrainResponse(
            kind=self.kind,
            params_path=path,
            steps=len(losses),
            initial_loss=losses[0] if losses else None,
            final_loss=losses[-1] if losses else None,
        )


class BatchAnswerer:
    """Answer many dataset questions with one pipeline.

    Parameters
    ----------
    pipeline : Pipeline
        Shared, immutable pipeline
    workers : int, default=1
        Number of threads
    """

    def __init__(self, pipeline: Pipeline, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.pipeline = pipeline
        self.workers = workers

    def _predict(self, record: QARecord) -> Prediction:
        answer, trace = self.pipeline.answer(record.question)
        return Prediction(
            id=record.id,
            answer=answer.text,
            kept=trace.final_kept,
            hops=trace.num_hops,
            kind=answer.kind,
            low_confidence=answer.low_confidence,
        )

    def run(self, records: list[QARecord]) -> list[Prediction]:
        """Answer every record, returning predictions ordered by question id."""
        ordered = sorted(records, key=lambda record: record.id)
        if self.workers == 1:
            return [self._predict(record) for record in ordered]
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(self._predict, ordered))
