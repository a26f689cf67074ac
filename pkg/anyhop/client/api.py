"""anyhop client for programmatic access.

This module provides the main client class of the package. It wires corpus
ingestion, indexing, synthetic benchmark generation, training sample
construction, model training, question answering and evaluation behind one
configuration.

See Also
--------
anyhop.client._helper : Index and model persistence, training and batch runs
anyhop.client.models : Data models for API responses
"""

import logging
from pathlib import Path
from typing import Optional, Union

from pydantic import ValidationError

from anyhop.client._exceptions import ConfigurationError
from anyhop.client._helper import BatchAnswerer, IndexStore, ModelStore, ModelTrainer
from anyhop.client._utils import load_yaml_config, resolve_models_dir, write_jsonl
from anyhop.client.config import RunConfig, SynthSpec, load_run_config
from anyhop.client.controller import Pipeline
from anyhop.client.corpus import ingest_corpus
from anyhop.client.evaluation import evaluate, load_dataset, load_predictions
from anyhop.client.graph import build_graph, dump_edge_list
from anyhop.client.models import (
    AnswerResponse,
    EvalReport,
    IndexResponse,
    Prediction,
    Question,
    SamplesResponse,
    SynthResponse,
    TrainResponse,
)
from anyhop.client.retriever import build_index
from anyhop.client.synth import build_benchmark, write_benchmark
from anyhop.client.train_data import (
    Sample,
    build_reader_samples,
    build_reranker_samples,
    build_updater_samples,
    sample_counts,
    save_samples,
)


logger = logging.getLogger(__name__)


class AnyHopClient:
    """Client for indexing, training, answering and evaluating.

    Every operation reads its tunables from one :class:`RunConfig`.

    Methods
    -------
    index_corpus(corpus_path, index_dir)
        Ingest a corpus file and persist its inverted index
    load_spec(spec_path)
        Read a synthetic benchmark spec
    generate_benchmark(spec, out_dir)
        Write a synthetic corpus and QA dataset
    build_samples(kind, qa_path, index_dir, out_path, seed, models_dir, split)
        Build and persist training samples of one model kind
    train_model(kind, samples_path, index_dir, out_dir)
        Train one model kind from a sample file
    answer(question, models_dir, index_dir, graph_path)
        Answer one question
    answer_batch(qa_path, out_path, models_dir, index_dir, workers, split)
        Answer every question of a dataset and write the predictions
    evaluate(pred_path, gold_path, split)
        Score a prediction file against a dataset

    Examples
    --------
    >>> from anyhop.client import AnyHopClient
    >>> client = AnyHopClient()
    >>> client.index_corpus("bench/corpus.jsonl", "bench/index")
    >>> response = client.answer(
    ...     "where is Kobale based ?", models_dir="models", index_dir="bench/index"
    ... )
    >>> print(response.answer.text, response.trace.num_hops)
    """

    def __init__(self, config: Optional[RunConfig] = None) -> None:
        """Initialize the client, loading the default configuration if needed."""
        self.config = config if config is not None else load_run_config()
        self._pipelines: dict[tuple[Path, Path], Pipeline] = {}

    def _index_dir(self, index_dir: Optional[Union[str, Path]]) -> Path:
        if index_dir is not None:
            return Path(index_dir)
        if self.config.paths.index is not None:
            return self.config.paths.index
        raise ValueError("No index directory given, pass one or set paths.index")

    def _models_dir(self, models_dir: Optional[Union[str, Path]]) -> Path:
        if models_dir is None and self.config.paths.models is not None:
            return self.config.paths.models
        return resolve_models_dir(models_dir)

    def index_corpus(
        self, corpus_path: Union[str, Path], index_dir: Union[str, Path]
    ) -> IndexResponse:
        """Ingest a corpus file and persist its index.

        Parameters
        ----------
        corpus_path : str or Path
            Line-delimited corpus file with ``id``, ``title`` and ``text``
        index_dir : str or Path
            Output directory, receives the index and a copy of the corpus

        Returns
        -------
        IndexResponse
            Document, term and posting counts

        Raises
        ------
        CorpusFormatError
            If a corpus line is malformed
        DuplicateDocumentError
            If two records share an id
        EmptyCorpusError
            If the corpus holds no documents
        """
        corpus = ingest_corpus(corpus_path)
        index = build_index(corpus)
        store = IndexStore(index_dir)
        store.save(index, corpus)
        logger.info("Indexed %d documents into %s", index.n_docs, store.index_dir)
        return IndexResponse(
            index_dir=store.index_dir,
            n_docs=index.n_docs,
            n_terms=len(index.vocab),
            n_postings=index.n_postings,
        )

    @staticmethod
    def load_spec(spec_path: Union[str, Path]) -> SynthSpec:
        """Read and validate a YAML benchmark spec.

        Raises
        ------
        ConfigurationError
            If a key is unknown or a value is invalid
        """
        raw = load_yaml_config(spec_path)
        try:
            return SynthSpec.model_validate(raw)
        except ValidationError as err:
            raise ConfigurationError(f"Invalid spec {spec_path}: {err}") from err

    def generate_benchmark(
        self, spec: Union[SynthSpec, str, Path], out_dir: Union[str, Path]
    ) -> SynthResponse:
        """Write a synthetic corpus and QA dataset.

        Parameters
        ----------
        spec : SynthSpec, str or Path
            Spec object or path of a YAML spec
        out_dir : str or Path
            Output directory

        Returns
        -------
        SynthResponse
            Output paths and question counts per gold chain length
        """
        if not isinstance(spec, SynthSpec):
            spec = self.load_spec(spec)
        benchmark = build_benchmark(spec)
        corpus_path, qa_path = write_benchmark(benchmark, out_dir)
        return SynthResponse(
            corpus_path=corpus_path,
            qa_path=qa_path,
            n_docs=len(benchmark.corpus),
            questions_per_hops=benchmark.questions_per_hops,
        )

    def build_samples(
        self,
        kind: str,
        qa_path: Union[str, Path],
        index_dir: Optional[Union[str, Path]],
        out_path: Union[str, Path],
        seed: Optional[int] = None,
        models_dir: Optional[Union[str, Path]] = None,
        split: Optional[str] = "train",
    ) -> SamplesResponse:
        """Build and persist training samples of one model kind.

        Parameters
        ----------
        kind : str
            ``reranker``, ``reader`` or ``updater``
        qa_path : str or Path
            QA dataset with gold supporting documents
        index_dir : str or Path, optional
            Index directory, falls back to ``paths.index``
        out_path : str or Path
            Sample file to write
        seed : int, optional
            Sampling seed, defaults to ``train.seed``
        models_dir : str or Path, optional
            Directory with a trained updater; reranker samples then rewrite
            questions with predicted instead of oracle clue spans
        split : str, optional
            Dataset split to sample from, ``None`` for every question

        Returns
        -------
        SamplesResponse
            Output path and sample counts
        """
        seed = self.config.train.seed if seed is None else seed
        index, corpus = IndexStore(self._index_dir(index_dir)).load()
        dataset = [
            record
            for record in load_dataset(qa_path)
            if split is None or record.split == split
        ]
        samples: list[Sample]
        if kind == "reranker":
            updater = None
            if models_dir is not None:
                store = ModelStore(models_dir, self.config)
                if store.exists("updater"):
                    updater = store.load("updater")
            samples = list(
                build_reranker_samples(
                    dataset,
                    corpus,
                    index,
                    seed=seed,
                    updater=updater,
                    encoder=self.config.encoder,
                )
            )
        elif kind == "reader":
            samples = list(build_reader_samples(dataset, corpus, index, seed=seed))
        elif kind == "updater":
            samples = list(
                build_updater_samples(dataset, corpus, seed=seed, index=index)
            )
        else:
            raise ValueError(f"Unknown sample kind: {kind}")
        n_samples = save_samples(out_path, samples)
        logger.info("Wrote %d %s samples to %s", n_samples, kind, out_path)
        return SamplesResponse(
            kind=kind,
            path=Path(out_path),
            n_samples=n_samples,
            counts=sample_counts(samples),
        )

    def train_model(
        self,
        kind: str,
        samples_path: Union[str, Path],
        index_dir: Optional[Union[str, Path]],
        out_dir: Union[str, Path],
    ) -> TrainResponse:
        """Train one model kind from a sample file.

        Parameters
        ----------
        kind : str
            ``reranker``, ``reader`` or ``updater``
        samples_path : str or Path
            Sample file written by :meth:`build_samples`
        index_dir : str or Path, optional
            Index directory holding the documents the samples refer to
        out_dir : str or Path
            Model directory receiving the parameter file

        Returns
        -------
        TrainResponse
            Parameter file path and first and last training losses

        Raises
        ------
        TrainingDivergedError
            If the loss becomes non-finite
        """
        _, corpus = IndexStore(self._index_dir(index_dir)).load()
        return ModelTrainer(kind, self.config, corpus).train(samples_path, out_dir)

    def _pipeline(
        self,
        models_dir: Optional[Union[str, Path]],
        index_dir: Optional[Union[str, Path]],
    ) -> Pipeline:
        key = (self._models_dir(models_dir), self._index_dir(index_dir))
        if key not in self._pipelines:
            index, corpus = IndexStore(key[1]).load()
            models = ModelStore(key[0], self.config).pipeline_models()
            self._pipelines[key] = Pipeline(
                index, corpus, models, self.config.pipeline
            )
        return self._pipelines[key]

    def answer(
        self,
        question: str,
        models_dir: Optional[Union[str, Path]] = None,
        index_dir: Optional[Union[str, Path]] = None,
        graph_path: Optional[Union[str, Path]] = None,
    ) -> AnswerResponse:
        """Answer one question.

        Parameters
        ----------
        question : str
            Question text
        models_dir : str or Path, optional
            Model directory, falls back to ``paths.models`` then
            ``ANYHOP_MODELS_DIR``
        index_dir : str or Path, optional
            Index directory, falls back to ``paths.index``
        graph_path : str or Path, optional
            Write the entity graph of the final kept documents here

        Returns
        -------
        AnswerResponse
            Answer and per-hop trace
        """
        pipeline = self._pipeline(models_dir, index_dir)
        answer, trace = pipeline.answer(question)
        if graph_path is not None and trace.final_kept:
            final = Question(
                original_text=question,
                clue_spans=tuple(h.clue for h in trace.hops[:-1] if h.clue),
                hop=trace.num_hops,
            )
            docs = [pipeline.corpus.get(doc_id) for doc_id, _ in trace.final_kept]
            graph = build_graph(final, docs, pipeline.models.entity_cap)
            dump_edge_list(graph, graph_path)
        return AnswerResponse(question=question, answer=answer, trace=trace)

    def answer_batch(
        self,
        qa_path: Union[str, Path],
        out_path: Union[str, Path],
        models_dir: Optional[Union[str, Path]] = None,
        index_dir: Optional[Union[str, Path]] = None,
        workers: int = 1,
        split: Optional[str] = None,
    ) -> list[Prediction]:
        """Answer every question of a dataset and write the predictions.

        Parameters
        ----------
        qa_path : str or Path
            QA dataset file
        out_path : str or Path
            Prediction file, one line per question ordered by id
        models_dir : str or Path, optional
            Model directory
        index_dir : str or Path, optional
            Index directory
        workers : int, default=1
            Number of answering threads
        split : str, optional
            Only answer questions of this split

        Returns
        -------
        list[Prediction]
            Predictions ordered by question id
        """
        records = [
            record
            for record in load_dataset(qa_path)
            if split is None or record.split == split
        ]
        runner = BatchAnswerer(self._pipeline(models_dir, index_dir), workers)
        predictions = runner.run(records)
        write_jsonl(out_path, (prediction.to_record() for prediction in predictions))
        return predictions

    def evaluate(
        self,
        pred_path: Union[str, Path],
        gold_path: Union[str, Path],
        split: Optional[str] = None,
    ) -> EvalReport:
        """Score a prediction file against a QA dataset.

        Raises
        ------
        ValueError
            If no prediction matches a gold question
        """
        return evaluate(load_predictions(pred_path), load_dataset(gold_path), split)

