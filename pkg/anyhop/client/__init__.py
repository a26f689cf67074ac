"""Programmatic API for anyhop.

This module provides a Python API for indexing corpora, training the reranker,
reader and question updater, and answering questions with the iterative
pipeline. It is an alternative to the command-line interface.
"""

from anyhop.client.api import AnyHopClient
from anyhop.client.config import (
    EncoderConfig,
    PipelineConfig,
    RunConfig,
    SynthSpec,
    load_run_config,
)
from anyhop.client.models import (
    Answer,
    AnswerKind,
    AnswerResponse,
    EvalReport,
    IndexResponse,
    Prediction,
    QARecord,
    Question,
    SamplesResponse,
    SynthResponse,
    Trace,
    TrainResponse,
)


__all__ = [
    "AnyHopClient",
    "Answer",
    "AnswerKind",
    "AnswerResponse",
    "EvalReport",
    "IndexResponse",
    "Prediction",
    "QARecord",
    "Question",
    "SamplesResponse",
    "SynthResponse",
    "Trace",
    "TrainResponse",
    "EncoderConfig",
    "PipelineConfig",
    "RunConfig",
    "SynthSpec",
    "load_run_config",
]
