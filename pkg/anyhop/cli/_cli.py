"""Command line interface for anyhop.

This module provides the command-line interface for indexing corpora,
generating synthetic benchmarks, building training samples, training the
three models, answering questions and scoring predictions.

Commands
--------
index
    Ingest a corpus file and build its inverted index
synth
    Generate a synthetic any-hop benchmark
samples
    Build training samples for one model
train-reranker, train-reader, train-updater
    Train one model from a sample file
answer
    Answer one question, or every question of a dataset with --batch
eval
    Score a prediction file against a QA dataset
"""

import json
from pathlib import Path
from typing import Any, Optional

import click
from rich.console import Console

from anyhop.cli._helper import (
    AnswerResponseFormatter,
    EvalReportFormatter,
    IndexResponseFormatter,
    SamplesResponseFormatter,
    SynthResponseFormatter,
    TrainResponseFormatter,
)
from anyhop.cli._utils import create_table, setup_logging
from anyhop.client import AnyHopClient, load_run_config


CONSOLE = Console()

_config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Flat YAML config file, its keys override command line flags",
)
_json_option = click.option(
    "--json", "json_mode", is_flag=True, help="Output in JSON string"
)


def _client(
    config_path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None
) -> AnyHopClient:
    """Build a client from the layered configuration."""
    return AnyHopClient(load_run_config(config_path, overrides))


def _show(formatter: Any, json_mode: bool) -> None:
    if json_mode:
        formatter.output_json()
    elif hasattr(formatter, "display"):
        formatter.display(CONSOLE)
    else:
        CONSOLE.print(formatter.output_table())


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log progress at INFO level")
def cli(verbose: bool = False) -> None:
    """anyhop CLI."""
    setup_logging(verbose)


@cli.command("index", help="Ingest a corpus file and build its inverted index.")
@click.option(
    "--corpus",
    "corpus_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Line-delimited corpus file with id, title and text fields",
)
@click.option(
    "--out",
    "out_dir",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Index directory to write",
)
@_json_option
def index(corpus_path: Path, out_dir: Path, json_mode: bool = False) -> None:
    """Ingest a corpus and persist its index.

    Parameters
    ----------
    corpus_path : Path
        Corpus file
    out_dir : Path
        Index directory
    json_mode : bool, default=False
        Whether to output in JSON format

    Raises
    ------
    click.ClickException
        If ingestion or indexing fails
    """
    try:
        response = AnyHopClient().index_corpus(corpus_path, out_dir)
        _show(IndexResponseFormatter(response), json_mode)
    except click.ClickException as e:
        raise e
    except Exception as e:
        raise click.ClickException(f"Index failed: {str(e)}") from e


@cli.command("synth", help="Generate a synthetic any-hop benchmark.")
@click.option(
    "--spec",
    "spec_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="YAML benchmark spec",
)
@click.option(
    "--out",
    "out_dir",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Output directory for the corpus and QA files",
)
@click.option("--seed", type=int, help="Override the seed of the spec")
@_json_option
def synth(
    spec_path: Path,
    out_dir: Path,
    seed: Optional[int] = None,
    json_mode: bool = False,
) -> None:
    """Generate a synthetic benchmark.

    Raises
    ------
    click.ClickException
        If the spec is invalid or cannot be realized
    """
    try:
        client = AnyHopClient()
        spec = client.load_spec(spec_path)
        if seed is not None:
            spec = spec.model_copy(update={"seed": seed})
        response = client.generate_benchmark(spec, out_dir)
        _show(SynthResponseFormatter(response), json_mode)
    except click.ClickException as e:
        raise e
    except Exception as e:
        raise click.ClickException(f"Synth failed: {str(e)}") from e


@cli.command("samples", help="Build training samples for one model.")
@click.option(
    "--kind",
    required=True,
    type=click.Choice(["reranker", "reader", "updater"]),
    help="Model the samples train",
)
@click.option(
    "--qa",
    "qa_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="QA dataset with gold supporting documents",
)
@click.option(
    "--index",
    "index_dir",
    type=click.Path(file_okay=False, path_type=Path),
    help="Index directory, defaults to paths.index",
)
@click.option(
    "--out",
    "out_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Sample file to write",
)
@click.option("--seed", type=int, help="Sampling seed, defaults to train.seed")
@click.option(
    "--models",
    "models_dir",
    type=click.Path(file_okay=False, path_type=Path),
    help="Model directory with a trained updater, for reranker samples",
)
@click.option(
    "--split",
    default="train",
    show_default=True,
    help="Dataset split to sample from, 'all' for every question",
)
@_config_option
@_json_option
def samples(
    kind: str,
    qa_path: Path,
    out_path: Path,
    index_dir: Optional[Path] = None,
    seed: Optional[int] = None,
    models_dir: Optional[Path] = None,
    split: str = "train",
    config_path: Optional[Path] = None,
    json_mode: bool = False,
) -> None:
    """Build and persist training samples.

    Raises
    ------
    click.ClickException
        If the dataset or index cannot be read
    """
    try:
        client = _client(config_path, {"train.seed": seed})
        response = client.build_samples(
            kind,
            qa_path,
            index_dir,
            out_path,
            models_dir=models_dir,
            split=None if split == "all" else split,
        )
        _show(SamplesResponseFormatter(response), json_mode)
    except click.ClickException as e:
        raise e
    except Exception as e:
        raise click.ClickException(f"Samples failed: {str(e)}") from e


def _train_command(kind: str) -> click.Command:
    """Create the ``train-<kind>`` command."""

    @cli.command(f"train-{kind}", help=f"Train the {kind} from a sample file.")
    @click.option(
        "--data",
        "data_path",
        required=True,
        type=click.Path(dir_okay=False, path_type=Path),
        help=f"Sample file written by 'samples --kind {kind}'",
    )
    @click.option(
        "--index",
        "index_dir",
        type=click.Path(file_okay=False, path_type=Path),
        help="Index directory holding the sampled documents",
    )
    @click.option("--steps", type=int, help="Gradient steps")
    @click.option("--lr", type=float, help="Learning rate")
    @click.option("--seed", type=int, help="Initialization and sample order seed")
    @click.option(
        "--out",
        "out_dir",
        required=True,
        type=click.Path(file_okay=False, path_type=Path),
        help="Model directory to write the parameter file into",
    )
    @_config_option
    @_json_option
    def train_model(
        data_path: Path,
        out_dir: Path,
        index_dir: Optional[Path] = None,
        steps: Optional[int] = None,
        lr: Optional[float] = None,
        seed: Optional[int] = None,
        config_path: Optional[Path] = None,
        json_mode: bool = False,
    ) -> None:
        try:
            client = _client(
                config_path,
                {"train.steps": steps, "train.lr": lr, "train.seed": seed},
            )
            response = client.train_model(kind, data_path, index_dir, out_dir)
            _show(TrainResponseFormatter(response), json_mode)
        except click.ClickException as e:
            raise e
        except Exception as e:
            raise click.ClickException(
                f"Training {kind} failed: {str(e)}"
            ) from e

    return train_model


train_reranker = _train_command("reranker")
train_reader = _train_command("reader")
train_updater = _train_command("updater")


@cli.command("answer", help="Answer a question with the iterative pipeline.")
@click.option("--question", type=str, help="Question text")
@click.option(
    "--batch",
    "batch_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="QA dataset whose questions are all answered",
)
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Prediction file, required with --batch",
)
@click.option(
    "--models",
    "models_dir",
    type=click.Path(file_okay=False, path_type=Path),
    help="Model directory, defaults to paths.models or ANYHOP_MODELS_DIR",
)
@click.option(
    "--index",
    "index_dir",
    type=click.Path(file_okay=False, path_type=Path),
    help="Index directory, defaults to paths.index",
)
@click.option(
    "--dump-graph",
    "graph_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the entity graph of the final kept documents as an edge list",
)
@click.option("--workers", type=int, default=1, help="Threads used with --batch")
@click.option("--split", type=str, help="Only answer questions of this split")
@click.option("--max-hops", type=int, help="Maximum retrieval rounds H")
@click.option("--no-graph", is_flag=True, help="Rerank without graph propagation")
@click.option("--no-updater", is_flag=True, help="Never rewrite the question")
@click.option(
    "--no-iterative-reranking",
    is_flag=True,
    help="Keep documents by TF-IDF score instead of reranker score",
)
@_config_option
@_json_option
def answer(
    question: Optional[str] = None,
    batch_path: Optional[Path] = None,
    out_path: Optional[Path] = None,
    models_dir: Optional[Path] = None,
    index_dir: Optional[Path] = None,
    graph_path: Optional[Path] = None,
    workers: int = 1,
    split: Optional[str] = None,
    max_hops: Optional[int] = None,
    no_graph: bool = False,
    no_updater: bool = False,
    no_iterative_reranking: bool = False,
    config_path: Optional[Path] = None,
    json_mode: bool = False,
) -> None:
    """Answer one question, or every question of a dataset.

    Raises
    ------
    click.ClickException
        If the models or the index cannot be loaded
    """
    if question is not None and batch_path is not None:
        raise click.UsageError("Pass only one of --question and --batch")
    try:
        client = _client(
            config_path,
            {
                "pipeline.H": max_hops,
                "pipeline.use_graph": False if no_graph else None,
                "pipeline.use_updater": False if no_updater else None,
                "pipeline.iterative_reranking": (
                    False if no_iterative_reranking else None
                ),
            },
        )
        if question is not None:
            response = client.answer(question, models_dir, index_dir, graph_path)
            _show(AnswerResponseFormatter(response), json_mode)
            return

        if batch_path is None or out_path is None:
            raise click.UsageError("Pass --question, or --batch with --out")
        predictions = client.answer_batch(
            batch_path, out_path, models_dir, index_dir, workers=workers, split=split
        )
        if json_mode:
            click.echo(
                json.dumps(
                    {"n_predictions": len(predictions), "out": str(out_path)},
                    indent=4,
                    sort_keys=True,
                )
            )
        else:
            table = create_table(key_title="Batch", value_title="Value")
            table.add_row("Predictions", str(len(predictions)))
            table.add_row("Output", str(out_path), style="blue")
            CONSOLE.print(table)
    except click.ClickException as e:
        raise e
    except Exception as e:
        raise click.ClickException(f"Answer failed: {str(e)}") from e


@cli.command("eval", help="Score a prediction file against a QA dataset.")
@click.option(
    "--pred",
    "pred_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Prediction file written by 'answer --batch'",
)
@click.option(
    "--gold",
    "gold_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="QA dataset with gold answers and supporting documents",
)
@click.option("--split", type=str, help="Only score questions of this split")
@_json_option
def evaluate(
    pred_path: Path,
    gold_path: Path,
    split: Optional[str] = None,
    json_mode: bool = False,
) -> None:
    """Score predictions and print the report.

    Raises
    ------
    click.ClickException
        If the files cannot be read or no prediction matches a question
    """
    try:
        report = AnyHopClient().evaluate(pred_path, gold_path, split)
        _show(EvalReportFormatter(report), json_mode)
    except click.ClickException as e:
        raise e
    except Exception as e:
        raise click.ClickException(f"Eval failed: {str(e)}") from e


if __name__ == "__main__":
    cli()
