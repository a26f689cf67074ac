"""Tests for the CLI module of the anyhop package."""

import json
import logging
from pathlib import Path
from unittest.mock import MagicMock, patch

import pytest
from click.testing import CliRunner

from anyhop.cli._cli import cli
from anyhop.client import (
    Answer,
    AnswerKind,
    AnswerResponse,
    IndexResponse,
    Prediction,
    QARecord,
    SamplesResponse,
    SynthResponse,
    SynthSpec,
    Trace,
    TrainResponse,
)
from anyhop.client.evaluation import evaluate
from anyhop.client.models import HopRecord


@pytest.fixture
def runner():
    """Fixture for invoking CLI commands."""
    return CliRunner()


@pytest.fixture
def mock_client():
    """Patch the client class and return its instance."""
    with patch("anyhop.cli._cli.AnyHopClient") as mock_client_class:
        client = MagicMock()
        mock_client_class.return_value = client
        yield client


@pytest.fixture
def answer_response():
    """Return a two-hop answer with its trace."""
    hops = [
        HopRecord(
            1,
            "rival of Kobale ?",
            [("d1", 3.1)],
            [("d1", 0.8)],
            AnswerKind.NO_ANSWER,
            "Rasuno",
        ),
        HopRecord(
            2,
            "rival of Kobale ? [SEP] Rasuno",
            [("d2", 2.4)],
            [("d2", 0.9), ("d1", 0.7)],
            AnswerKind.SPAN,
        ),
    ]
    answer = Answer(
        kind=AnswerKind.SPAN,
        text="Pelika",
        doc_id="d2",
        token_start=1,
        token_end=2,
        span_prob=0.6,
        na_prob=0.1,
    )
    return AnswerResponse("rival of Kobale ?", answer, Trace(hops))


def test_index_command_success(runner, mock_client):
    """Test the index summary table."""
    mock_client.index_corpus.return_value = IndexResponse(Path("idx"), 4, 31, 52)

    result = runner.invoke(cli, ["index", "--corpus", "c.jsonl", "--out", "idx"])

    assert result.exit_code == 0
    assert "Documents" in result.output
    assert "31" in result.output
    mock_client.index_corpus.assert_called_once_with(Path("c.jsonl"), Path("idx"))


def test_index_command_json(runner, mock_client):
    """Test JSON output of the index command."""
    mock_client.index_corpus.return_value = IndexResponse(Path("idx"), 4, 31, 52)

    result = runner.invoke(
        cli, ["index", "--corpus", "c.jsonl", "--out", "idx", "--json"]
    )

    assert result.exit_code == 0
    output = json.loads(result.output)
    assert output == {"index_dir": "idx", "n_docs": 4, "n_terms": 31, "n_postings": 52}


def test_index_command_failure(runner, mock_client):
    """Test that library errors become click errors."""
    mock_client.index_corpus.side_effect = FileNotFoundError(
        "Could not find file: c.jsonl"
    )

    result = runner.invoke(cli, ["index", "--corpus", "c.jsonl", "--out", "idx"])

    assert result.exit_code == 1
    assert "Index failed: Could not find file: c.jsonl" in result.output


def test_index_command_requires_corpus(runner):
    """Test that missing required options are usage errors."""
    result = runner.invoke(cli, ["index", "--out", "idx"])
    assert result.exit_code == 2
    assert "--corpus" in result.output


def test_synth_command_seed_override(runner, mock_client):
    """Test that --seed replaces the seed of the spec."""
    mock_client.load_spec.return_value = SynthSpec(seed=1)
    mock_client.generate_benchmark.return_value = SynthResponse(
        Path("b/corpus.jsonl"), Path("b/qa.jsonl"), 40, {1: 6, 2: 6}
    )

    result = runner.invoke(
        cli, ["synth", "--spec", "s.yaml", "--out", "b", "--seed", "9", "--json"]
    )

    assert result.exit_code == 0
    spec, out_dir = mock_client.generate_benchmark.call_args.args
    assert spec.seed == 9
    assert out_dir == Path("b")
    output = json.loads(result.output)
    assert output["questions_per_hops"] == {"1": 6, "2": 6}


def test_samples_command(runner, mock_client):
    """Test seed override, split handling and the sample table."""
    mock_client.build_samples.return_value = SamplesResponse(
        "reranker", Path("r.jsonl"), 5, {"full": 2, "partial": 2, "updated": 1}
    )
    with patch("anyhop.cli._cli.load_run_config") as mock_load:
        result = runner.invoke(
            cli,
            [
                "samples",
                "--kind",
                "reranker",
                "--qa",
                "qa.jsonl",
                "--out",
                "r.jsonl",
                "--seed",
                "5",
                "--split",
                "all",
            ],
        )

    assert result.exit_code == 0
    assert "updated" in result.output
    mock_load.assert_called_once_with(None, {"train.seed": 5})
    mock_client.build_samples.assert_called_once_with(
        "reranker",
        Path("qa.jsonl"),
        None,
        Path("r.jsonl"),
        models_dir=None,
        split=None,
    )


def test_samples_command_rejects_unknown_kind(runner):
    """Test the kind choice."""
    result = runner.invoke(
        cli, ["samples", "--kind", "retriever", "--qa", "qa.jsonl", "--out", "x"]
    )
    assert result.exit_code == 2


@pytest.mark.parametrize("kind", ["reranker", "reader", "updater"])
def test_train_commands(runner, mock_client, kind):
    """Test every train command with optimizer overrides."""
    mock_client.train_model.return_value = TrainResponse(
        kind, Path(f"m/{kind}.npz"), 10, 0.69, 0.41
    )
    with patch("anyhop.cli._cli.load_run_config") as mock_load:
        result = runner.invoke(
            cli,
            [
                f"train-{kind}",
                "--data",
                "s.jsonl",
                "--out",
                "m",
                "--steps",
                "10",
                "--lr",
                "0.1",
            ],
        )

    assert result.exit_code == 0
    assert "0.4100" in result.output
    mock_load.assert_called_once_with(
        None, {"train.steps": 10, "train.lr": 0.1, "train.seed": None}
    )
    mock_client.train_model.assert_called_once_with(
        kind, Path("s.jsonl"), None, Path("m")
    )


def test_train_command_failure(runner, mock_client):
    """Test the error message of a diverged run."""
    mock_client.train_model.side_effect = RuntimeError("loss is nan")

    result = runner.invoke(cli, ["train-reader", "--data", "s.jsonl", "--out", "m"])

    assert result.exit_code == 1
    assert "Training reader failed: loss is nan" in result.output


def test_answer_command_table(runner, mock_client, answer_response):
    """Test the answer and trace tables."""
    mock_client.answer.return_value = answer_response

    result = runner.invoke(
        cli, ["answer", "--question", "rival of Kobale ?", "--models", "m"]
    )

    assert result.exit_code == 0
    assert "Pelika" in result.output
    assert "Rasuno" in result.output
    mock_client.answer.assert_called_once_with(
        "rival of Kobale ?", Path("m"), None, None
    )


def test_answer_command_json(runner, mock_client, answer_response):
    """Test the JSON answer with hop count and trace."""
    mock_client.answer.return_value = answer_response

    result = runner.invoke(cli, ["answer", "--question", "q", "--json"])

    assert result.exit_code == 0
    output = json.loads(result.output)
    assert output["answer"]["text"] == "Pelika"
    assert output["hops"] == 2
    assert [hop["decision"] for hop in output["trace"]] == ["no_answer", "span"]
    assert output["trace"][1]["kept"] == [["d2", 0.9], ["d1", 0.7]]


def test_answer_command_ablation_flags(runner, mock_client, answer_response):
    """Test that ablation flags become pipeline overrides."""
    mock_client.answer.return_value = answer_response
    with patch("anyhop.cli._cli.load_run_config") as mock_load:
        result = runner.invoke(
            cli,
            [
                "answer",
                "--question",
                "q",
                "--max-hops",
                "2",
                "--no-graph",
                "--no-iterative-reranking",
            ],
        )

    assert result.exit_code == 0
    mock_load.assert_called_once_with(
        None,
        {
            "pipeline.H": 2,
            "pipeline.use_graph": False,
            "pipeline.use_updater": None,
            "pipeline.iterative_reranking": False,
        },
    )


@pytest.mark.parametrize(
    "args, message",
    [
        (["--question", "q", "--batch", "qa.jsonl"], "Pass only one"),
        (["--batch", "qa.jsonl"], "Pass --question, or --batch with --out"),
        ([], "Pass --question, or --batch with --out"),
    ],
)
def test_answer_command_usage_errors(runner, mock_client, args, message):
    """Test invalid combinations of question sources."""
    result = runner.invoke(cli, ["answer", *args])
    assert result.exit_code == 2
    assert message in result.output
    mock_client.answer_batch.assert_not_called()


def test_answer_command_batch(runner, mock_client):
    """Test batch answering with JSON output."""
    mock_client.answer_batch.return_value = [
        Prediction("q1", "Pelika", [("d2", 0.9)], 2),
        Prediction("q2", "", [("d1", 0.4)], 1, AnswerKind.NO_ANSWER, True),
    ]

    result = runner.invoke(
        cli,
        [
            "answer",
            "--batch",
            "qa.jsonl",
            "--out",
            "pred.jsonl",
            "--workers",
            "2",
            "--split",
            "dev",
            "--json",
        ],
    )

    assert result.exit_code == 0
    assert json.loads(result.output) == {"n_predictions": 2, "out": "pred.jsonl"}
    mock_client.answer_batch.assert_called_once_with(
        Path("qa.jsonl"), Path("pred.jsonl"), None, None, workers=2, split="dev"
    )


def test_answer_command_failure(runner, mock_client):
    """Test that missing models are reported."""
    mock_client.answer.side_effect = FileNotFoundError("Could not find m/reader.npz")

    result = runner.invoke(cli, ["answer", "--question", "q", "--models", "m"])

    assert result.exit_code == 1
    assert "Answer failed: Could not find m/reader.npz" in result.output


def _report():
    gold = [
        QARecord("q1", "where ?", "Temira", ("d1",), 1),
        QARecord("q2", "where ?", "Pelika", ("d1", "d2"), 2),
    ]
    predictions = [
        Prediction("q1", "Temira", [("d1", 0.9)], 1),
        Prediction("q2", "Rasuno", [("d2", 0.8), ("d1", 0.5)], 2),
    ]
    return evaluate(predictions, gold)


def test_eval_command_table(runner, mock_client):
    """Test the metric, histogram and gold hop tables."""
    mock_client.evaluate.return_value = _report()

    result = runner.invoke(
        cli, ["eval", "--pred", "p.jsonl", "--gold", "qa.jsonl", "--split", "dev"]
    )

    assert result.exit_code == 0
    assert "Answer EM" in result.output
    assert "0.5000" in result.output
    assert "Gold Hops" in result.output
    mock_client.evaluate.assert_called_once_with(
        Path("p.jsonl"), Path("qa.jsonl"), "dev"
    )


def test_eval_command_json(runner, mock_client):
    """Test the JSON report."""
    mock_client.evaluate.return_value = _report()

    result = runner.invoke(
        cli, ["eval", "--pred", "p.jsonl", "--gold", "qa.jsonl", "--json"]
    )

    assert result.exit_code == 0
    output = json.loads(result.output)
    assert output["answer_em"] == 0.5
    assert output["paragraph_em"] == 1.0
    assert set(output["hop_histogram"]) == {"1", "2"}
    assert len(output["records"]) == 2


def test_eval_command_failure(runner, mock_client):
    """Test the error when nothing can be scored."""
    mock_client.evaluate.side_effect = ValueError("No prediction matches a gold")

    result = runner.invoke(cli, ["eval", "--pred", "p.jsonl", "--gold", "qa.jsonl"])

    assert result.exit_code == 1
    assert "Eval failed: No prediction matches a gold" in result.output


def test_verbose_flag_sets_log_level(runner, mock_client):
    """Test that --verbose logs progress at INFO level."""
    mock_client.evaluate.return_value = _report()

    runner.invoke(cli, ["--verbose", "eval", "--pred", "p", "--gold", "g", "--json"])
    assert logging.getLogger("anyhop").level == logging.INFO

    runner.invoke(cli, ["eval", "--pred", "p", "--gold", "g", "--json"])
    assert logging.getLogger("anyhop").level == logging.WARNING
