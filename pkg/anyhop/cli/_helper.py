"""Helper classes for the CLI.

This module provides formatting and display classes for the command-line
interface, handling the presentation of index, benchmark, sample, training,
answer and evaluation responses.
"""

import json
from typing import Any

import click
from rich.console import Console
from rich.table import Table

from anyhop.cli._utils import create_table
from anyhop.cli._vars import DECISION_COLORS, METRIC_LABELS
from anyhop.client import (
    AnswerResponse,
    EvalReport,
    IndexResponse,
    SamplesResponse,
    SynthResponse,
    TrainResponse,
)


def _echo_json(data: Any) -> None:
    click.echo(json.dumps(data, indent=4, sort_keys=True))


class IndexResponseFormatter:
    """CLI Helper class for formatting IndexResponse."""

    def __init__(self, response: IndexResponse):
        self.response = response

    def output_json(self) -> None:
        """Format and output JSON data."""
        _echo_json(
            {
                "index_dir": str(self.response.index_dir),
                "n_docs": self.response.n_docs,
                "n_terms": self.response.n_terms,
                "n_postings": self.response.n_postings,
            }
        )

    def output_table(self) -> Table:
        """Create the index summary table."""
        table = create_table(key_title="Index", value_title="Value")
        table.add_row("Directory", str(self.response.index_dir), style="blue")
        table.add_row("Documents", str(self.response.n_docs))
        table.add_row("Terms", str(self.response.n_terms))
        table.add_row("Postings", str(self.response.n_postings))
        return table


class SynthResponseFormatter:
    """CLI Helper class for formatting SynthResponse."""

    def __init__(self, response: SynthResponse):
        self.response = response

    def output_json(self) -> None:
        """Format and output JSON data."""
        _echo_json(
            {
                "corpus_path": str(self.response.corpus_path),
                "qa_path": str(self.response.qa_path),
                "n_docs": self.response.n_docs,
                "questions_per_hops": {
                    str(hops): n
                    for hops, n in self.response.questions_per_hops.items()
                },
            }
        )

    def output_table(self) -> Table:
        """Create the benchmark summary table."""
        table = create_table(key_title="Benchmark", value_title="Value")
        table.add_row("Corpus", str(self.response.corpus_path), style="blue")
        table.add_row("Questions", str(self.response.qa_path), style="blue")
        table.add_row("Documents", str(self.response.n_docs))
        for hops, n in self.response.questions_per_hops.items():
            table.add_row(f"{hops}-hop questions", str(n))
        return table


class SamplesResponseFormatter:
    """CLI Helper class for formatting SamplesResponse."""

    def __init__(self, response: SamplesResponse):
        self.response = response

    def output_json(self) -> None:
        """Format and output JSON data."""
        _echo_json(
            {
                "kind": self.response.kind,
                "path": str(self.response.path),
                "n_samples": self.response.n_samples,
                "counts": self.response.counts,
            }
        )

    def output_table(self) -> Table:
        """Create the sample summary table, one row per sample group."""
        table = create_table(key_title="Samples", value_title="Value")
        table.add_row("Kind", self.response.kind)
        table.add_row("File", str(self.response.path), style="blue")
        table.add_row("Total", str(self.response.n_samples))
        for group, n in self.response.counts.items():
            table.add_row(f"  {group}", str(n))
        return table


class TrainResponseFormatter:
    """CLI Helper class for formatting TrainResponse."""

    def __init__(self, response: TrainResponse):
        self.response = response

    def output_json(self) -> None:
        """Format and output JSON data."""
        _echo_json(
            {
                "kind": self.response.kind,
                "params_path": str(self.response.params_path),
                "steps": self.response.steps,
                "initial_loss": self.response.initial_loss,
                "final_loss": self.response.final_loss,
            }
        )

    def output_table(self) -> Table:
        """Create the training summary table."""
        table = create_table(key_title="Training", value_title="Value")
        table.add_row("Model", self.response.kind)
        table.add_row("Parameters", str(self.response.params_path), style="blue")
        table.add_row("Steps", str(self.response.steps))
        for label, loss in (
            ("Initial Loss", self.response.initial_loss),
            ("Final Loss", self.response.final_loss),
        ):
            table.add_row(label, "-" if loss is None else f"{loss:.4f}")
        return table


class AnswerResponseFormatter:
    """CLI Helper class for formatting AnswerResponse.

    Parameters
    ----------
    response : AnswerResponse
        Answer and per-hop trace of one question
    """

    def __init__(self, response: AnswerResponse):
        self.response = response

    def output_json(self) -> None:
        """Format and output the answer, hop count and trace as JSON."""
        _echo_json(self.response.to_dict())

    def output_table(self) -> Table:
        """Create the answer table."""
        answer = self.response.answer
        table = create_table(key_title="Answer", value_title="Value")
        table.add_row("Question", self.response.question)
        table.add_row("Answer", answer.text or "-", style="bold")
        table.add_row(
            "Decision",
            answer.kind.value,
            style=DECISION_COLORS.get(answer.kind.value),
        )
        if answer.doc_id is not None:
            table.add_row("Document", answer.doc_id)
        table.add_row("Span Probability", f"{answer.span_prob:.4f}")
        table.add_row("No-Answer Probability", f"{answer.na_prob:.4f}")
        if answer.low_confidence:
            table.add_row("Low Confidence", "yes", style="red")
        table.add_row("Hops", str(self.response.trace.num_hops), style="blue")
        return table

    def output_trace(self) -> Table:
        """Create one row per retrieval round."""
        table = Table(show_header=True, header_style="bold magenta")
        table.add_column("Hop")
        table.add_column("Query")
        table.add_column("Kept")
        table.add_column("Decision")
        table.add_column("Clue")
        for record in self.response.trace.hops:
            table.add_row(
                str(record.hop),
                record.query,
                ", ".join(doc_id for doc_id, _ in record.kept),
                record.decision.value,
                record.clue or "-",
                style=DECISION_COLORS.get(record.decision.value),
            )
        return table

    def display(self, console: Console) -> None:
        """Print the answer and trace tables."""
        console.print(self.output_table())
        if self.response.trace.hops:
            console.print(self.output_trace())


class EvalReportFormatter:
    """CLI Helper class for formatting EvalReport.

    Parameters
    ----------
    report : EvalReport
        Aggregate evaluation of a prediction file
    """

    def __init__(self, report: EvalReport):
        self.report = report

    def output_json(self) -> None:
        """Format and output the full report, per-question records included."""
        _echo_json(self.report.to_dict())

    def output_table(self) -> Table:
        """Create the aggregate metrics table."""
        table = create_table(key_title="Metric", value_title="Value")
        table.add_row("Questions", str(len(self.report.records)), style="blue")
        for key, label in METRIC_LABELS.items():
            table.add_row(label, f"{getattr(self.report, key):.4f}")
        return table

    def output_hop_histogram(self) -> Table:
        """Create the table of questions by stopping hop."""
        table = Table(show_header=True, header_style="bold magenta")
        for column in (
            "Hops",
            "Count",
            "Fraction",
            "Answer EM",
            "Answer F1",
            "Paragraph EM",
        ):
            table.add_column(column)
        for hop, bucket in self.report.hop_histogram.items():
            table.add_row(
                str(hop),
                str(bucket.count),
                f"{bucket.fraction:.4f}",
                f"{bucket.answer_em:.4f}",
                f"{bucket.answer_f1:.4f}",
                f"{bucket.paragraph_em:.4f}",
            )
        return table

    def output_by_gold_hops(self) -> Table:
        """Create the table of metrics by gold chain length."""
        table = Table(show_header=True, header_style="bold magenta")
        table.add_column("Gold Hops")
        table.add_column("Count")
        for label in METRIC_LABELS.values():
            table.add_column(label)
        table.add_column("Mean Hops")
        for hops, metrics in self.report.by_gold_hops.items():
            table.add_row(
                str(hops),
                str(int(metrics["count"])),
                *(f"{metrics[key]:.4f}" for key in METRIC_LABELS),
                f"{metrics['mean_hops']:.2f}",
            )
        return table

    def display(self, console: Console) -> None:
        """Print every report table."""
        console.print(self.output_table())
        console.print(self.output_hop_histogram())
        console.print(self.output_by_gold_hops())
