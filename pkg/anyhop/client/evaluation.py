"""Paragraph and answer metrics, and run-level reports.

Answer normalization follows the SQuAD convention: lowercase, strip
punctuation, drop the articles a/an/the and collapse whitespace.
"""

import re
import string
import warnings
from collections import Counter, defaultdict
from collections.abc import Callable, Collection, Sequence
from pathlib import Path
from typing import Any, Optional, TypeVar, Union

from anyhop.client._exceptions import CorpusFormatError
from anyhop.client._utils import iter_jsonl
from anyhop.client.controller import hop_histogram
from anyhop.client.models import EvalReport, Prediction, QARecord, QuestionRecord


_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCTUATION = frozenset(string.punctuation)
R = TypeVar("R")


def _load_records(
    path: Union[str, Path], parse: Callable[[dict[str, Any]], R]
) -> list[R]:
    records = []
    for line_number, record in iter_jsonl(path):
        try:
            records.append(parse(record))
        except (KeyError, TypeError, ValueError) as err:
            raise CorpusFormatError(
                f"malformed record in {path}: {err!r}", line_number
            ) from err
    return records


def load_dataset(path: Union[str, Path]) -> list[QARecord]:
    """Read a QA dataset file.

    Raises
    ------
    FileNotFoundError
        If the file does not exist
    CorpusFormatError
        If a line lacks a required field
    """
    return _load_records(path, QARecord.from_record)


def load_predictions(path: Union[str, Path]) -> list[Prediction]:
    """Read a prediction file written by ``answer --batch``."""
    return _load_records(path, Prediction.from_record)


def normalize_answer(text: str) -> str:
    """Normalize an answer string for comparison."""
    text = text.lower()
    text = "".join(char for char in text if char not in _PUNCTUATION)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def answer_em(pred: str, gold: str) -> int:
    """Return 1 iff the normalized strings are equal."""
    return int(normalize_answer(pred) == normalize_answer(gold))


def answer_f1(pred: str, gold: str) -> float:
    """Token-multiset F1 between normalized answers.

    Two empty answers score 1, exactly one empty answer scores 0.
    """
    pred_tokens = normalize_answer(pred).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    common = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_tokens)
    recall = common / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def paragraph_em(top_docs: Sequence[str], gold: Collection[str]) -> int:
    """Compare the best kept documents with the gold supporting set.

    Parameters
    ----------
    top_docs : Sequence[str]
        Final kept doc ids, best first
    gold : Collection[str]
        Gold supporting doc ids, non-empty

    Returns
    -------
    int
        With one gold document, 1 iff it is among the top 2; otherwise 1 iff
        the top ``|gold|`` documents are exactly the gold set
    """
    gold_set = set(gold)
    if not gold_set:
        raise ValueError("paragraph_em needs at least one gold document")
    if len(gold_set) == 1:
        return int(bool(gold_set & set(top_docs[:2])))
    return int(set(top_docs[: len(gold_set)]) == gold_set)


def paragraph_recall(kept: Sequence[str], gold: Collection[str]) -> float:
    """Fraction of gold documents present in the kept pool."""
    gold_set = set(gold)
    if not gold_set:
        raise ValueError("paragraph_recall needs at least one gold document")
    return len(gold_set & set(kept)) / len(gold_set)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def score_prediction(prediction: Prediction, gold: QARecord) -> QuestionRecord:
    """Score one prediction against its gold record."""
    kept = [doc_id for doc_id, _ in prediction.kept]
    return QuestionRecord(
        id=gold.id,
        hops=prediction.hops,
        gold_hops=gold.hops,
        paragraph_em=paragraph_em(kept, gold.supporting),
        paragraph_recall=paragraph_recall(kept, gold.supporting),
        answer_em=answer_em(prediction.answer, gold.answer),
        answer_f1=answer_f1(prediction.answer, gold.answer),
    )


def _breakdown(records: Sequence[QuestionRecord]) -> dict[str, float]:
    return {
        "count": float(len(records)),
        "paragraph_em": _mean([r.paragraph_em for r in records]),
        "paragraph_recall": _mean([r.paragraph_recall for r in records]),
        "answer_em": _mean([r.answer_em for r in records]),
        "answer_f1": _mean([r.answer_f1 for r in records]),
        "mean_hops": _mean([r.hops for r in records]),
        "hop_1_fraction": _mean([float(r.hops == 1) for r in records]),
        "multi_hop_fraction": _mean([float(r.hops >= 2) for r in records]),
    }


def evaluate(
    predictions: Sequence[Prediction],
    gold: Sequence[QARecord],
    split: Optional[str] = None,
) -> EvalReport:
    """Score a prediction set against a gold dataset.

    Parameters
    ----------
    predictions : Sequence[Prediction]
        One prediction per question
    gold : Sequence[QARecord]
        Gold dataset
    split : str, optional
        Restrict scoring to gold questions of this split

    Returns
    -------
    EvalReport
        Means over the questions that have both a gold record and a
        prediction, records ordered by question id

    Raises
    ------
    ValueError
        If no question can be scored
    """
    gold_by_id = {
        record.id: record
        for record in gold
        if split is None or record.split == split
    }
    by_id = {prediction.id: prediction for prediction in predictions}
    missing = sorted(set(gold_by_id) - set(by_id))
    if missing:
        warnings.warn(
            f"{len(missing)} gold questions have no prediction and are not scored",
            UserWarning,
            stacklevel=2,
        )
    records = [
        score_prediction(by_id[qid], gold_by_id[qid])
        for qid in sorted(gold_by_id)
        if qid in by_id
    ]
    if not records:
        raise ValueError("No prediction matches a gold question")

    grouped: dict[int, list[QuestionRecord]] = defaultdict(list)
    for record in records:
        grouped[record.gold_hops].append(record)
    return EvalReport(
        paragraph_em=_mean([r.paragraph_em for r in records]),
        paragraph_recall=_mean([r.paragraph_recall for r in records]),
        answer_em=_mean([r.answer_em for r in records]),
        answer_f1=_mean([r.answer_f1 for r in records]),
        hop_histogram=hop_histogram(records),
        by_gold_hops={hops: _breakdown(grouped[hops]) for hops in sorted(grouped)},
        records=records,
    )
