"""Data models for the anyhop API.

This module contains the data classes shared by the library modules and the
response objects returned by the client.

Classes
-------
EntityMention : dataclass
    Entity span inside a document
Document : dataclass
    Tokenized, entity-annotated retrieval unit
Corpus : dataclass
    Id-addressable document collection with its title gazetteer
Question : dataclass
    Original question plus appended clue spans
AnswerKind : Enum
    Outcome of a reader decision
Answer : dataclass
    Reader output
HopRecord : dataclass
    What happened during one retrieval round
Trace : dataclass
    Per-hop records of one answered question
QARecord : dataclass
    Gold question-answer record of a dataset
Prediction : dataclass
    Pipeline output for one dataset question
HopBucket : dataclass
    Share and quality of questions stopping at one hop
QuestionRecord : dataclass
    Per-question evaluation scores
EvalReport : dataclass
    Aggregate evaluation of a prediction file
IndexResponse, SynthResponse, SamplesResponse, TrainResponse, AnswerResponse : dataclass
    Responses of the client operations
"""

from collections.abc import Iterator
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from anyhop.client._client_vars import SEP_TOKEN
from anyhop.client._exceptions import UnknownDocumentError


@dataclass(frozen=True)
class EntityMention:
    """Entity mention over the half-open token range [token_start, token_end)."""

    entity_key: str
    token_start: int
    token_end: int


@dataclass(frozen=True)
class Document:
    """A retrieval unit.

    Attributes
    ----------
    id : str
        Unique document id
    title : str
        Document title, also the name other documents link it by
    text : str
        Raw text
    tokens : tuple[str, ...]
        Tokens of ``text`` with original case
    mentions : tuple[EntityMention, ...]
        Non-overlapping entity mentions sorted by position
    """

    id: str
    title: str
    text: str
    tokens: tuple[str, ...]
    mentions: tuple[EntityMention, ...]


@dataclass(frozen=True)
class Corpus:
    """Immutable, id-addressable document collection."""

    documents: dict[str, Document]
    title_gazetteer: frozenset[str]

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents.values())

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self.documents

    def get(self, doc_id: str) -> Document:
        """Return the document with id ``doc_id``.

        Raises
        ------
        UnknownDocumentError
            If the id is not in the corpus
        """
        try:
            return self.documents[doc_id]
        except KeyError as err:
            raise UnknownDocumentError(f"Unknown document id: {doc_id}") from err

    @property
    def doc_ids(self) -> list[str]:
        """Document ids in file order."""
        return list(self.documents)


@dataclass(frozen=True)
class Question:
    """A question as it evolves across hops.

    Attributes
    ----------
    original_text : str
        The question as asked, never modified
    clue_spans : tuple[str, ...]
        Clue spans appended by the question updater, in order
    hop : int
        Current hop index, starting at 1
    """

    original_text: str
    clue_spans: tuple[str, ...] = ()
    hop: int = 1

    @property
    def rendered(self) -> str:
        """Return the query text, ``original [SEP] clue_1 [SEP] clue_2 ...``."""
        return f" {SEP_TOKEN} ".join((self.original_text, *self.clue_spans))


class AnswerKind(str, Enum):
    """Enum representing the outcome of a reader decision.

    Attributes
    ----------
    SPAN : str
        An answer span was extracted
    NO_ANSWER : str
        The reader abstained
    """

    SPAN = "span"
    NO_ANSWER = "no_answer"


@dataclass(frozen=True)
class Answer:
    """Reader output.

    ``token_end`` is exclusive. For ``NO_ANSWER`` the span fields describe the
    best span that lost against the no-answer probability, when there was one.
    """

    kind: AnswerKind
    text: str = ""
    doc_id: Optional[str] = None
    token_start: int = -1
    token_end: int = -1
    span_prob: float = 0.0
    na_prob: float = 1.0
    low_confidence: bool = False

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-serializable representation."""
        data = asdict(self)
        data["kind"] = self.kind.value
        return data


@dataclass(frozen=True)
class HopRecord:
    """One retrieval round of the iterative loop.

    Attributes
    ----------
    hop : int
        Hop index, starting at 1
    query : str
        Rendered query used for retrieval
    retrieved : list[tuple[str, float]]
        Retrieved doc ids with TF-IDF scores
    kept : list[tuple[str, float]]
        Kept doc ids with the scores used for filtering, best first
    decision : AnswerKind
        Reader decision after this round
    clue : str, optional
        Clue span appended to the question after this round
    """

    hop: int
    query: str
    retrieved: list[tuple[str, float]]
    kept: list[tuple[str, float]]
    decision: AnswerKind
    clue: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-serializable representation."""
        return {
            "hop": self.hop,
            "query": self.query,
            "retrieved": [[doc_id, score] for doc_id, score in self.retrieved],
            "kept": [[doc_id, score] for doc_id, score in self.kept],
            "decision": self.decision.value,
            "clue": self.clue,
        }


@dataclass(frozen=True)
class Trace:
    """Per-hop records of one question."""

    hops: list[HopRecord] = field(default_factory=list)

    @property
    def num_hops(self) -> int:
        """Number of retrieval rounds performed."""
        return len(self.hops)

    @property
    def final_kept(self) -> list[tuple[str, float]]:
        """Kept pool after the last round, best first."""
        return list(self.hops[-1].kept) if self.hops else []


@dataclass(frozen=True)
class QARecord:
    """Gold question-answer record.

    Attributes
    ----------
    id : str
        Question id
    question : str
        Question text
    answer : str
        Gold answer text
    supporting : tuple[str, ...]
        Gold supporting doc ids, in chain order
    hops : int
        Gold chain length
    split : str
        Dataset split, ``train`` or ``dev``
    """

    id: str
    question: str
    answer: str
    supporting: tuple[str, ...]
    hops: int
    split: str = "train"

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "QARecord":
        """Build from a decoded dataset line."""
        supporting = tuple(str(doc_id) for doc_id in record.get("supporting", ()))
        return cls(
            id=str(record["id"]),
            question=str(record["question"]),
            answer=str(record["answer"]),
            supporting=supporting,
            hops=int(record.get("hops", len(supporting))),
            split=str(record.get("split", "train")),
        )

    def to_record(self) -> dict[str, Any]:
        """Return the dataset line representation."""
        data = asdict(self)
        data["supporting"] = list(self.supporting)
        return data


@dataclass(frozen=True)
class Prediction:
    """Pipeline output for one dataset question."""

    id: str
    answer: str
    kept: list[tuple[str, float]]
    hops: int
    kind: AnswerKind = AnswerKind.SPAN
    low_confidence: bool = False

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "Prediction":
        """Build from a decoded prediction line."""
        return cls(
            id=str(record["id"]),
            answer=str(record.get("answer", "")),
            kept=[(str(doc_id), float(score)) for doc_id, score in record["kept"]],
            hops=int(record["hops"]),
            kind=AnswerKind(record.get("kind", AnswerKind.SPAN.value)),
            low_confidence=bool(record.get("low_confidence", False)),
        )

    def to_record(self) -> dict[str, Any]:
        """Return the prediction line representation."""
        return {
            "id": self.id,
            "answer": self.answer,
            "kept": [[doc_id, score] for doc_id, score in self.kept],
            "hops": self.hops,
            "kind": self.kind.value,
            "low_confidence": self.low_confidence,
        }


@dataclass(frozen=True)
class HopBucket:
    """Questions that stopped at one hop."""

    count: int
    fraction: float
    answer_em: float
    answer_f1: float
    paragraph_em: float


@dataclass(frozen=True)
class QuestionRecord:
    """Evaluation scores of one question."""

    id: str
    hops: int
    gold_hops: int
    paragraph_em: int
    paragraph_recall: float
    answer_em: int
    answer_f1: float


@dataclass(frozen=True)
class EvalReport:
    """Aggregate evaluation of a prediction file.

    Attributes
    ----------
    paragraph_em : float
        Mean paragraph exact match
    paragraph_recall : float
        Mean fraction of gold documents in the final kept pool
    answer_em : float
        Mean answer exact match
    answer_f1 : float
        Mean answer F1
    hop_histogram : dict[int, HopBucket]
        Breakdown by the hop the pipeline stopped at
    by_gold_hops : dict[int, dict[str, float]]
        Mean metrics grouped by the gold chain length
    records : list[QuestionRecord]
        Per-question scores, ordered by question id
    """

    paragraph_em: float
    paragraph_recall: float
    answer_em: float
    answer_f1: float
    hop_histogram: dict[int, HopBucket]
    by_gold_hops: dict[int, dict[str, float]]
    records: list[QuestionRecord]

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-serializable representation with string keys."""
        return {
            "paragraph_em": self.paragraph_em,
            "paragraph_recall": self.paragraph_recall,
            "answer_em": self.answer_em,
            "answer_f1": self.answer_f1,
            "hop_histogram": {
                str(hop): asdict(bucket) for hop, bucket in self.hop_histogram.items()
            },
            "by_gold_hops": {
                str(hops): dict(metrics) for hops, metrics in self.by_gold_hops.items()
            },
            "records": [asdict(record) for record in self.records],
        }


@dataclass
class IndexResponse:
    """Response from building an index."""

    index_dir: Path
    n_docs: int
    n_terms: int
    n_postings: int


@dataclass
class SynthResponse:
    """Response from generating a synthetic benchmark."""

    corpus_path: Path
    qa_path: Path
    n_docs: int
    questions_per_hops: dict[int, int]


@dataclass
class SamplesResponse:
    """Response from building training samples."""

    kind: str
    path: Path
    n_samples: int
    counts: dict[str, int] = field(default_factory=dict)


@dataclass
class TrainResponse:
    """Response from training one model."""

    kind: str
    params_path: Path
    steps: int
    initial_loss: Optional[float]
    final_loss: Optional[float]


@dataclass
class AnswerResponse:
    """Response from answering one question."""

    question: str
    answer: Answer
    trace: Trace

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-serializable representation."""
        return {
            "question": self.question,
            "answer": self.answer.to_dict(),
            "hops": self.trace.num_hops,
            "trace": [record.to_dict() for record in self.trace.hops],
        }
