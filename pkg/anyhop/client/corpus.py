"""Corpus ingestion, tokenization and entity annotation.

A corpus file holds one JSON record per line with string fields ``id``,
``title`` and ``text``. Ingestion tokenizes every document and annotates entity
mentions with two deterministic rules: exact matches of normalized document
titles (the gazetteer) and runs of capitalized tokens away from sentence starts.
"""

import logging
import unicodedata
from collections.abc import Collection, Iterable, Sequence
from pathlib import Path
from typing import Any, Union

from anyhop.client._client_vars import SENTENCE_END_TOKENS, SEP_TOKEN
from anyhop.client._exceptions import CorpusFormatError, DuplicateDocumentError
from anyhop.client._utils import iter_jsonl, write_jsonl
from anyhop.client.models import Corpus, Document, EntityMention, Question


logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "title", "text")


def _is_punctuation(char: str) -> bool:
    return unicodedata.category(char)[0] in ("P", "S")


def tokenize(text: str) -> list[str]:
    """Split text into tokens.

    Splits on whitespace, then peels every leading and trailing punctuation
    character of a chunk off as its own token. Case is preserved.

    Parameters
    ----------
    text : str
        Text to tokenize

    Returns
    -------
    list[str]
        Tokens whose concatenation equals the non-whitespace characters of
        ``text``

    Examples
    --------
    >>> tokenize("Ed Wood (film)")
    ['Ed', 'Wood', '(', 'film', ')']
    """
    tokens: list[str] = []
    for chunk in text.split():
        start, end = 0, len(chunk)
        while start < end and _is_punctuation(chunk[start]):
            tokens.append(chunk[start])
            start += 1
        trailing: list[str] = []
        while end > start and _is_punctuation(chunk[end - 1]):
            trailing.append(chunk[end - 1])
            end -= 1
        if start < end:
            tokens.append(chunk[start:end])
        tokens.extend(reversed(trailing))
    return tokens


def tokenize_question(question: Question) -> list[str]:
    """Tokenize a question, keeping each clue separator as one marker token."""
    tokens = tokenize(question.original_text)
    for clue in question.clue_spans:
        tokens.append(SEP_TOKEN)
        tokens.extend(tokenize(clue))
    return tokens


def normalize_entity(text: str) -> str:
    """Casefold and collapse whitespace, the identity of a shared entity."""
    return " ".join(text.casefold().split())


def title_key(title: str) -> str:
    """Return the gazetteer key of a document title."""
    return normalize_entity(" ".join(tokenize(title)))


class GazetteerMatcher:
    """Leftmost-longest matcher of gazetteer keys over casefolded tokens.

    Parameters
    ----------
    gazetteer : Collection[str]
        Normalized titles, each a space-joined token sequence
    """

    def __init__(self, gazetteer: Collection[str]):
        by_first: dict[str, list[tuple[str, ...]]] = {}
        for key in gazetteer:
            key_tokens = tuple(key.split(" ")) if key else ()
            if key_tokens:
                by_first.setdefault(key_tokens[0], []).append(key_tokens)
        for candidates in by_first.values():
            candidates.sort(key=lambda key_tokens: (-len(key_tokens), key_tokens))
        self._by_first = by_first

    def match(self, folded: Sequence[str]) -> list[tuple[int, int]]:
        """Return non-overlapping ``(start, end)`` spans, left to right."""
        spans = []
        i = 0
        while i < len(folded):
            length = 0
            for key_tokens in self._by_first.get(folded[i], ()):
                if tuple(folded[i : i + len(key_tokens)]) == key_tokens:
                    length = len(key_tokens)
                    break
            if length:
                spans.append((i, i + length))
                i += length
            else:
                i += 1
        return spans


def _is_sentence_start(tokens: Sequence[str], position: int) -> bool:
    return position == 0 or tokens[position - 1] in SENTENCE_END_TOKENS


def _is_capitalized(token: str) -> bool:
    return token[:1].isupper()


def extract_entities(
    doc: Union[Document, Sequence[str]],
    gazetteer: Union[Collection[str], GazetteerMatcher],
) -> list[EntityMention]:
    """Annotate entity mentions.

    Every gazetteer key occurring as a token subsequence is a mention, matched
    leftmost-longest without overlap. Every maximal run of capitalized tokens
    that does not start a sentence and is not covered by a gazetteer match is a
    mention as well.

    Parameters
    ----------
    doc : Document or Sequence[str]
        A tokenized document or its tokens
    gazetteer : Collection[str] or GazetteerMatcher
        Normalized document titles

    Returns
    -------
    list[EntityMention]
        Mentions sorted by position
    """
    tokens = doc.tokens if isinstance(doc, Document) else tuple(doc)
    matcher = (
        gazetteer
        if isinstance(gazetteer, GazetteerMatcher)
        else GazetteerMatcher(gazetteer)
    )
    folded = [token.casefold() for token in tokens]
    spans = matcher.match(folded)

    covered = [False] * len(tokens)
    for start, end in spans:
        for i in range(start, end):
            covered[i] = True

    run_start = None
    for i in range(len(tokens) + 1):
        eligible = (
            i < len(tokens)
            and not covered[i]
            and _is_capitalized(tokens[i])
            and not _is_sentence_start(tokens, i)
        )
        if eligible and run_start is None:
            run_start = i
        elif not eligible and run_start is not None:
            spans.append((run_start, i))
            run_start = None

    spans.sort()
    return [
        EntityMention(normalize_entity(" ".join(tokens[start:end])), start, end)
        for start, end in spans
    ]


def _validate_record(record: dict[str, Any], line_number: int) -> dict[str, str]:
    missing = [name for name in REQUIRED_FIELDS if name not in record]
    if missing:
        raise CorpusFormatError(
            f"missing field(s) {', '.join(missing)}", line_number
        )
    for name in REQUIRED_FIELDS:
        if not isinstance(record[name], str):
            raise CorpusFormatError(f"field {name} must be a string", line_number)
    return {name: record[name] for name in REQUIRED_FIELDS}


def build_corpus(records: Iterable[dict[str, str]]) -> Corpus:
    """Tokenize and annotate validated ``id``/``title``/``text`` records.

    Raises
    ------
    DuplicateDocumentError
        If two records share an id
    """
    raw: dict[str, dict[str, str]] = {}
    for record in records:
        if record["id"] in raw:
            raise DuplicateDocumentError(f"Duplicate document id: {record['id']}")
        raw[record["id"]] = record

    gazetteer = frozenset(
        key for key in (title_key(r["title"]) for r in raw.values()) if key
    )
    matcher = GazetteerMatcher(gazetteer)

    documents = {}
    for doc_id, record in raw.items():
        tokens = tuple(tokenize(record["text"]))
        mentions = tuple(extract_entities(tokens, matcher))
        documents[doc_id] = Document(
            id=doc_id,
            title=record["title"],
            text=record["text"],
            tokens=tokens,
            mentions=mentions,
        )
    return Corpus(documents=documents, title_gazetteer=gazetteer)


def ingest_corpus(path: Union[str, Path]) -> Corpus:
    """Read a line-delimited corpus file.

    Parameters
    ----------
    path : str or Path
        Corpus file with one ``{"id", "title", "text"}`` record per line

    Returns
    -------
    Corpus
        Tokenized, entity-annotated documents in file order

    Raises
    ------
    FileNotFoundError
        If the file does not exist
    CorpusFormatError
        If a line is malformed, the message names the line number
    DuplicateDocumentError
        If an id occurs twice, the message names the id
    """
    records = [
        _validate_record(record, line_number)
        for line_number, record in iter_jsonl(path)
    ]
    corpus = build_corpus(records)
    logger.info("Ingested %d documents from %s", len(corpus), path)
    return corpus


def save_corpus(corpus: Corpus, path: Union[str, Path]) -> None:
    """Write a corpus back to the line-delimited record format."""
    write_jsonl(
        path,
        ({"id": doc.id, "title": doc.title, "text": doc.text} for doc in corpus),
    )
