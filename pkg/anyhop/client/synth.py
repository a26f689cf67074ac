"""Deterministic synthetic any-hop benchmark.

The world holds organisations and people. Every organisation document names its
home city (the answer of every question ending at it) and a rival organisation.
A person document names the person's employer, a mentor, or someone the person
admires. Questions follow one chain of links:

- one hop: ``where is <org> based ?``
- two hops: ``where is the employer of <person> based ?``
- three hops: ``where is the employer of the mentor of <person> based ?``

Organisation documents never mention people, and question words never occur in
documents, so the last document of a chain with two or more hops shares no term
with its question and is reachable only through the bridging title found in the
previous document. Documents mentioning the question entity without holding the
answer (rivals, mentees, admirers) act as distractors.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np

from anyhop.client._client_vars import CORPUS_FILE, QA_FILE
from anyhop.client._exceptions import InfeasibleSpecError
from anyhop.client._utils import write_jsonl
from anyhop.client.config import SynthSpec


logger = logging.getLogger(__name__)

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
QUESTION_WORDS = frozenset(
    {"where", "is", "the", "employer", "of", "mentor", "based", "?"}
)
RELATION_WORDS = frozenset(
    {"headquarters", "rivalry", "employment", "mentorship", "admiration", "."}
)
_FILLER_RANGE = (3, 6)


@dataclass(frozen=True)
class SynthBenchmark:
    """Generated corpus and dataset records.

    Attributes
    ----------
    corpus : list[dict[str, str]]
        ``{"id", "title", "text"}`` records sorted by id
    questions : list[dict[str, Any]]
        ``{"id", "question", "answer", "supporting", "hops", "split"}`` records
        sorted by id, ``supporting`` in chain order
    """

    corpus: list[dict[str, str]]
    questions: list[dict[str, Any]]

    @property
    def questions_per_hops(self) -> dict[int, int]:
        """Number of questions per gold chain length."""
        counts: dict[int, int] = {}
        for record in self.questions:
            counts[record["hops"]] = counts.get(record["hops"], 0) + 1
        return dict(sorted(counts.items()))


class _WordFactory:
    """Unique pseudo-words built from consonant-vowel syllables."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._used: set[str] = set(QUESTION_WORDS | RELATION_WORDS)

    def _syllables(self, count: int) -> str:
        return "".join(
            _CONSONANTS[self._rng.integers(len(_CONSONANTS))]
            + _VOWELS[self._rng.integers(len(_VOWELS))]
            for _ in range(count)
        )

    def take(self, n: int, syllables: int, capitalized: bool) -> list[str]:
        words = []
        while len(words) < n:
            word = self._syllables(syllables)
            if word in self._used:
                continue
            self._used.add(word)
            words.append(word.capitalize() if capitalized else word)
        return words


def _hop_counts(n_questions: int, hop_mix: dict[int, float]) -> dict[int, int]:
    """Split the question count by largest remainder, ties to fewer hops."""
    exact = {hops: hop_mix[hops] * n_questions for hops in sorted(hop_mix)}
    counts = {hops: int(value) for hops, value in exact.items()}
    remainder = n_questions - sum(counts.values())
    by_fraction = sorted(exact, key=lambda hops: (-(exact[hops] - counts[hops]), hops))
    for hops in by_fraction[:remainder]:
        counts[hops] += 1
    return counts


def _pick(rng: np.random.Generator, options: Sequence[str], exclude: str = "") -> str:
    while True:
        choice = options[int(rng.integers(len(options)))]
        if choice != exclude or len(options) == 1:
            return choice


def build_benchmark(spec: SynthSpec) -> SynthBenchmark:
    """Generate the benchmark records of a spec.

    Parameters
    ----------
    spec : SynthSpec
        Validated generator parameters

    Returns
    -------
    SynthBenchmark
        Corpus and question records, a deterministic function of ``spec``

    Raises
    ------
    InfeasibleSpecError
        If there are too few organisations or people for the requested
        questions
    """
    counts = _hop_counts(spec.n_questions, spec.hop_mix)
    n_orgs = spec.n_entities
    n_people = spec.n_docs - spec.n_entities
    n_juniors = counts.get(3, 0)
    remaining = n_people - n_juniors
    n_admirers = remaining // 4
    n_seniors = remaining - n_admirers

    if n_orgs < max(2, counts.get(1, 0)):
        raise InfeasibleSpecError(
            f"{n_orgs} organisations cannot host {counts.get(1, 0)} distinct "
            "one-hop questions (at least 2 organisations are needed)"
        )
    needs_seniors = counts.get(2, 0) + (1 if n_juniors else 0)
    if n_people < n_juniors or n_seniors < max(1, needs_seniors):
        raise InfeasibleSpecError(
            f"{n_people} people cannot host {counts.get(2, 0)} two-hop and "
            f"{n_juniors} three-hop questions"
        )

    rng = np.random.default_rng(spec.seed)
    words = _WordFactory(rng)
    orgs = words.take(n_orgs, 3, capitalized=True)
    cities = words.take(n_orgs, 3, capitalized=True)
    seniors = words.take(n_seniors, 4, capitalized=True)
    juniors = words.take(n_juniors, 4, capitalized=True)
    admirers = words.take(n_admirers, 4, capitalized=True)
    vocab = words.take(spec.vocab_size, 2, capitalized=False)

    def filler(subject: str) -> str:
        size = int(rng.integers(_FILLER_RANGE[0], _FILLER_RANGE[1] + 1))
        picks = rng.choice(len(vocab), size=size, replace=False)
        return f"{subject} " + " ".join(vocab[int(i)] for i in picks) + " ."

    city_of = dict(zip(orgs, cities))
    employer_of = {person: _pick(rng, orgs) for person in seniors}
    mentor_of = {person: _pick(rng, seniors) for person in juniors}

    texts: dict[str, str] = {}
    for org in orgs:
        rival = _pick(rng, orgs, exclude=org)
        texts[org] = (
            f"{org} {city_of[org]} headquarters . {org} {rival} rivalry . "
            + filler(org)
        )
    for person in seniors:
        texts[person] = f"{person} {employer_of[person]} employment . " + filler(person)
    for person in juniors:
        texts[person] = f"{person} {mentor_of[person]} mentorship . " + filler(person)
    people = seniors + juniors
    for person in admirers:
        texts[person] = (
            f"{person} {_pick(rng, people)} admiration . " + filler(person)
        )

    titles = list(texts)
    order = rng.permutation(len(titles))
    width = len(str(len(titles)))
    doc_id = {titles[int(i)]: f"d{rank:0{width}d}" for rank, i in enumerate(order)}

    drafts: list[dict[str, Any]] = []
    for org in _sample(rng, orgs, counts.get(1, 0)):
        drafts.append(
            {
                "question": f"where is {org} based ?",
                "answer": city_of[org],
                "supporting": [doc_id[org]],
                "hops": 1,
            }
        )
    for person in _sample(rng, seniors, counts.get(2, 0)):
        employer = employer_of[person]
        drafts.append(
            {
                "question": f"where is the employer of {person} based ?",
                "answer": city_of[employer],
                "supporting": [doc_id[person], doc_id[employer]],
                "hops": 2,
            }
        )
    for person in _sample(rng, juniors, counts.get(3, 0)):
        mentor = mentor_of[person]
        employer = employer_of[mentor]
        drafts.append(
            {
                "question": (
                    f"where is the employer of the mentor of {person} based ?"
                ),
                "answer": city_of[employer],
                "supporting": [doc_id[person], doc_id[mentor], doc_id[employer]],
                "hops": 3,
            }
        )

    shuffled = rng.permutation(len(drafts))
    n_dev = int(round(len(drafts) * spec.dev_fraction))
    dev = {int(i) for i in rng.permutation(len(drafts))[:n_dev]}
    qwidth = len(str(len(drafts)))
    questions = [
        {
            "id": f"q{rank:0{qwidth}d}",
            **drafts[int(i)],
            "split": "dev" if rank in dev else "train",
        }
        for rank, i in enumerate(shuffled)
    ]
    corpus = sorted(
        (
            {"id": doc_id[title], "title": title, "text": texts[title]}
            for title in titles
        ),
        key=lambda record: record["id"],
    )
    logger.info(
        "Generated %d documents and %d questions %s",
        len(corpus),
        len(questions),
        counts,
    )
    return SynthBenchmark(corpus=corpus, questions=questions)


def _sample(rng: np.random.Generator, pool: Sequence[str], n: int) -> list[str]:
    if n == 0:
        return []
    return [pool[int(i)] for i in rng.choice(len(pool), size=n, replace=False)]


def write_benchmark(
    benchmark: SynthBenchmark, out_dir: Union[str, Path]
) -> tuple[Path, Path]:
    """Write generated records to ``out_dir``.

    Returns
    -------
    tuple[Path, Path]
        Paths of the corpus file and the QA dataset file
    """
    out_dir = Path(out_dir)
    corpus_path = out_dir / CORPUS_FILE
    qa_path = out_dir / QA_FILE
    write_jsonl(corpus_path, benchmark.corpus)
    write_jsonl(qa_path, benchmark.questions)
    return corpus_path, qa_path


def generate(spec: SynthSpec, out_dir: Union[str, Path]) -> tuple[Path, Path]:
    """Write a synthetic benchmark to ``out_dir``.

    Returns
    -------
    tuple[Path, Path]
        Paths of the corpus file and the QA dataset file

    Raises
    ------
    InfeasibleSpecError
        If the spec cannot be realized
    """
    return write_benchmark(build_benchmark(spec), out_dir)

