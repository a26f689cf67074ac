"""Time sparse retrieval on a synthetic corpus and check it against brute force."""

import argparse
import time

import numpy as np

from anyhop.client.config import SynthSpec
from anyhop.client.corpus import build_corpus
from anyhop.client.retriever import build_index
from anyhop.client.synth import build_benchmark


def brute_force(index, query, top_n: int) -> list[tuple[str, float]]:
    """Score every document one at a time and sort."""
    scored = [(doc_id, index.score(query, doc_id)) for doc_id in index.doc_ids]
    scored = [(doc_id, score) for doc_id, score in scored if score > 0]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:top_n]


def main() -> None:
    """Run the main function."""
    parser = argparse.ArgumentParser(
        description="Measure retrieval latency and compare with brute force."
    )
    parser.add_argument("--docs", type=int, default=1000, help="Corpus size")
    parser.add_argument("--queries", type=int, default=50, help="Number of queries")
    parser.add_argument("--top-n", type=int, default=8, help="Results per query")
    parser.add_argument("--seed", type=int, default=7, help="Benchmark seed")
    args = parser.parse_args()

    spec = SynthSpec(
        seed=args.seed,
        n_docs=args.docs,
        n_entities=max(args.docs // 3, 4),
        n_questions=args.queries,
    )
    bench = build_benchmark(spec)
    corpus = build_corpus(bench.corpus)
    index = build_index(corpus)

    durations = []
    mismatches = 0
    for record in bench.questions:
        query = index.build_query(record["question"])
        start_time = time.perf_counter()
        results = index.retrieve(query, args.top_n)
        durations.append(time.perf_counter() - start_time)
        if results != brute_force(index, query, args.top_n):
            mismatches += 1

    print(f"Documents: {index.n_docs}, postings: {index.n_postings}")
    print(f"Queries: {len(durations)}")
    print(f"Mean latency: {np.mean(durations) * 1000:.3f} ms")
    print(f"Max latency: {np.max(durations) * 1000:.3f} ms")
    print(f"Brute-force mismatches: {mismatches}")


if __name__ == "__main__":
    main()
