"""Run the full pipeline on a synthetic benchmark and report its metrics.

Generates the benchmark, indexes it, trains the updater, reader and reranker,
answers the held-out questions with the full system and with each component
switched off, and prints the results next to their targets.
"""

import argparse
import time
from pathlib import Path
from typing import Optional

from anyhop.client import AnyHopClient, EvalReport, RunConfig, load_run_config
from anyhop.client.config import SynthSpec


ABLATIONS = {
    "full": {},
    "no graph": {"pipeline.use_graph": False},
    "no updater": {"pipeline.use_updater": False},
    "single pass": {"pipeline.iterative_reranking": False},
}


def with_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    """Return a copy of ``config`` with flat overrides applied."""
    flat = {k: v for k, v in config.to_flat().items() if v is not None}
    return RunConfig.from_flat({**flat, **overrides})


def train_all(client: AnyHopClient, qa_path: Path, index_dir: Path, work: Path) -> Path:
    """Build samples and train every model, returning the model directory."""
    models_dir = work / "models"
    for kind in ("updater", "reader", "reranker"):
        samples_path = work / "samples" / f"{kind}.jsonl"
        samples = client.build_samples(
            kind, qa_path, index_dir, samples_path, models_dir=models_dir
        )
        start_time = time.time()
        trained = client.train_model(kind, samples_path, index_dir, models_dir)
        print(
            f"Trained {kind} on {samples.n_samples} samples in "
            f"{time.time() - start_time:.1f}s, loss {trained.initial_loss:.4f} -> "
            f"{trained.final_loss:.4f}"
        )
    return models_dir


def gold_metric(report: EvalReport, hops: int, key: str) -> Optional[float]:
    """Return a metric of the questions with ``hops`` gold documents."""
    bucket = report.by_gold_hops.get(hops)
    return None if bucket is None else bucket[key]


def show(label: str, value: Optional[float], target: str) -> None:
    """Print one metric line."""
    shown = "n/a" if value is None else f"{value:.3f}"
    print(f"  {label:<38} {shown:>8}   target {target}")


def main() -> None:
    """Run the main function."""
    parser = argparse.ArgumentParser(
        description="Train and evaluate anyhop on a synthetic benchmark."
    )
    parser.add_argument("--work", type=str, default="synthetic_run", help="Work dir")
    parser.add_argument("--config", type=str, default=None, help="Run config YAML")
    parser.add_argument("--seed", type=int, default=7, help="Benchmark seed")
    parser.add_argument("--workers", type=int, default=4, help="Answering threads")
    parser.add_argument(
        "--split", type=str, default="dev", help="Split to evaluate, or 'all'"
    )
    args = parser.parse_args()

    work = Path(args.work)
    split = None if args.split == "all" else args.split
    base = load_run_config(args.config, {})
    client = AnyHopClient(base)

    start_time = time.time()
    bench = client.generate_benchmark(SynthSpec(seed=args.seed), work / "bench")
    print(f"Generated {bench.n_docs} documents: {bench.questions_per_hops}")
    index_dir = work / "index"
    client.index_corpus(bench.corpus_path, index_dir)
    models_dir = train_all(client, bench.qa_path, index_dir, work)

    reports: dict[str, EvalReport] = {}
    for name, overrides in ABLATIONS.items():
        ablated = AnyHopClient(with_overrides(base, overrides))
        pred_path = work / "predictions" / f"{name.replace(' ', '_')}.jsonl"
        ablated.answer_batch(
            bench.qa_path,
            pred_path,
            models_dir,
            index_dir,
            workers=args.workers,
            split=split,
        )
        reports[name] = ablated.evaluate(pred_path, bench.qa_path, split)

    repeat_path = work / "predictions" / "full_repeat.jsonl"
    AnyHopClient(base).answer_batch(
        bench.qa_path, repeat_path, models_dir, index_dir, workers=1, split=split
    )
    identical = (
        repeat_path.read_bytes() == (work / "predictions" / "full.jsonl").read_bytes()
    )

    full = reports["full"]
    print("Full system")
    show("paragraph recall", full.paragraph_recall, ">= 0.90")
    show(
        "one-hop questions stopping at hop 1",
        gold_metric(full, 1, "hop_1_fraction"),
        ">= 0.80",
    )
    show(
        "two-hop questions using >= 2 hops",
        gold_metric(full, 2, "multi_hop_fraction"),
        ">= 0.70",
    )
    show("one-hop answer EM", gold_metric(full, 1, "answer_em"), ">= 0.70")
    show("two-hop answer EM", gold_metric(full, 2, "answer_em"), ">= 0.50")

    print("Two-hop paragraph recall by system")
    full_recall = gold_metric(full, 2, "paragraph_recall")
    for name, report in reports.items():
        recall = gold_metric(report, 2, "paragraph_recall")
        target = "-" if name in ("full", "single pass") else "<= full - 0.10"
        show(name, recall, target)
        if name != "full" and recall is not None and full_recall is not None:
            print(f"    drop {full_recall - recall:+.3f}")

    print(f"Identical predictions on repeat: {identical}")
    print(f"Total time: {time.time() - start_time:.1f}s")


if __name__ == "__main__":
    main()
