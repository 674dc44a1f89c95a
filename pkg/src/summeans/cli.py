"""Command-line entry point: ``summeans <verb> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .harness import (
    ExperimentConfig,
    SeedResult,
    drift_report_from_json,
    evaluate,
    format_summary,
    load_corpus,
    metrics_payload,
    render_metrics_json,
    run_experiment,
    summarize_seeds,
    sweep_k,
    write_corpus,
)
from .llm import DEFAULT_INSTRUCTION
from .synthetic import synthetic_corpus
from .types import Schedule, SummarizerKind, SummarizerSpec

logger = logging.getLogger("summeans")

SUMMARIZERS = ("none", "textrank", "centroid", "lsa", "llm", "llm-full")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="JSONL corpus")
    p.add_argument("--provider", default="testhash", help="testhash | file:PATH | remote:URL")
    p.add_argument("--dim", type=int, default=None, help="embedding dimension (testhash default 256)")
    p.add_argument("--embed-model", default="text-embedding-3-small")
    p.add_argument("--no-normalize", action="store_true", help="keep raw embedding norms")
    p.add_argument("--summarizer", choices=SUMMARIZERS, default="lsa")
    p.add_argument("--q", type=int, default=5, help="sentences per extractive summary")
    p.add_argument("--lsa-components", type=int, default=None)
    p.add_argument("--m", type=int, default=10, help="documents sampled per LLM prompt")
    p.add_argument("--sampling", choices=("kmeanspp", "random", "centroid", "edge"), default="kmeanspp")
    p.add_argument("--instruction", default=DEFAULT_INSTRUCTION)
    p.add_argument("--llm", default="mock-echo", help="mock-echo | mock-concat | remote:URL")
    p.add_argument("--llm-model", default="gpt-4o")
    p.add_argument("--k", default="from-labels", help="number of clusters or 'from-labels'")
    p.add_argument("--iters", type=int, default=120, help="centroid-update iterations T")
    p.add_argument("--period", type=int, default=60, help="summary period l (60 single, 20 multiple)")
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seeds")
    p.add_argument("--batch-target", type=int, default=10000, help="target stream batch size")
    p.add_argument("--workers", type=int, default=1, help="concurrent per-cluster summaries")
    p.add_argument("--out", default=None, help="output directory")


def _summarizer_spec(args: argparse.Namespace) -> SummarizerSpec:
    name = args.summarizer
    common = dict(q=args.q, m=args.m, sampling=args.sampling, instruction=args.instruction,
                  lsa_components=args.lsa_components)
    if name == "none":
        return SummarizerSpec(kind=SummarizerKind.NUMERIC_MEAN, **common)
    if name in ("llm", "llm-full"):
        return SummarizerSpec(kind=SummarizerKind.LLM, full_cluster=name == "llm-full", **common)
    return SummarizerSpec(kind=SummarizerKind.NLP, nlp_method=name, **common)


def _config(args: argparse.Namespace, mode: str) -> ExperimentConfig:
    return ExperimentConfig(
        dataset_path=args.dataset,
        provider=args.provider,
        dim=args.dim,
        embed_model=args.embed_model,
        normalize=not args.no_normalize,
        summarizer=_summarizer_spec(args),
        llm=args.llm,
        llm_model=args.llm_model,
        k=args.k,
        schedule=Schedule(T=args.iters, l=args.period),
        seeds=[int(s) for s in args.seeds.split(",") if s.strip()],
        mode=mode,
        stream_target_batch=args.batch_target,
        output_dir=args.out,
        max_workers=args.workers,
    )


def _report(results: Sequence[SeedResult]) -> int:
    for r in results:
        if r.ok:
            m = r.metrics or {}
            shown = "  ".join(f"{k}={v:.4f}" for k, v in m.items() if v is not None) or "unlabelled"
            print(f"seed {r.seed}: {shown}")
        else:
            print(f"seed {r.seed}: FAILED {r.error}")
    print(format_summary(summarize_seeds(results)))
    return 0 if all(r.ok for r in results) else 1


def cmd_run(args: argparse.Namespace, mode: str) -> int:
    return _report(run_experiment(_config(args, mode)))


def cmd_eval(args: argparse.Namespace) -> int:
    docs = load_corpus(args.dataset)
    saved = json.loads(Path(args.assignments).read_text())
    mapping = saved["assignments"]
    missing = [d.id for d in docs if d.id not in mapping]
    if missing:
        print(f"error: {len(missing)} documents have no saved assignment (first: {missing[0]})", file=sys.stderr)
        return 2
    assignments = [int(mapping[d.id]) for d in docs]
    metrics = evaluate(docs, None, assignments)
    if metrics is None:
        print("error: corpus has no gold labels", file=sys.stderr)
        return 2
    payload = metrics_payload(metrics, saved.get("seed", 0), saved.get("config_digest", ""))
    text = render_metrics_json(payload)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config(args, "static")
    deltas = [float(d) for d in args.deltas.split(",")]
    rows, table = sweep_k(config, deltas)
    sys.stdout.write(table)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "sweep_k.txt").write_text(table)
    return 0 if all(not r["failed_seeds"] for r in rows) else 1


def cmd_drift(args: argparse.Namespace) -> int:
    text = drift_report_from_json(json.loads(Path(args.report).read_text()))
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    docs = synthetic_corpus(args.topics, args.per_topic, args.seed)
    write_corpus(args.out, docs)
    print(f"wrote {len(docs)} documents to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="summeans", description="k-means with summary-as-centroid steps")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="static clustering over seeds")
    _add_run_flags(p)
    p.set_defaults(func=lambda a: cmd_run(a, "static"))

    p = sub.add_parser("stream", help="chronological mini-batch clustering")
    _add_run_flags(p)
    p.set_defaults(func=lambda a: cmd_run(a, "stream"))

    p = sub.add_parser("eval", help="metrics for saved assignments")
    p.add_argument("--dataset", required=True)
    p.add_argument("--assignments", required=True, help="assignments_seed*.json from a run")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-k", help="rerun with k scaled by each delta")
    _add_run_flags(p)
    p.add_argument("--deltas", default="-0.2,-0.1,0,0.1,0.2",
                   help="comma-separated fractions; write --deltas=-0.2,0 when the first is negative")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("drift-report", help="textual centroid history from a saved run report")
    p.add_argument("--report", required=True, help="report_seed*.json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("synth", help="write a synthetic labelled corpus")
    p.add_argument("--topics", type=int, default=5)
    p.add_argument("--per-topic", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
