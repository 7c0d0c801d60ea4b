"""Command-line front end: ``simulate``, ``fit``, ``eval``, ``bench``, ``compare``.

Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from fsgm import io
from fsgm.bench import ExperimentPlan, run_experiment
from fsgm.config import PipelineConfig
from fsgm.errors import DegenerateDataError, NumericalError, TuningError, ValidationError
from fsgm.graph import auc, compare_graphs, fit, roc_points
from fsgm.simgen import ModelSpec, gen_model

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("fsgm")


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> PipelineConfig:
    config = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    overrides = {}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.rho is not None:
        overrides["rho"] = args.rho
    if args.d is not None:
        overrides["d"] = args.d if args.d == "auto" else int(args.d)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    return config.replace(**overrides) if overrides else config


def cmd_simulate(args) -> int:
    spec = ModelSpec(args.model, args.n, args.grid, m=args.m, seed=args.seed, p=args.p)
    dataset, truth = gen_model(spec)
    out = _out_dir(args.out)
    io.write_dataset(dataset, out / "data.csv")
    io.write_truth(truth, out / "truth.csv")
    print(f"wrote {dataset.n} subjects x {dataset.p} nodes to {out / 'data.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = _config(args)
    dataset = io.read_dataset(args.data)
    graph = fit(dataset, config)
    out = _out_dir(args.out)
    io.write_graph(graph, out / "graph.json")
    io.write_scores(graph, out / "scores.csv")
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
    t = graph.tuning
    print(
        f"{len(graph.scores)} pairs scored; {len(graph.edges)} edges at rho={graph.threshold:g} "
        f"(eta={t['eta']:g}, epsilon={t['epsilon']:g}, delta={t['delta']:g})"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = io.read_edges(args.truth)
    source = Path(args.scores)
    if source.suffix.lower() == ".json":
        score_map = io.read_graph(source).score_map()
    else:
        score_map = io.read_scores(source, args.p)
    points = roc_points(score_map, truth)
    value = auc(points)
    out = _out_dir(args.out)
    with open(out / "roc.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("fpr", "tpr"))
        for fpr, tpr in points:
            w.writerow((repr(fpr), repr(tpr)))
    (out / "auc.json").write_text(json.dumps({"auc": value}) + "\n", encoding="utf-8")
    print(f"auc={value:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    plan = ExperimentPlan.from_json(args.plan)
    if args.threads is not None:
        plan = replace(plan, threads=args.threads)
    if args.seed is not None:
        plan = replace(plan, model=replace(plan.model, seed=args.seed))
    report = run_experiment(plan)
    report.write(args.out)
    print(report.summary())
    return EXIT_OK


def cmd_compare(args) -> int:
    first, second = io.read_graph(args.first), io.read_graph(args.second)
    if first.p != second.p:
        raise ValidationError(f"graphs have different node counts ({first.p} and {second.p})")
    parts = compare_graphs(first, second)
    out = _out_dir(args.out)
    for name, edges in parts.items():
        io.write_edges(edges, out / f"{name}.csv")
    print(", ".join(f"{name}: {len(edges)}" for name, edges in parts.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsgm", description="Functional sufficient graphical models.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a benchmark dataset with its true graph")
    p.add_argument("--model", required=True, help="I, II, III, IV, primed variants (e.g. I') or null")
    p.add_argument("--n", type=int, default=100, help="number of subjects")
    p.add_argument("--grid", choices=("balanced", "unbalanced"), default="balanced")
    p.add_argument("--m", type=int, default=10, help="time points per subject")
    p.add_argument("--p", type=int, default=None, help="node count for the null model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="estimate the graph of a long-format dataset")
    p.add_argument("data", help="CSV with header subject,node,time,value")
    p.add_argument("--config", help="JSON pipeline configuration")
    p.add_argument("--threads", type=int)
    p.add_argument("--rho", type=float, help="fixed threshold instead of GCV")
    p.add_argument("--d", help="sufficient predictor dimension or 'auto'")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="ROC curve and AUC of scores against a true edge list")
    p.add_argument("scores", help="graph.json from fit, or a CSV with columns i,j,score")
    p.add_argument("truth", help="CSV edge list with columns i,j")
    p.add_argument("--p", type=int, default=None, help="node count, to check a score CSV is complete")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run a replicated simulation experiment")
    p.add_argument("plan", help="JSON experiment plan")
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int, help="master seed, overriding the plan")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="edges only in the first, only in the second, and common")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NumericalError, TuningError, DegenerateDataError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
