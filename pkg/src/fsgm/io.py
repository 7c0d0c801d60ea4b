"""File formats: long-format datasets, edge lists, score tables and graphs.

Datasets are UTF-8 CSV files with header ``subject,node,time,value``;
subjects and nodes are 1-based.  Floats are written with ``repr`` so a
written file reads back to the identical in-memory arrays.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from fsgm.ccco import CccoScore
from fsgm.config import parse_pair
from fsgm.errors import ValidationError
from fsgm.funcrep import FunctionalDataset
from fsgm.graph import ScoredGraph, all_pairs

DATA_HEADER = ("subject", "node", "time", "value")


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_int(text, what, lineno, path):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}:{lineno}: {what} must be an integer, got {text!r}") from None


def _parse_float(text, what, lineno, path):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}:{lineno}: {what} must be a number, got {text!r}") from None


def write_dataset(dataset: FunctionalDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATA_HEADER)
        for a, (t, v) in enumerate(zip(dataset.times, dataset.values), start=1):
            for i in range(dataset.p):
                for tk, vk in zip(t, v[i]):
                    w.writerow((a, i + 1, _fmt(tk), _fmt(vk)))


def read_dataset(path) -> FunctionalDataset:
    """Read a long-format CSV; rows may come in any order.

    Every subject must carry every node, and all nodes of a subject must be
    observed at the same time points.
    """
    records = defaultdict(lambda: defaultdict(dict))
    nodes_seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != DATA_HEADER:
            raise ValidationError(f"{path}: header must be {','.join(DATA_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            a = _parse_int(row[0], "subject", lineno, path)
            i = _parse_int(row[1], "node", lineno, path)
            t = _parse_float(row[2], "time", lineno, path)
            v = _parse_float(row[3], "value", lineno, path)
            if a < 1 or i < 1:
                raise ValidationError(f"{path}:{lineno}: subject and node are 1-based")
            if t in records[a][i]:
                raise ValidationError(f"{path}:{lineno}: duplicate time {t!r} for subject {a}, node {i}")
            records[a][i][t] = v
            nodes_seen.add(i)
    if not records:
        raise ValidationError(f"{path}: no observations")
    subjects = sorted(records)
    if subjects != list(range(1, len(subjects) + 1)):
        missing = sorted(set(range(1, subjects[-1] + 1)) - set(subjects))
        raise ValidationError(f"{path}: subjects must be numbered 1..n; missing subject {missing[0]}")
    p = max(nodes_seen)
    times, values = [], []
    for a in subjects:
        by_node = records[a]
        for i in range(1, p + 1):
            if i not in by_node:
                raise ValidationError(f"{path}: subject {a} has no observations for node {i}")
        grid = sorted(by_node[1])
        for i in range(2, p + 1):
            if sorted(by_node[i]) != grid:
                raise ValidationError(f"{path}: subject {a}, node {i}: time points differ from node 1")
        times.append(np.array(grid))
        values.append(np.array([[by_node[i][t] for t in grid] for i in range(1, p + 1)]))
    return FunctionalDataset(tuple(times), tuple(values))


def write_edges(edges: Iterable[tuple], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("i", "j"))
        for i, j in sorted(tuple(sorted(e)) for e in edges):
            w.writerow((i, j))


def read_edges(path) -> frozenset:
    out = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"i", "j"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: edge file needs columns i,j")
        for lineno, row in enumerate(reader, start=2):
            out.add(parse_pair((_parse_int(row["i"], "i", lineno, path), _parse_int(row["j"], "j", lineno, path))))
    return frozenset(out)


def write_truth(truth, path) -> None:
    """Ground truth as an ``i,j`` edge list."""
    write_edges(truth.edges, path)


def read_scores(path, p: int | None = None) -> dict:
    """Per-pair scores from a CSV with columns ``i,j,score``.

    When ``p`` is given, every pair ``i < j <= p`` must be present.
    """
    scores = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"i", "j", "score"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: score file needs columns i,j,score")
        for lineno, row in enumerate(reader, start=2):
            pair = parse_pair((_parse_int(row["i"], "i", lineno, path), _parse_int(row["j"], "j", lineno, path)))
            if pair in scores:
                raise ValidationError(f"{path}:{lineno}: duplicate pair {pair}")
            scores[pair] = _parse_float(row["score"], "score", lineno, path)
    if p is None and scores:
        p = max(j for _, j in scores)
    missing = [pair for pair in all_pairs(p or 0) if pair not in scores]
    if missing:
        raise ValidationError(f"{path}: missing score for pair {missing[0]}")
    return scores


def write_scores(graph: ScoredGraph, path) -> None:
    """Edge CSV ``i,j,score,is_edge`` over every pair."""
    edges = graph.edges
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("i", "j", "score", "is_edge"))
        for pair in sorted(graph.scores):
            w.writerow((pair[0], pair[1], _fmt(graph.scores[pair].hs_norm), int(pair in edges)))


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k) if not isinstance(k, tuple) else f"{k[0]},{k[1]}": _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def graph_to_dict(graph: ScoredGraph) -> dict:
    return {
        "p": graph.p,
        "scores": [
            {"i": i, "j": j, "hs": graph.scores[(i, j)].hs_norm, "d": graph.scores[(i, j)].d_used}
            for i, j in sorted(graph.scores)
        ],
        "threshold": graph.threshold,
        "edges": [list(e) for e in sorted(graph.edges)],
        "tuning": _jsonable(graph.tuning),
    }


def write_graph(graph: ScoredGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(graph), indent=2) + "\n", encoding="utf-8")


def read_graph(path) -> ScoredGraph:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    try:
        p = int(data["p"])
        scores = {}
        for rec in data["scores"]:
            pair = parse_pair((rec["i"], rec["j"]))
            scores[pair] = CccoScore(pair, float(rec["hs"]), float("nan"), int(rec.get("d", 0)))
        graph = ScoredGraph(p, scores, float(data["threshold"]), dict(data.get("tuning", {})))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed graph file ({exc!r})") from None
    missing = [pair for pair in all_pairs(p) if pair not in scores]
    if missing:
        raise ValidationError(f"{path}: missing score for pair {missing[0]}")
    return graph
