"""Two-step graph estimation: per-pair sufficient reduction, then CCCO thresholding.

Pairs exposed by this module (score maps, edge sets) use 1-based node labels.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from fsgm.ccco import CccoScore, hybrid_grams_from_distances, score_pair
from fsgm.config import DEFAULT_RHO_GRID, PipelineConfig
from fsgm.errors import FsgmError, UnsupportedTopologyError, ValidationError
from fsgm.funcrep import (
    FunctionalDataset,
    _check_grid,
    argmin_grid,
    build_basis,
    fit_coordinates,
    gcv_eta,
    node_sq_distances,
)
from fsgm.gsir import _ridge_gcv_terms, choose_d_by_trace, pair_grams_from_distances, solve_gsir
from fsgm.kernels import KernelSpec, auto_gram, euclidean_sq_distances, lambda_max, ridge_inverse

log = logging.getLogger(__name__)


@dataclass(eq=False)
class ScoredGraph:
    p: int
    scores: dict
    threshold: float
    tuning: dict = field(default_factory=dict)
    pair_info: dict = field(default_factory=dict, repr=False)

    @property
    def edges(self) -> frozenset:
        return edges_at(self.score_map(), self.threshold)

    def score_map(self) -> dict:
        return {pair: s.hs_norm for pair, s in self.scores.items()}

    def with_threshold(self, rho: float) -> "ScoredGraph":
        tuning = dict(self.tuning, rho=float(rho))
        return ScoredGraph(self.p, self.scores, float(rho), tuning, self.pair_info)


def all_pairs(p: int) -> list[tuple[int, int]]:
    """Unordered 1-based pairs ``(i, j)`` with ``i < j``."""
    return list(itertools.combinations(range(1, p + 1), 2))


def edges_at(score_map: Mapping[tuple, float], rho: float) -> frozenset:
    return frozenset(pair for pair, s in score_map.items() if s > rho)


def _with_pair_context(fn, pair):
    try:
        return fn()
    except FsgmError as exc:
        if exc.args:
            exc.args = (f"pair {pair}: {exc.args[0]}",) + exc.args[1:]
        raise


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class _PairContext:
    """Shared per-dataset quantities the per-pair workers read from."""

    def __init__(self, node_sq: np.ndarray, config: PipelineConfig):
        self.node_sq = node_sq
        self.total_sq = node_sq.sum(axis=0)
        self.config = config
        self.kernel2 = config.kernel(2)
        self.kernel3 = config.kernel(3)
        self.rule = config.bandwidth_rule

    def pair_grams(self, pair0):
        i, j = pair0
        pair_sq = self.node_sq[i] + self.node_sq[j]
        rest_sq = np.maximum(self.total_sq - pair_sq, 0.0)
        np.fill_diagonal(rest_sq, 0.0)
        return pair_grams_from_distances(pair_sq, rest_sq, pair0, self.kernel2, self.rule)


def _resolve_d(config, pair1, grams, epsilon_rel, n):
    d = config.d_for(pair1)
    if d == "auto":
        full = solve_gsir(grams, n - 1, epsilon_rel)
        return choose_d_by_trace(full.eigenvalues, 0.9)
    return min(int(d), n - 1)


def fit(dataset: FunctionalDataset, config: PipelineConfig | None = None) -> ScoredGraph:
    """Estimate the functional graph.

    Runs first-level coordinates, per-pair sufficient predictors and per-pair
    CCCO scores, resolving every tuning parameter that is not fixed in
    ``config`` by GCV, and thresholds the scores.
    """
    config = config or PipelineConfig()
    n, p = dataset.n, dataset.p
    if p < 3:
        raise UnsupportedTopologyError(f"need at least 3 nodes, got {p}")
    if n < 10:
        raise ValidationError(f"need at least 10 subjects, got {n}")

    basis = build_basis(dataset, config.kernel(1))
    eta = config.eta if config.eta is not None else gcv_eta(
        dataset, basis, config.eta_grid, config.gcv_denominator
    )
    coords = fit_coordinates(dataset, basis, eta)
    node_sq = node_sq_distances(coords, basis)
    ctx = _PairContext(node_sq, config)
    pairs1 = all_pairs(p)
    pairs0 = [(i - 1, j - 1) for i, j in pairs1]
    threads = config.threads
    tuning = {"eta": eta, "bandwidth_rule": config.bandwidth_rule, "gcv": {}}

    # second level: global relative ridge
    if config.epsilon is None:
        grid = _check_grid(config.epsilon_grid)

        def eps_terms(pair0):
            g = _with_pair_context(lambda: ctx.pair_grams(pair0), (pair0[0] + 1, pair0[1] + 1))
            return _ridge_gcv_terms(g.g_rest.centered, g.g_pair.centered, grid, config.gcv_denominator)

        eps_scores = np.sum(_map(eps_terms, pairs0, threads), axis=0)
        epsilon = argmin_grid(grid, eps_scores, "epsilon")
        tuning["gcv"]["epsilon"] = dict(zip(map(float, grid), map(float, eps_scores)))
    else:
        epsilon = config.epsilon
    tuning["epsilon"] = epsilon

    def reduce_pair(args):
        pair0, pair1 = args

        def run():
            g = ctx.pair_grams(pair0)
            d = _resolve_d(config, pair1, g, epsilon, n)
            pred = solve_gsir(g, d, epsilon)
            info = {
                "gamma_pair": g.g_pair.spec.gamma,
                "gamma_rest": g.g_rest.spec.gamma,
                "epsilon_abs": pred.epsilon,
                "eigenvalues": [float(x) for x in pred.eigenvalues],
                "d": pred.d,
            }
            delta_terms = None
            if config.delta is None:
                sq_u = euclidean_sq_distances(pred.u)
                if np.any(sq_u > 0):
                    H_u = auto_gram(ctx.kernel3, sq_u, ctx.rule).centered
                    delta_terms = _ridge_gcv_terms(
                        H_u, g.g_pair.centered, _check_grid(config.delta_grid), config.gcv_denominator
                    )
                else:
                    delta_terms = np.zeros(len(config.delta_grid))
            return pred.u, info, delta_terms

        return _with_pair_context(run, pair1)

    reduced = _map(reduce_pair, list(zip(pairs0, pairs1)), threads)

    if config.delta is None:
        grid = _check_grid(config.delta_grid)
        delta_scores = np.sum([r[2] for r in reduced], axis=0)
        delta = argmin_grid(grid, delta_scores, "delta")
        tuning["gcv"]["delta"] = dict(zip(map(float, grid), map(float, delta_scores)))
    else:
        delta = config.delta
    tuning["delta"] = delta

    def score(args):
        pair0, pair1, (u, info, _) = args

        def run():
            i, j = pair0
            h = hybrid_grams_from_distances(
                ctx.node_sq[i], ctx.node_sq[j], u, pair0, ctx.kernel3, ctx.kernel3, ctx.rule
            )
            s = score_pair(h, delta, normalize=config.normalize_scores)
            extra = {
                "gamma_i": h.h_i.spec.gamma,
                "gamma_j": h.h_j.spec.gamma,
                "gamma_u": h.h_u.spec.gamma,
            }
            if config.orientation_check:
                swapped = hybrid_grams_from_distances(
                    ctx.node_sq[j], ctx.node_sq[i], u, (j, i), ctx.kernel3, ctx.kernel3, ctx.rule
                )
                s_swap = score_pair(swapped, delta, normalize=config.normalize_scores)
                extra["orientation_gap"] = abs(s.hs_norm - s_swap.hs_norm)
            return CccoScore(pair1, s.hs_norm, s.delta, info["d"]), dict(info, **extra)

        return _with_pair_context(run, pair1)

    scored = _map(score, [(a, b, r) for a, b, r in zip(pairs0, pairs1, reduced)], threads)
    scores = {pair1: s for pair1, (s, _) in zip(pairs1, scored)}
    pair_info = {pair1: info for pair1, (_, info) in zip(pairs1, scored)}
    if config.orientation_check:
        gaps = [info["orientation_gap"] for info in pair_info.values()]
        tuning["max_orientation_gap"] = float(max(gaps))
        log.info("largest i<->j score discrepancy: %.3g", max(gaps))

    score_map = {pair: s.hs_norm for pair, s in scores.items()}
    if config.rho is None:
        rho, rho_scores = gcv_rho(node_sq, score_map, config.rho_grid, epsilon, config.kernel(2), config.bandwidth_rule)
        tuning["gcv"]["rho"] = dict(zip(map(float, config.rho_grid), map(float, rho_scores)))
    else:
        rho = config.rho
    tuning["rho"] = rho
    tuning["d"] = config.d if not config.d_pairs else {"default": config.d, **{f"{i},{j}": v for (i, j), v in config.d_pairs.items()}}
    return ScoredGraph(p, scores, float(rho), tuning, pair_info)


def neighborhoods(score_map: Mapping[tuple, float], p: int, rho: float) -> list[list[int]]:
    """0-based neighbor lists of the graph thresholded at ``rho``."""
    nbrs = [[] for _ in range(p)]
    for i, j in edges_at(score_map, rho):
        nbrs[i - 1].append(j - 1)
        nbrs[j - 1].append(i - 1)
    return [sorted(x) for x in nbrs]


def gcv_rho_scores(
    node_sq: np.ndarray,
    score_map: Mapping[tuple, float],
    grid: Sequence[float] = DEFAULT_RHO_GRID,
    epsilon_rel: float = 1.0,
    kernel: KernelSpec = KernelSpec(),
    rule: str = "inverse_mean",
) -> np.ndarray:
    """Neighborhood-regression GCV for each threshold in ``grid``.

    For each node, the centered Gram of that node is regressed on the Gram of
    its neighborhood with a relative ridge ``epsilon_rel``.  A node without
    neighbors contributes ``||G_i||_F`` with unit denominator.
    """
    grid = [float(r) for r in grid]
    if not grid:
        raise ValidationError("rho grid must be nonempty")
    p, n = node_sq.shape[0], node_sq.shape[1]
    expected = p * (p - 1) // 2
    if len(score_map) != expected:
        raise ValidationError(f"score map has {len(score_map)} pairs, expected {expected}")
    node_grams = [auto_gram(kernel, node_sq[i], rule).centered for i in range(p)]
    baseline = [float(np.linalg.norm(G)) for G in node_grams]
    cache = {}

    def term(i, nbrs):
        if not nbrs:
            return baseline[i]
        key = (i, tuple(nbrs))
        if key not in cache:
            G_n = auto_gram(kernel, node_sq[list(nbrs)].sum(axis=0), rule).centered
            lam = lambda_max(G_n)
            if not lam > 0:
                cache[key] = baseline[i]
            else:
                S = G_n @ ridge_inverse(G_n, epsilon_rel * lam)
                resid = node_grams[i] - S @ node_grams[i]
                df = (n - np.trace(S)) / n
                cache[key] = float(np.linalg.norm(resid)) / df
        return cache[key]

    out = np.empty(len(grid))
    for k, rho in enumerate(grid):
        nb = neighborhoods(score_map, p, rho)
        out[k] = sum(term(i, nb[i]) for i in range(p))
    return out


def gcv_rho(
    node_sq: np.ndarray,
    score_map: Mapping[tuple, float],
    grid: Sequence[float] = DEFAULT_RHO_GRID,
    epsilon_rel: float = 1.0,
    kernel: KernelSpec = KernelSpec(),
    rule: str = "inverse_mean",
) -> tuple[float, np.ndarray]:
    """Threshold minimizing :func:`gcv_rho_scores`; returns ``(rho, scores)``."""
    grid = [float(r) for r in grid]
    scores = gcv_rho_scores(node_sq, score_map, grid, epsilon_rel, kernel, rule)
    p = node_sq.shape[0]
    if all(not edges_at(score_map, r) for r in grid) and p > 0:
        warnings.warn("every threshold in the rho grid gives an empty graph", RuntimeWarning, stacklevel=2)
        return max(grid), scores
    return argmin_grid(grid, scores, "rho"), scores


class DegenerateROCError(ValidationError):
    pass


def roc_points(score_map: Mapping[tuple, float], true_edges: Iterable[tuple]) -> list[tuple[float, float]]:
    """ROC staircase from sweeping the threshold over every distinct score.

    Points run from ``(0, 0)`` (threshold above every score) to ``(1, 1)``.
    Pairs tied at a score enter together.
    """
    truth = {tuple(sorted(e)) for e in true_edges}
    pairs = list(score_map)
    missing = truth - set(pairs)
    if missing:
        raise ValidationError(f"true edges missing from the score map: {sorted(missing)}")
    labels = np.array([pair in truth for pair in pairs])
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateROCError("ROC needs at least one edge and one non-edge")
    values = np.array([score_map[pair] for pair in pairs], dtype=float)
    points = [(0.0, 0.0)]
    for thr in np.unique(values)[::-1]:
        sel = values >= thr
        points.append((float((sel & ~labels).sum() / n_neg), float((sel & labels).sum() / n_pos)))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


def auc(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoidal area under ROC points."""
    pts = np.asarray(points, dtype=float)
    fpr, tpr = pts[:, 0], pts[:, 1]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def graph_auc(graph: ScoredGraph | Mapping[tuple, float], true_edges: Iterable[tuple]) -> float:
    score_map = graph.score_map() if isinstance(graph, ScoredGraph) else graph
    return auc(roc_points(score_map, true_edges))


def compare_graphs(first: ScoredGraph | Iterable, second: ScoredGraph | Iterable) -> dict[str, list]:
    """Edges only in ``first``, only in ``second``, and in both."""
    a = set(first.edges if isinstance(first, ScoredGraph) else first)
    b = set(second.edges if isinstance(second, ScoredGraph) else second)
    return {"first_only": sorted(a - b), "second_only": sorted(b - a), "common": sorted(a & b)}
