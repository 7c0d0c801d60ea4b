"""Functional generalized sliced inverse regression for one node pair.

For a pair ``(i, j)`` the response is ``X^{(i,j)} = (X^i, X^j)`` and the
predictor is everything else, ``X^{-(i,j)}``.  With centered Gram matrices
``G+`` (pair) and ``G-`` (rest) the leading eigenvectors of

    (G- + eps I)^{-1} G- G+ G- (G- + eps I)^{-1}

give the coefficients of the sufficient predictors ``U^{ij}``.  Node
indices here are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from fsgm.errors import DegenerateDataError, UnsupportedTopologyError, ValidationError
from fsgm.funcrep import (
    DEFAULT_RELATIVE_GRID,
    BasisGrid,
    CoordinateSet,
    GcvDenominator,
    _check_grid,
    argmin_grid,
    pairwise_sq_distances,
)
from fsgm.kernels import BandwidthRule, GramMatrix, KernelSpec, auto_gram, sym_eigh


@dataclass(frozen=True, eq=False)
class PairGrams:
    g_pair: GramMatrix
    g_rest: GramMatrix
    pair: tuple


@dataclass(frozen=True, eq=False)
class SufficientPredictors:
    pair: tuple
    u: np.ndarray
    eigenvalues: np.ndarray
    epsilon: float
    coefficients: np.ndarray = field(repr=False, default=None)

    @property
    def d(self) -> int:
        return self.u.shape[1]


def _check_pair(pair, p):
    i, j = (int(pair[0]), int(pair[1]))
    if p < 3:
        raise UnsupportedTopologyError(f"need at least 3 nodes to condition on the rest, got p={p}")
    if not (0 <= i < j < p):
        raise ValidationError(f"pair must satisfy 0 <= i < j < p, got {pair}")
    return i, j


def pair_grams_from_distances(
    pair_sq: np.ndarray,
    rest_sq: np.ndarray,
    pair: tuple,
    kernel: KernelSpec = KernelSpec(),
    rule: BandwidthRule = "inverse_mean",
) -> PairGrams:
    """Build both Gram matrices from precomputed squared distances."""
    return PairGrams(auto_gram(kernel, pair_sq, rule), auto_gram(kernel, rest_sq, rule), tuple(pair))


def build_pair_grams(
    coords: CoordinateSet,
    basis: BasisGrid,
    pair: tuple,
    kernel: KernelSpec = KernelSpec(),
    rule: BandwidthRule = "inverse_mean",
) -> PairGrams:
    """Second-level Gram matrices over ``{i, j}`` and its complement.

    With ``kernel.gamma`` unset, each group gets its own data-driven bandwidth.
    """
    i, j = _check_pair(pair, coords.p)
    rest = [k for k in range(coords.p) if k not in (i, j)]
    return pair_grams_from_distances(
        pairwise_sq_distances(coords, basis, (i, j)),
        pairwise_sq_distances(coords, basis, rest),
        (i, j),
        kernel,
        rule,
    )


def _fix_sign(V):
    """Flip columns so the entry of largest magnitude is positive."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def gsir_matrix(g_pair: np.ndarray, g_rest: np.ndarray, epsilon: float) -> np.ndarray:
    """The symmetrized f-GSIR matrix for an absolute ridge ``epsilon``."""
    w, V = sym_eigh(g_rest)
    w = np.maximum(w, 0.0)
    # (G- + eps I)^{-1} G- = V diag(w / (w + eps)) V'
    A = (V * (w / (w + epsilon))) @ V.T
    M = A @ g_pair @ A.T
    return 0.5 * (M + M.T)


def solve_gsir(grams: PairGrams, d: int = 2, epsilon_rel: float = 1.0) -> SufficientPredictors:
    """Leading ``d`` sufficient predictors for one pair.

    The ridge is ``epsilon_rel * lambda_max(G-)``.  Predictor values are the
    centered eigenfunctions evaluated at the sample, ``u_k = G- c_k`` with
    ``c_k = (G- + eps I)^{-1} v_k``.
    """
    G_rest = grams.g_rest.centered
    G_pair = grams.g_pair.centered
    n = G_rest.shape[0]
    if not (1 <= int(d) <= n - 1):
        raise ValidationError(f"d must lie in [1, n-1] = [1, {n - 1}], got {d}")
    if not epsilon_rel > 0:
        raise ValidationError(f"epsilon_rel must be positive, got {epsilon_rel!r}")
    w, V = sym_eigh(G_rest)
    lam_max = float(w[-1])
    if not lam_max > 0:
        raise DegenerateDataError(f"pair {grams.pair}: centered Gram of the remaining nodes is zero")
    eps = float(epsilon_rel) * lam_max
    w = np.maximum(w, 0.0)
    A = (V * (w / (w + eps))) @ V.T
    M = A @ G_pair @ A.T
    M = 0.5 * (M + M.T)
    evals, evecs = np.linalg.eigh(M)
    order = np.argsort(evals)[::-1][: int(d)]
    top = _fix_sign(evecs[:, order])
    coef = (V / (w + eps)) @ (V.T @ top)
    u = G_rest @ coef
    return SufficientPredictors(
        pair=tuple(grams.pair),
        u=u,
        eigenvalues=np.maximum(evals[order], 0.0),
        epsilon=eps,
        coefficients=coef,
    )


def choose_d_by_trace(eigenvalues: np.ndarray, fraction: float = 0.9, d_max: int | None = None) -> int:
    """Smallest ``d`` whose leading eigenvalues exceed ``fraction`` of their total."""
    ev = np.sort(np.maximum(np.asarray(eigenvalues, dtype=float), 0.0))[::-1]
    total = ev.sum()
    if not total > 0:
        return 1
    d = int(np.searchsorted(np.cumsum(ev) / total, fraction) + 1)
    d = min(d, ev.size)
    return min(d, d_max) if d_max else d


def gcv_epsilon_scores(
    all_pair_grams: Sequence[PairGrams] | Mapping[tuple, PairGrams],
    grid: Sequence[float] = DEFAULT_RELATIVE_GRID,
    denominator: GcvDenominator = "centered",
) -> np.ndarray:
    grid = _check_grid(grid)
    items = all_pair_grams.values() if isinstance(all_pair_grams, Mapping) else all_pair_grams
    scores = np.zeros(len(grid))
    for grams in items:
        scores += _ridge_gcv_terms(grams.g_rest.centered, grams.g_pair.centered, grid, denominator)
    return scores


def _ridge_gcv_terms(G_x, G_y, grid, denominator):
    """GCV terms of the kernel ridge smoother of ``G_y`` on ``G_x`` per relative ridge."""
    n = G_x.shape[0]
    w, V = sym_eigh(G_x)
    w = np.maximum(w, 0.0)
    lam = w[-1]
    if not lam > 0:
        return np.full(len(grid), np.inf)
    Y = V.T @ G_y  # residual I - S is diagonal in this eigenbasis
    row_norms = np.einsum("ij,ij->i", Y, Y)
    out = np.empty(len(grid))
    for k, rel in enumerate(grid):
        shrink = rel * lam / (w + rel * lam)
        rss = float(np.sum(row_norms * shrink**2))
        if denominator == "centered":
            # residual degrees of freedom in the centered space: tr(Q_n - S)
            df = (n - 1 - np.sum(w / (w + rel * lam))) / n
            out[k] = rss / df**2 if df > 0 else np.inf
        else:
            df = shrink.sum() / n
            out[k] = rss / (df**2 if denominator == "squared" else df)
    return out


def gcv_epsilon(
    all_pair_grams: Sequence[PairGrams] | Mapping[tuple, PairGrams],
    grid: Sequence[float] = DEFAULT_RELATIVE_GRID,
    denominator: GcvDenominator = "centered",
) -> float:
    """One relative ridge for all pairs, minimizing the pair-summed GCV."""
    grid = _check_grid(grid)
    return argmin_grid(grid, gcv_epsilon_scores(all_pair_grams, grid, denominator), "epsilon")
