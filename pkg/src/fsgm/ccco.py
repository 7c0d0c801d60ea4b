"""Hybrid conjoined conditional covariance operator (CCCO) and its HS norm.

Given the sufficient predictor ``U = U^{ij}``, the third-level spaces are
built on ``V^i = (X^i, U)``, ``V^j = (X^j, U)`` and ``U`` itself.  The kernels
on ``V^i`` and ``V^j`` are products of a kernel on the function with the
kernel on ``U``.  The squared Hilbert-Schmidt norm of the estimated operator
measures how far ``X^i`` and ``X^j`` are from conditional independence
given ``U``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fsgm.errors import NumericalError, ValidationError
from fsgm.funcrep import (
    DEFAULT_RELATIVE_GRID,
    BasisGrid,
    CoordinateSet,
    GcvDenominator,
    _check_grid,
    argmin_grid,
    pairwise_sq_distances,
)
from fsgm.gsir import PairGrams, SufficientPredictors, _ridge_gcv_terms
from fsgm.kernels import (
    BandwidthRule,
    GramMatrix,
    KernelSpec,
    auto_gram,
    euclidean_sq_distances,
    lambda_max,
    psd_pinv_sqrt,
    psd_sqrt,
    ridge_inverse,
)


@dataclass(frozen=True, eq=False)
class HybridGrams:
    h_i: GramMatrix
    h_j: GramMatrix
    h_u: GramMatrix
    pair: tuple

    @property
    def n(self) -> int:
        return self.h_u.n


@dataclass(frozen=True)
class CccoScore:
    pair: tuple
    hs_norm: float
    delta: float
    d_used: int


def hybrid_grams_from_distances(
    sq_i: np.ndarray,
    sq_j: np.ndarray,
    u: np.ndarray,
    pair: tuple,
    function_kernel: KernelSpec = KernelSpec(),
    predictor_kernel: KernelSpec = KernelSpec(),
    rule: BandwidthRule = "inverse_mean",
) -> HybridGrams:
    """Product-kernel Gram matrices from node distances and predictor values."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    n = u.shape[0]
    if sq_i.shape != (n, n) or sq_j.shape != (n, n):
        raise ValidationError(f"predictor has {n} rows but distance matrices are {sq_i.shape}, {sq_j.shape}")
    sq_u = euclidean_sq_distances(u)
    if np.any(sq_u > 0):
        L_u = auto_gram(predictor_kernel, sq_u, rule)
    else:
        # constant predictor: the kernel is identically 1 whatever the bandwidth
        L_u = GramMatrix.from_raw(np.ones((n, n)), predictor_kernel)
    K_i = auto_gram(function_kernel, sq_i, rule)
    K_j = auto_gram(function_kernel, sq_j, rule)
    return HybridGrams(
        h_i=GramMatrix.from_raw(K_i.raw * L_u.raw, K_i.spec),
        h_j=GramMatrix.from_raw(K_j.raw * L_u.raw, K_j.spec),
        h_u=L_u,
        pair=tuple(pair),
    )


def build_hybrid_grams(
    coords: CoordinateSet,
    basis: BasisGrid,
    predictors: SufficientPredictors,
    function_kernel: KernelSpec = KernelSpec(),
    predictor_kernel: KernelSpec = KernelSpec(),
    rule: BandwidthRule = "inverse_mean",
) -> HybridGrams:
    i, j = predictors.pair
    if predictors.u.shape[0] != coords.n:
        raise ValidationError(f"predictor has {predictors.u.shape[0]} rows, expected {coords.n}")
    return hybrid_grams_from_distances(
        pairwise_sq_distances(coords, basis, [i]),
        pairwise_sq_distances(coords, basis, [j]),
        predictors.u,
        (i, j),
        function_kernel,
        predictor_kernel,
        rule,
    )


def ccco_coordinate(h: HybridGrams, delta_rel: float) -> np.ndarray:
    """``H_j - H_u (H_u + delta I)^{-1} H_j`` with ``delta = delta_rel * lambda_max(H_u)``."""
    if not delta_rel > 0:
        raise ValidationError(f"delta_rel must be positive, got {delta_rel!r}")
    H_u = h.h_u.centered
    H_j = h.h_j.centered
    lam = lambda_max(H_u)
    if not lam > 0:
        return H_j.copy()
    return H_j - H_u @ ridge_inverse(H_u, delta_rel * lam) @ H_j


def hs_norm(h: HybridGrams, coordinate: np.ndarray, rel_tol: float = 1e-9) -> float:
    """``|| H_i^{1/2} C H_j^{+1/2} ||_F`` for a coordinate ``C``."""
    coordinate = np.asarray(coordinate, dtype=float)
    if coordinate.shape != (h.n, h.n):
        raise ValidationError(f"coordinate must be {h.n}x{h.n}, got {coordinate.shape}")
    value = float(np.linalg.norm(psd_sqrt(h.h_i.centered) @ coordinate @ psd_pinv_sqrt(h.h_j.centered, rel_tol)))
    if not np.isfinite(value):
        raise NumericalError(
            f"non-finite HS norm for pair {h.pair}",
            {
                "cond_H_i": float(np.linalg.cond(h.h_i.centered)),
                "cond_H_j": float(np.linalg.cond(h.h_j.centered)),
                "cond_H_u": float(np.linalg.cond(h.h_u.centered)),
            },
        )
    return value


def score_pair(h: HybridGrams, delta_rel: float, normalize: bool = True) -> CccoScore:
    """HS norm of the estimated operator.

    The sample operator's coordinate carries a factor ``1/n`` relative to the
    Gram-matrix expression; ``normalize=True`` keeps it so the score estimates
    a population quantity that does not grow with ``n``.
    """
    value = hs_norm(h, ccco_coordinate(h, delta_rel))
    if normalize:
        value /= h.n
    lam = lambda_max(h.h_u.centered)
    return CccoScore(tuple(h.pair), value, float(delta_rel * lam), 0)


def gcv_delta_scores(
    h_collection: Sequence[HybridGrams],
    pair_grams: Sequence[PairGrams],
    grid: Sequence[float] = DEFAULT_RELATIVE_GRID,
    denominator: GcvDenominator = "centered",
) -> np.ndarray:
    grid = _check_grid(grid)
    if len(h_collection) != len(pair_grams):
        raise ValidationError("need one PairGrams per HybridGrams")
    scores = np.zeros(len(grid))
    for h, g in zip(h_collection, pair_grams):
        scores += _ridge_gcv_terms(h.h_u.centered, g.g_pair.centered, grid, denominator)
    return scores


def gcv_delta(
    h_collection: Sequence[HybridGrams],
    pair_grams: Sequence[PairGrams],
    grid: Sequence[float] = DEFAULT_RELATIVE_GRID,
    denominator: GcvDenominator = "centered",
) -> float:
    """One relative ridge for the conditioning step, summed over pairs."""
    grid = _check_grid(grid)
    return argmin_grid(grid, gcv_delta_scores(h_collection, pair_grams, grid, denominator), "delta")
