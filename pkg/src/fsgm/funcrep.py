"""First-level representation of discretely observed functions.

Each function ``X_a^i`` is observed on the subject's own grid ``J_a``.  The
pooled grid ``u_1 < ... < u_N`` of all observed times spans the shared space
``span{tau(., u_c)}`` and every function gets an ``N``-vector of coefficients
that vanishes outside the subject's own index set.  Node indices in this
module are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from fsgm.errors import TuningError, ValidationError
from fsgm.kernels import BROWNIAN, KernelSpec, time_gram

GcvDenominator = Literal["paper_verbatim", "squared", "centered"]

DEFAULT_RIDGE_GRID = tuple(3.0 * 10.0**b for b in range(6))
# relative ridges (multiples of a largest eigenvalue) live below 1
DEFAULT_RELATIVE_GRID = tuple(3.0 * 10.0**-b for b in range(6))


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """``n`` subjects by ``p`` nodes, observed on per-subject time grids.

    Parameters
    ----------
    times : sequence of 1-d arrays
        ``times[a]`` is the strictly increasing grid ``J_a`` of subject ``a``.
    values : sequence of 2-d arrays
        ``values[a]`` has shape ``(p, len(times[a]))``; row ``i`` holds node
        ``i`` observed on ``J_a``.
    """

    times: tuple
    values: tuple

    def __post_init__(self):
        times = tuple(np.asarray(t, dtype=float) for t in self.times)
        values = tuple(np.asarray(v, dtype=float) for v in self.values)
        if not times:
            raise ValidationError("dataset has no subjects")
        if len(times) != len(values):
            raise ValidationError("times and values must list the same subjects")
        p = values[0].shape[0] if values[0].ndim == 2 else -1
        if p < 1:
            raise ValidationError("values[a] must be a (p, m_a) array")
        for a, (t, v) in enumerate(zip(times, values)):
            if t.ndim != 1 or t.size < 2:
                raise ValidationError(f"subject {a + 1}: need at least two time points")
            if not np.all(np.diff(t) > 0):
                raise ValidationError(f"subject {a + 1}: time points must be strictly increasing")
            if v.shape != (p, t.size):
                raise ValidationError(
                    f"subject {a + 1}: expected values of shape {(p, t.size)}, got {v.shape}"
                )
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
                raise ValidationError(f"subject {a + 1}: non-finite observations")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def p(self) -> int:
        return self.values[0].shape[0]

    @property
    def balanced(self) -> bool:
        t0 = self.times[0]
        return all(t.shape == t0.shape and np.array_equal(t, t0) for t in self.times)

    def subset(self, subjects: Sequence[int]) -> "FunctionalDataset":
        return FunctionalDataset(
            tuple(self.times[a] for a in subjects), tuple(self.values[a] for a in subjects)
        )

    def select_nodes(self, nodes: Sequence[int]) -> "FunctionalDataset":
        nodes = list(nodes)
        return FunctionalDataset(self.times, tuple(v[nodes] for v in self.values))

    def equals(self, other: "FunctionalDataset") -> bool:
        return (
            self.n == other.n
            and all(np.array_equal(a, b) for a, b in zip(self.times, other.times))
            and all(np.array_equal(a, b) for a, b in zip(self.values, other.values))
        )


@dataclass(frozen=True, eq=False)
class BasisGrid:
    pooled_times: np.ndarray
    index_sets: tuple
    basis_gram: np.ndarray = field(repr=False)
    kernel: KernelSpec = BROWNIAN

    @property
    def N(self) -> int:
        return self.pooled_times.size


@dataclass(frozen=True, eq=False)
class CoordinateSet:
    """Coefficients over the pooled basis, array of shape ``(n, p, N)``."""

    coords: np.ndarray
    eta: float

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def p(self) -> int:
        return self.coords.shape[1]


def build_basis(dataset: FunctionalDataset, kernel: KernelSpec = BROWNIAN) -> BasisGrid:
    """Pool all observation times and locate each subject's grid in the pool."""
    if dataset.n == 0:
        raise ValidationError("empty dataset")
    # exact deduplication, no epsilon merging
    pooled = np.unique(np.concatenate(dataset.times))
    index_sets = tuple(np.searchsorted(pooled, t) for t in dataset.times)
    return BasisGrid(pooled, index_sets, time_gram(kernel, pooled), kernel)


def _local_grams(basis: BasisGrid):
    """Eigendecompositions of ``tau(u(S_a), u(S_a))``, shared between equal grids."""
    cache = {}
    out = []
    for S in basis.index_sets:
        key = S.tobytes()
        if key not in cache:
            K = basis.basis_gram[np.ix_(S, S)]
            w, V = np.linalg.eigh(K)
            cache[key] = (np.maximum(w, 0.0), V)
        out.append(cache[key])
    return out


def fit_coordinates(dataset: FunctionalDataset, basis: BasisGrid, eta: float) -> CoordinateSet:
    """Tychonoff-regularized coefficients ``(tau(S_a, S_a) + eta I)^{-1} X_a^i(J_a)``."""
    if not eta > 0:
        raise ValidationError(f"eta must be positive, got {eta!r}")
    if len(basis.index_sets) != dataset.n:
        raise ValidationError("basis was built for a different dataset")
    coords = np.zeros((dataset.n, dataset.p, basis.N))
    for a, ((w, V), S, X) in enumerate(zip(_local_grams(basis), basis.index_sets, dataset.values)):
        if S.size != X.shape[1]:
            raise ValidationError(f"subject {a + 1}: grid does not match basis")
        # rows of X are nodes; solve for all nodes at once
        coords[a][:, S] = ((X @ V) / (w + eta)) @ V.T
    return CoordinateSet(coords, float(eta))


def node_inner_products(coords: CoordinateSet, basis: BasisGrid, node: int) -> np.ndarray:
    """``n x n`` matrix of RKHS inner products ``<X_a^i, X_b^i>`` for one node."""
    C = coords.coords[:, node, :]
    return C @ basis.basis_gram @ C.T


def _inner_to_sq_dist(inner):
    d = np.diag(inner)
    D = d[:, None] + d[None, :] - 2.0 * inner
    D = np.maximum(0.5 * (D + D.T), 0.0)
    np.fill_diagonal(D, 0.0)
    return D


def node_sq_distances(coords: CoordinateSet, basis: BasisGrid) -> np.ndarray:
    """Per-node squared distance matrices, shape ``(p, n, n)``."""
    return np.stack([_inner_to_sq_dist(node_inner_products(coords, basis, i)) for i in range(coords.p)])


def pairwise_sq_distances(coords: CoordinateSet, basis: BasisGrid, node_set: Iterable[int]) -> np.ndarray:
    """Squared distances in the direct sum of the first-level spaces over ``node_set``."""
    nodes = sorted(set(int(i) for i in node_set))
    if not nodes:
        raise ValidationError("node_set must be nonempty")
    if nodes[0] < 0 or nodes[-1] >= coords.p:
        raise ValidationError(f"node indices must lie in [0, {coords.p})")
    inner = sum(node_inner_products(coords, basis, i) for i in nodes)
    return _inner_to_sq_dist(inner)


def _check_grid(grid) -> list[float]:
    grid = [float(g) for g in grid]
    if not grid:
        raise ValidationError("tuning grid must be nonempty")
    if any(not g > 0 for g in grid):
        raise ValidationError("tuning grid values must be positive")
    return grid


def argmin_grid(grid: Sequence[float], scores: Sequence[float], what: str) -> float:
    """Grid value with the smallest finite score; ties go to the earliest value."""
    scores = np.asarray(scores, dtype=float)
    finite = np.isfinite(scores)
    if not finite.any():
        raise TuningError(f"GCV for {what} is non-finite at every grid point")
    masked = np.where(finite, scores, np.inf)
    return float(grid[int(np.argmin(masked))])


def gcv_eta_scores(
    dataset: FunctionalDataset,
    basis: BasisGrid,
    grid: Sequence[float] = DEFAULT_RIDGE_GRID,
    denominator: GcvDenominator = "paper_verbatim",
) -> np.ndarray:
    """GCV criterion for each ``eta`` in ``grid``, summed over subjects and nodes."""
    grid = _check_grid(grid)
    scores = np.zeros(len(grid))
    for (w, V), X in zip(_local_grams(basis), dataset.values):
        m = w.size
        proj = X @ V  # (p, m) in the eigenbasis
        for k, eta in enumerate(grid):
            shrink = eta / (w + eta)  # eigenvalues of I - K (K + eta I)^{-1}
            rss = float(np.sum((proj * shrink) ** 2))
            df = shrink.sum() / m
            scores[k] += rss / (df if denominator == "paper_verbatim" else df**2)
    return scores


def gcv_eta(
    dataset: FunctionalDataset,
    basis: BasisGrid,
    grid: Sequence[float] = DEFAULT_RIDGE_GRID,
    denominator: GcvDenominator = "paper_verbatim",
) -> float:
    """Global ``eta`` minimizing the GCV criterion over ``grid``."""
    grid = _check_grid(grid)
    return argmin_grid(grid, gcv_eta_scores(dataset, basis, grid, denominator), "eta")
