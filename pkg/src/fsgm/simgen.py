"""Synthetic functional graphical models with known edge sets.

Models I-III are structural equations evaluated pointwise in ``t`` on each
subject's grid, with Brownian-type noise functions.  Model IV is a Gaussian
model on five Fourier coefficients per node with a banded block precision
matrix.  Primed variants extend the node count to 20, 30 and 40.  Undirected
truth is obtained by dropping arrow directions and joining co-parents.

Node labels in :class:`GroundTruth` are 1-based, matching the model
definitions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg

from fsgm.errors import ValidationError
from fsgm.funcrep import FunctionalDataset

GridMode = Literal["balanced", "unbalanced"]

N_NOISE_TERMS = 50
UNBALANCED_POOL = 100


def _eq(child, parents, fn):
    return (child, tuple(parents), fn)


_abs = np.abs
_pi = np.pi

_MODEL_I = [
    _eq(2, [1], lambda X, E: (0.5 + _abs(X[1])) ** 2 + E[2]),
    _eq(4, [2], lambda X, E: np.cos(_pi * X[2]) + E[4]),
    _eq(5, [3], lambda X, E: 5 * X[3] ** 2 + E[5]),
]
_MODEL_I_P20 = [
    _eq(13, [17], lambda X, E: (0.5 + _abs(X[17])) ** 3 + E[13]),
    _eq(16, [19], lambda X, E: np.exp(X[19]) + E[16]),
    _eq(18, [12], lambda X, E: np.sin(_pi * X[12]) + E[18]),
]
_MODEL_I_P30 = [
    _eq(21, [26], lambda X, E: X[26] ** 2 + E[21]),
    _eq(24, [23], lambda X, E: np.cos(_pi * X[23]) + E[24]),
    _eq(27, [22], lambda X, E: (0.5 + _abs(X[22])) ** 2 + E[27]),
    _eq(29, [23], lambda X, E: np.exp(X[23]) + E[29]),
]
_MODEL_I_P40 = [
    _eq(35, [31], lambda X, E: X[31] ** 2 + E[35]),
    _eq(38, [37], lambda X, E: np.cos(_pi * X[37]) + E[38]),
]
_MODEL_II = [
    _eq(3, [1], lambda X, E: np.exp(X[1]) + E[3]),
    _eq(5, [2, 4], lambda X, E: X[2] ** 2 + np.exp(X[4]) + E[5]),
    _eq(6, [4], lambda X, E: (0.5 + _abs(X[4])) ** 2 + E[6]),
    _eq(8, [7], lambda X, E: np.cos(_pi * X[7]) + E[8]),
    _eq(10, [3], lambda X, E: 5 * X[3] ** 3 + E[10]),
]
_MODEL_III = [
    _eq(3, [1], lambda X, E: np.sin(_pi * X[1]) * E[3]),
    _eq(4, [2], lambda X, E: (1 + 0.5 * _abs(X[2])) ** 3 * E[4]),
    _eq(5, [2], lambda X, E: 3 * X[2] ** 2 * E[5]),
]
_MODEL_III_P20 = [
    _eq(10, [7], lambda X, E: np.exp(_abs(X[7])) * E[10]),
    _eq(14, [9], lambda X, E: (0.3 + _abs(X[9])) ** 2 * E[14]),
    _eq(15, [8], lambda X, E: (0.5 + _abs(X[8])) ** 2 * E[15]),
    _eq(18, [11], lambda X, E: 3 * X[11] ** 3 * E[18]),
]
_MODEL_III_P30 = [
    _eq(20, [24], lambda X, E: np.exp(_abs(X[24])) * E[20]),
    _eq(22, [19], lambda X, E: (0.5 + _abs(X[19])) ** 2 * E[22]),
    _eq(26, [29], lambda X, E: 3 * X[29] ** 3 * E[26]),
    _eq(27, [22], lambda X, E: np.cos(_pi * X[22]) * E[27]),
]
_MODEL_III_P40 = [
    _eq(32, [38], lambda X, E: 3 * X[38] ** 2 * E[32]),
    _eq(39, [35], lambda X, E: (1 + _abs(X[35])) ** 2 * E[39]),
]

_STRUCTURAL = {
    "I": (5, _MODEL_I),
    "I'": (20, _MODEL_I + _MODEL_I_P20),
    "I''": (30, _MODEL_I + _MODEL_I_P20 + _MODEL_I_P30),
    "I'''": (40, _MODEL_I + _MODEL_I_P20 + _MODEL_I_P30 + _MODEL_I_P40),
    "II": (10, _MODEL_II),
    "III": (5, _MODEL_III),
    "III'": (20, _MODEL_III + _MODEL_III_P20),
    "III''": (30, _MODEL_III + _MODEL_III_P20 + _MODEL_III_P30),
    "III'''": (40, _MODEL_III + _MODEL_III_P20 + _MODEL_III_P30 + _MODEL_III_P40),
}
_GAUSSIAN = {"IV": 5, "IV'": 20, "IV''": 30, "IV'''": 40}

MODEL_IDS = tuple(_STRUCTURAL) + tuple(_GAUSSIAN) + ("null",)


def normalize_model_id(model_id: str) -> str:
    """Accept ``I'``, ``Iʹ``, ``I’`` or ``Ip`` spellings of primes."""
    s = str(model_id).strip()
    for ch in ("ʹ", "’", "′", "`"):
        s = s.replace(ch, "'")
    s = s.replace("ʺ", "''").replace("″", "''")
    head = s.rstrip("p'")
    if head.upper() in ("I", "II", "III", "IV"):
        s = head.upper() + "'" * (len(s) - len(head))
    if s.lower() == "null":
        s = "null"
    if s not in MODEL_IDS:
        raise ValidationError(f"unknown model {model_id!r}; choose from {', '.join(MODEL_IDS)}")
    return s


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    n: int
    grid_mode: GridMode = "balanced"
    m: int = 10
    seed: int = 0
    p: int | None = None  # only used by the pure-noise model

    def __post_init__(self):
        object.__setattr__(self, "model_id", normalize_model_id(self.model_id))
        if self.n < 1:
            raise ValidationError("n must be positive")
        if self.m < 2:
            raise ValidationError("need at least two time points per subject")
        if self.grid_mode not in ("balanced", "unbalanced"):
            raise ValidationError(f"grid_mode must be 'balanced' or 'unbalanced', got {self.grid_mode!r}")
        if self.grid_mode == "unbalanced" and self.m > UNBALANCED_POOL:
            raise ValidationError(f"unbalanced grids draw from a pool of {UNBALANCED_POOL} points")

    @property
    def node_count(self) -> int:
        if self.model_id == "null":
            return self.p or 3
        if self.model_id in _GAUSSIAN:
            return _GAUSSIAN[self.model_id]
        return _STRUCTURAL[self.model_id][0]

    @property
    def is_gaussian(self) -> bool:
        return self.model_id in _GAUSSIAN


@dataclass(frozen=True)
class GroundTruth:
    edges: frozenset
    p: int

    def __post_init__(self):
        edges = frozenset(tuple(sorted((int(i), int(j)))) for i, j in self.edges)
        for i, j in edges:
            if not (1 <= i < j <= self.p):
                raise ValidationError(f"edge {(i, j)} outside 1..{self.p}")
        object.__setattr__(self, "edges", edges)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def moralize(parents: dict[int, tuple]) -> set[tuple[int, int]]:
    """Undirected skeleton plus edges between co-parents."""
    edges = set()
    for child, pa in parents.items():
        for q in pa:
            edges.add(tuple(sorted((child, q))))
        for a, b in itertools.combinations(sorted(pa), 2):
            edges.add((a, b))
    return edges


def true_edges(model_id: str) -> GroundTruth:
    model_id = normalize_model_id(model_id)
    if model_id == "null":
        raise ValidationError("the pure-noise model has no fixed node count; build GroundTruth directly")
    if model_id in _GAUSSIAN:
        p = _GAUSSIAN[model_id]
        edges = {(i, j) for i in range(1, p + 1) for j in range(i + 1, min(i + 2, p) + 1)}
        return GroundTruth(frozenset(edges), p)
    p, equations = _STRUCTURAL[model_id]
    return GroundTruth(frozenset(moralize({c: pa for c, pa, _ in equations})), p)


def brownian_noise(rng: np.random.Generator, count: int, times, n_terms: int = N_NOISE_TERMS) -> np.ndarray:
    """``count`` independent paths ``t -> sum_j xi_j min(t, t_j)`` on ``times``.

    ``xi_j ~ N(0, 1)`` and ``t_j ~ U(0, 1)`` are drawn afresh for every path.
    """
    times = np.asarray(times, dtype=float)
    xi = rng.standard_normal((count, n_terms))
    knots = rng.uniform(0.0, 1.0, (count, n_terms))
    return np.einsum("cj,cmj->cm", xi, np.minimum(times[None, :, None], knots[:, None, :]))


def gen_noise_paths(n: int, count: int, eval_times, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Noise functions for ``n`` subjects and ``count`` nodes, shape ``(n, count, m)``.

    ``eval_times`` is one shared grid of shape ``(m,)`` or per-subject grids of
    shape ``(n, m)``.
    """
    eval_times = np.asarray(eval_times, dtype=float)
    if np.any(eval_times < 0) or np.any(eval_times > 1):
        raise ValidationError("noise paths are defined on [0, 1]")
    grids = np.broadcast_to(eval_times, (n, eval_times.shape[-1]))
    rngs = _subject_rngs(seed, n)[1]
    return np.stack([brownian_noise(rngs[a], count, grids[a]) for a in range(n)])


def _subject_rngs(seed, n):
    """One generator for dataset-level draws and one per subject."""
    if isinstance(seed, np.random.Generator):
        ss = seed.bit_generator.seed_seq
    else:
        ss = np.random.SeedSequence(int(seed))
    children = ss.spawn(n + 1)
    return np.random.default_rng(children[0]), [np.random.default_rng(c) for c in children[1:]]


def balanced_grid(m: int = 10) -> np.ndarray:
    """``m`` equally spaced points ending at 1, e.g. ``0.1, ..., 1.0`` for ``m=10``."""
    return np.linspace(1.0 / m, 1.0, m)


def unbalanced_grids(rng: np.random.Generator, n: int, m: int = 10) -> list[np.ndarray]:
    """Each subject takes ``m`` of one shared pool of uniform draws, sorted."""
    pool = rng.uniform(0.0, 1.0, UNBALANCED_POOL)
    return [np.sort(rng.choice(pool, size=m, replace=False)) for _ in range(n)]


def apply_structural_equations(model_id: str, noise: np.ndarray) -> np.ndarray:
    """Evaluate a structural model given its noise functions.

    ``noise`` has shape ``(p, m)`` (one subject) or ``(n, p, m)``; the result
    has the same shape.  Nodes without an equation are their own noise.
    """
    model_id = normalize_model_id(model_id)
    if model_id in _GAUSSIAN:
        raise ValidationError("Gaussian models are not structural")
    noise = np.asarray(noise, dtype=float)
    if model_id == "null":
        return noise.copy()
    p, equations = _STRUCTURAL[model_id]
    if noise.shape[-2] != p:
        raise ValidationError(f"model {model_id} has {p} nodes, noise has {noise.shape[-2]}")
    X = np.moveaxis(noise, -2, 0).copy()
    E = np.moveaxis(noise, -2, 0)
    # 1-based views so the equations read like the model definitions
    Xv = _OneBased(X)
    Ev = _OneBased(E)
    for child, _, fn in equations:
        X[child - 1] = fn(Xv, Ev)
    return np.moveaxis(X, 0, -2)


class _OneBased:
    def __init__(self, arr):
        self.arr = arr

    def __getitem__(self, k):
        return self.arr[k - 1]


def fourier_basis(t) -> np.ndarray:
    """First five Fourier functions at ``t``, shape ``(5, len(t))``."""
    t = np.asarray(t, dtype=float)
    r2 = np.sqrt(2.0)
    return np.stack(
        [
            np.ones_like(t),
            r2 * np.sin(2 * np.pi * t),
            r2 * np.cos(2 * np.pi * t),
            r2 * np.sin(4 * np.pi * t),
            r2 * np.cos(4 * np.pi * t),
        ]
    )


def gaussian_precision(p: int, s: int = 5) -> np.ndarray:
    """Block precision with ``I``, ``0.5 I``, ``0.3 I`` on block diagonals 0, 1, 2."""
    band = np.zeros(p)
    band[0] = 1.0
    if p > 1:
        band[1] = 0.5
    if p > 2:
        band[2] = 0.3
    return np.kron(scipy.linalg.toeplitz(band), np.eye(s))


def sample_gaussian_coefficients(rng: np.random.Generator, count: int, theta: np.ndarray) -> np.ndarray:
    """Draws from ``N(0, theta^{-1})`` via the Cholesky factor of ``theta``."""
    evals = np.linalg.eigvalsh(theta)
    if not evals[0] > 0:
        raise ValidationError(f"precision matrix is not positive definite (min eigenvalue {evals[0]:.3g})")
    L = np.linalg.cholesky(theta)
    z = rng.standard_normal((theta.shape[0], count))
    # theta = L L'  =>  L'^{-1} z has covariance theta^{-1}
    return scipy.linalg.solve_triangular(L.T, z, lower=False).T


def gen_model(spec: ModelSpec) -> tuple[FunctionalDataset, GroundTruth]:
    """Simulate one dataset and its ground-truth graph."""
    global_rng, rngs = _subject_rngs(spec.seed, spec.n)
    p = spec.node_count
    if spec.is_gaussian or spec.grid_mode == "balanced":
        grids = [balanced_grid(spec.m)] * spec.n
    else:
        grids = unbalanced_grids(global_rng, spec.n, spec.m)

    if spec.is_gaussian:
        theta = gaussian_precision(p)
        values = []
        for a in range(spec.n):
            xi = sample_gaussian_coefficients(rngs[a], 1, theta)[0].reshape(p, 5)
            values.append(xi @ fourier_basis(grids[a]))
        return FunctionalDataset(tuple(grids), tuple(values)), true_edges(spec.model_id)

    values = [
        apply_structural_equations(spec.model_id, brownian_noise(rngs[a], p, grids[a])) for a in range(spec.n)
    ]
    truth = GroundTruth(frozenset(), p) if spec.model_id == "null" else true_edges(spec.model_id)
    return FunctionalDataset(tuple(grids), tuple(values)), truth


