"""Positive kernels, Gram matrices and the symmetric matrix primitives built on them.

All kernels used downstream are either scalar-domain kernels on time points
(the Brownian motion covariance ``min(s, t)``) or radial kernels that depend on
two points only through their distance in some Hilbert space.  Radial kernels
therefore take (squared) distances as input, which lets the same code serve
Euclidean vectors, functions represented in an RKHS, and direct sums of those.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg
from scipy.special import comb

from fsgm.errors import DegenerateDataError, ValidationError

BandwidthRule = Literal["inverse_mean", "paper_verbatim"]

# Eigenvalues below -_INDEFINITE_TOL * lambda_max are rejected, milder negatives clipped.
_INDEFINITE_TOL = 1e-6


class KernelFamily(str, enum.Enum):
    BROWNIAN = "brownian"
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"

    @property
    def radial(self) -> bool:
        return self is not KernelFamily.BROWNIAN


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its bandwidth ``gamma``.

    ``gamma`` is ignored for the Brownian motion kernel.  For radial families
    ``gamma=None`` means "choose automatically from the data" and is resolved
    by :func:`resolve_bandwidth` before any Gram matrix is formed.
    """

    family: KernelFamily = KernelFamily.GAUSSIAN
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if self.family.radial and self.gamma is not None and not self.gamma > 0:
            raise ValidationError(f"bandwidth must be positive, got {self.gamma!r}")

    def with_gamma(self, gamma: float) -> "KernelSpec":
        return KernelSpec(self.family, float(gamma))


BROWNIAN = KernelSpec(KernelFamily.BROWNIAN)


def _radial_value(spec: KernelSpec, sq):
    if spec.gamma is None:
        raise ValidationError("radial kernel needs a resolved bandwidth")
    if spec.family is KernelFamily.GAUSSIAN:
        return np.exp(-spec.gamma * sq)
    return np.exp(-spec.gamma * np.sqrt(sq))


def eval_kernel(spec: KernelSpec, squared_distance: float, distance: float | None = None) -> float:
    """Evaluate a radial kernel at one (squared) distance.

    ``distance`` is optional; when given it must agree with ``squared_distance``.
    Brownian motion is not radial, use :func:`eval_time_kernel` for it.
    """
    if not spec.family.radial:
        raise ValidationError("Brownian motion kernel is defined on time points; use eval_time_kernel")
    sq = float(squared_distance)
    if sq < 0 or not np.isfinite(sq):
        raise ValidationError(f"squared distance must be finite and nonnegative, got {sq!r}")
    if distance is not None and not np.isclose(float(distance) ** 2, sq, rtol=1e-10, atol=1e-14):
        raise ValidationError("distance and squared_distance disagree")
    return float(_radial_value(spec, sq))


def eval_time_kernel(spec: KernelSpec, s, t):
    """Kernel between time points; broadcasts over array inputs.

    Brownian motion gives ``min(s, t)`` and needs ``s, t >= 0``.  Radial
    families use ``|s - t|`` as the distance.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if spec.family is KernelFamily.BROWNIAN:
        if np.any(s < 0) or np.any(t < 0):
            raise ValidationError("Brownian motion kernel requires nonnegative time points")
        return np.minimum(s, t)
    return _radial_value(spec, (s - t) ** 2)


def time_gram(spec: KernelSpec, times) -> np.ndarray:
    """Matrix ``tau(times, times)``."""
    times = np.asarray(times, dtype=float)
    return eval_time_kernel(spec, times[:, None], times[None, :])


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Raw kernel matrix ``K`` and its doubly centered version ``Q K Q``."""

    raw: np.ndarray
    centered: np.ndarray = field(repr=False)
    spec: KernelSpec | None = None

    @property
    def n(self) -> int:
        return self.raw.shape[0]

    @classmethod
    def from_raw(cls, raw, spec: KernelSpec | None = None) -> "GramMatrix":
        raw = np.asarray(raw, dtype=float)
        return cls(raw=raw, centered=center(raw), spec=spec)


def center(K: np.ndarray) -> np.ndarray:
    """Double centering ``Q K Q`` with ``Q = I - 11'/n``, symmetrized."""
    K = np.asarray(K, dtype=float)
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    G = K - row - col + K.mean()
    return 0.5 * (G + G.T)


def centering_matrix(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def _check_square_symmetric(M, name="matrix", tol=1e-10):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if not np.allclose(M, M.T, rtol=0.0, atol=tol * scale):
        raise ValidationError(f"{name} must be symmetric")
    return M


def gram_from_distances(spec: KernelSpec, squared_distances) -> GramMatrix:
    """Apply a radial kernel entrywise to a matrix of squared distances."""
    D = _check_square_symmetric(squared_distances, "squared distance matrix")
    if np.any(np.diag(D) < 0) or np.any(np.abs(np.diag(D)) > 1e-10 * max(1.0, float(D.max(initial=0.0)))):
        raise ValidationError("squared distance matrix must have a zero diagonal")
    if np.any(D < -1e-12 * max(1.0, float(np.abs(D).max(initial=0.0)))):
        raise ValidationError("squared distances must be nonnegative")
    D = np.maximum(0.5 * (D + D.T), 0.0)
    np.fill_diagonal(D, 0.0)
    return GramMatrix.from_raw(_radial_value(spec, D), spec)


def median_free_bandwidth(squared_distances, rule: BandwidthRule = "inverse_mean") -> float:
    """Data-driven Gaussian bandwidth from all pairwise squared distances.

    ``inverse_mean`` returns ``C(n,2) / sum_{a<b} d_ab^2``, i.e. the reciprocal
    of the mean squared distance.  ``paper_verbatim`` squares the binomial
    coefficient in the numerator.
    """
    D = np.asarray(squared_distances, dtype=float)
    n = D.shape[0]
    if D.ndim != 2 or D.shape[1] != n or n < 2:
        raise ValidationError("need a square distance matrix with at least two points")
    total = float(D[np.triu_indices(n, k=1)].sum())
    if not total > 0:
        raise DegenerateDataError("all pairwise distances are zero; bandwidth undefined")
    pairs = float(comb(n, 2, exact=True))
    if rule == "inverse_mean":
        return pairs / total
    if rule == "paper_verbatim":
        return pairs**2 / total
    raise ValidationError(f"unknown bandwidth rule {rule!r}")


def resolve_bandwidth(spec: KernelSpec, squared_distances, rule: BandwidthRule = "inverse_mean") -> KernelSpec:
    """Fill in ``spec.gamma`` from data when it is unset.

    Laplacian kernels are linear in the distance, so the heuristic is applied
    to unsquared distances for them.
    """
    if not spec.family.radial or spec.gamma is not None:
        return spec
    D = np.asarray(squared_distances, dtype=float)
    if spec.family is KernelFamily.LAPLACIAN:
        D = np.sqrt(np.maximum(D, 0.0))
    return spec.with_gamma(median_free_bandwidth(D, rule))


def auto_gram(spec: KernelSpec, squared_distances, rule: BandwidthRule = "inverse_mean") -> GramMatrix:
    return gram_from_distances(resolve_bandwidth(spec, squared_distances, rule), squared_distances)


def euclidean_sq_distances(Z) -> np.ndarray:
    """Pairwise squared Euclidean distances between the rows of ``Z``."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    sq = np.einsum("ij,ij->i", Z, Z)
    D = sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T
    D = np.maximum(0.5 * (D + D.T), 0.0)
    np.fill_diagonal(D, 0.0)
    return D


def ridge_inverse(M, ridge: float) -> np.ndarray:
    """``(M + ridge * I)^{-1}`` for symmetric PSD ``M``."""
    M = _check_square_symmetric(M)
    if not ridge > 0:
        raise ValidationError(f"ridge must be positive, got {ridge!r}")
    n = M.shape[0]
    return _sym(scipy.linalg.solve(M + ridge * np.eye(n), np.eye(n), assume_a="pos"))


def sym_eigh(M) -> tuple[np.ndarray, np.ndarray]:
    """Dense symmetric eigendecomposition, eigenvalues ascending."""
    M = np.asarray(M, dtype=float)
    return np.linalg.eigh(0.5 * (M + M.T))


def lambda_max(M) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


def _sym(M):
    return 0.5 * (M + M.T)


def _psd_eig(M):
    M = _check_square_symmetric(M, tol=1e-8)
    w, V = sym_eigh(M)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    if top > 0 and w[0] < -_INDEFINITE_TOL * top:
        raise ValidationError(f"matrix is indefinite (min eigenvalue {w[0]:.3g}, max {top:.3g})")
    return np.maximum(w, 0.0), V, top


def psd_sqrt(M) -> np.ndarray:
    """Symmetric square root; slightly negative eigenvalues are clipped to 0."""
    w, V, _ = _psd_eig(M)
    return _sym((V * np.sqrt(w)) @ V.T)


def psd_pinv_sqrt(M, rel_tol: float = 1e-9) -> np.ndarray:
    """Square root of the Moore-Penrose inverse.

    Eigenvalues at or below ``rel_tol * lambda_max`` are treated as zero.
    """
    w, V, top = _psd_eig(M)
    keep = w > rel_tol * top
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return _sym((V * inv) @ V.T)
