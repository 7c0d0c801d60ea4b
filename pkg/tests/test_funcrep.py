import collections

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsgm.errors import TuningError, ValidationError
from fsgm.funcrep import (
    FunctionalDataset,
    argmin_grid,
    build_basis,
    fit_coordinates,
    gcv_eta,
    gcv_eta_scores,
    node_sq_distances,
    pairwise_sq_distances,
    CoordinateSet,
    BasisGrid,
)
from fsgm.bench import replicate_seed
from fsgm.simgen import ModelSpec, gen_model


def dataset_from(rng, n=6, p=3, m=5, balanced=True):
    times, values = [], []
    for _ in range(n):
        t = np.linspace(0.1, 1.0, m) if balanced else np.sort(rng.choice(np.linspace(0.05, 1, 20), m, replace=False))
        times.append(t)
        values.append(rng.standard_normal((p, m)))
    return FunctionalDataset(tuple(times), tuple(values))


class TestDataset:
    def test_duplicate_times_rejected(self):
        with pytest.raises(ValidationError):
            FunctionalDataset((np.array([0.1, 0.1, 0.2]),), (np.zeros((2, 3)),))

    def test_single_point_rejected(self):
        with pytest.raises(ValidationError, match="subject 1"):
            FunctionalDataset((np.array([0.5]),), (np.zeros((2, 1)),))

    def test_shape_mismatch_names_subject(self):
        with pytest.raises(ValidationError, match="subject 2"):
            FunctionalDataset(
                (np.array([0.1, 0.2]), np.array([0.1, 0.2])),
                (np.zeros((2, 2)), np.zeros((3, 2))),
            )

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            FunctionalDataset((np.array([0.1, 0.2]),), (np.array([[0.0, np.nan]]),))


class TestBasis:
    def test_union_of_two_grids(self):
        ds = FunctionalDataset(
            (np.array([0.1, 0.5]), np.array([0.5, 0.9])), (np.zeros((1, 2)), np.ones((1, 2)))
        )
        b = build_basis(ds)
        np.testing.assert_array_equal(b.pooled_times, [0.1, 0.5, 0.9])
        assert b.N == 3
        for S, t in zip(b.index_sets, ds.times):
            np.testing.assert_array_equal(b.pooled_times[S], t)

    def test_balanced_grid(self, rng):
        ds = dataset_from(rng, m=10)
        b = build_basis(ds)
        assert b.N == 10
        for S in b.index_sets:
            np.testing.assert_array_equal(S, np.arange(10))

    def test_unbalanced_index_sets_consistent(self, rng):
        ds = dataset_from(rng, n=8, balanced=False)
        b = build_basis(ds)
        assert np.all(np.diff(b.pooled_times) > 0)
        assert b.N <= sum(len(t) for t in ds.times)
        for S, t in zip(b.index_sets, ds.times):
            np.testing.assert_array_equal(b.pooled_times[S], t)
        w = np.linalg.eigvalsh(b.basis_gram)
        assert w[0] > -1e-12


class TestCoordinates:
    def test_scalar_ridge_solve(self):
        # tau(1, 1) = 1, so the coefficient solves (1 + eta) c = 3
        ds = FunctionalDataset((np.array([0.5, 1.0]),), (np.array([[0.0, 3.0]]),))
        b = build_basis(ds)
        c = fit_coordinates(ds, b, 1e-12)
        K = b.basis_gram
        np.testing.assert_allclose(K @ c.coords[0, 0], [0.0, 3.0], atol=1e-9)
        single = FunctionalDataset((np.array([1.0, 2.0]),), (np.array([[3.0, 3.0]]),))
        cs = fit_coordinates(single, build_basis(single), 1e-12).coords[0, 0]
        # with tau = min, the function min(., 1) * 3 matches both points: coefficient 3 on u=1
        np.testing.assert_allclose(cs, [3.0, 0.0], atol=1e-9)

    def test_zero_values_give_zero(self, rng):
        ds = dataset_from(rng)
        ds = FunctionalDataset(ds.times, tuple(np.zeros_like(v) for v in ds.values))
        c = fit_coordinates(ds, build_basis(ds), 3.0)
        assert not np.any(c.coords)

    def test_large_eta_shrinks(self, rng):
        ds = dataset_from(rng)
        b = build_basis(ds)
        assert np.abs(fit_coordinates(ds, b, 1e12).coords).max() < 1e-10

    def test_support_inside_own_grid(self, rng):
        ds = dataset_from(rng, n=5, balanced=False)
        b = build_basis(ds)
        c = fit_coordinates(ds, b, 0.3)
        for a, S in enumerate(b.index_sets):
            outside = np.setdiff1d(np.arange(b.N), S)
            assert not np.any(c.coords[a][:, outside])

    def test_matches_local_solve(self, rng):
        ds = dataset_from(rng, n=3, balanced=False)
        b = build_basis(ds)
        eta = 0.7
        c = fit_coordinates(ds, b, eta)
        for a, S in enumerate(b.index_sets):
            K = np.minimum.outer(ds.times[a], ds.times[a])
            expected = np.linalg.solve(K + eta * np.eye(len(S)), ds.values[a].T).T
            np.testing.assert_allclose(c.coords[a][:, S], expected, atol=1e-12)

    def test_nonpositive_eta_rejected(self, rng):
        ds = dataset_from(rng)
        with pytest.raises(ValidationError):
            fit_coordinates(ds, build_basis(ds), 0.0)

    @given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3), st.floats(1e-3, 10))
    def test_linearity(self, seed, alpha, beta, eta):
        r = np.random.default_rng(seed)
        X = dataset_from(r, n=3, balanced=False)
        Y = FunctionalDataset(X.times, tuple(r.standard_normal(v.shape) for v in X.values))
        Z = FunctionalDataset(X.times, tuple(alpha * x + beta * y for x, y in zip(X.values, Y.values)))
        b = build_basis(X)
        cx, cy, cz = (fit_coordinates(d, b, eta).coords for d in (X, Y, Z))
        np.testing.assert_allclose(cz, alpha * cx + beta * cy, atol=1e-9 * (1 + np.abs(cz).max()))

    def test_residual_decreases_as_eta_shrinks(self, rng):
        ds = dataset_from(rng, m=10)
        b = build_basis(ds)
        K = b.basis_gram
        res = []
        for eta in (10.0, 1.0, 0.1, 0.01, 0.001):
            c = fit_coordinates(ds, b, eta).coords
            fitted = np.einsum("apn,mn->apm", c, K)
            res.append(np.linalg.norm(fitted - np.stack(ds.values)))
        assert all(x > y for x, y in zip(res, res[1:]))


class TestDistances:
    def test_unit_vectors_identity_gram(self):
        coords = CoordinateSet(np.array([[[1.0, 0.0]], [[0.0, 1.0]]]), 1.0)
        basis = BasisGrid(np.array([0.5, 1.0]), (np.arange(2), np.arange(2)), np.eye(2))
        D = pairwise_sq_distances(coords, basis, [0])
        assert D[0, 1] == pytest.approx(2.0)
        assert D[0, 0] == 0.0

    def test_identical_subjects_zero(self, rng):
        ds = dataset_from(rng, n=2)
        ds = FunctionalDataset(ds.times, (ds.values[0], ds.values[0].copy()))
        b = build_basis(ds)
        D = pairwise_sq_distances(fit_coordinates(ds, b, 1.0), b, [0, 1, 2])
        assert D[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_empty_node_set_rejected(self, rng):
        ds = dataset_from(rng)
        b = build_basis(ds)
        with pytest.raises(ValidationError):
            pairwise_sq_distances(fit_coordinates(ds, b, 1.0), b, [])

    @given(st.integers(0, 2**31 - 1))
    def test_additivity_and_psd(self, seed):
        r = np.random.default_rng(seed)
        ds = dataset_from(r, n=6, p=4, balanced=bool(seed % 2))
        b = build_basis(ds)
        c = fit_coordinates(ds, b, 0.5)
        D01 = pairwise_sq_distances(c, b, [0, 1])
        D23 = pairwise_sq_distances(c, b, [2, 3])
        Dall = pairwise_sq_distances(c, b, [0, 1, 2, 3])
        np.testing.assert_allclose(Dall, D01 + D23, atol=1e-10 * (1 + Dall.max()))
        np.testing.assert_allclose(node_sq_distances(c, b).sum(axis=0), Dall, atol=1e-10 * (1 + Dall.max()))
        # polarization: -Q D Q / 2 is the centered inner-product matrix
        Q = np.eye(6) - 1 / 6
        w = np.linalg.eigvalsh(-0.5 * Q @ Dall @ Q)
        assert w[0] >= -1e-8 * max(1.0, w[-1])
        assert np.all(Dall >= 0) and np.all(np.diag(Dall) == 0)


class TestGcvEta:
    def test_single_grid_value(self, rng):
        ds = dataset_from(rng)
        assert gcv_eta(ds, build_basis(ds), [0.7]) == 0.7

    def test_noise_free_prefers_smallest(self, rng):
        # values that lie exactly in the span of tau(., J_a)
        ds = dataset_from(rng, m=8)
        t = ds.times[0]
        K = np.minimum.outer(t, t)
        vals = tuple(rng.standard_normal((3, 8)) @ K for _ in range(ds.n))
        exact = FunctionalDataset(ds.times, vals)
        grid = [3.0 * 10.0**b for b in range(-3, 6)]
        for denom in ("paper_verbatim", "squared"):
            assert gcv_eta(exact, build_basis(exact), grid, denom) == grid[0]

    def test_argmin_all_nonfinite(self):
        with pytest.raises(TuningError):
            argmin_grid([1.0, 2.0], [np.nan, np.inf], "eta")

    def test_scores_match_direct_formula(self, rng):
        ds = dataset_from(rng, n=3, balanced=False)
        b = build_basis(ds)
        eta = 0.3
        expected = 0.0
        for t, X in zip(ds.times, ds.values):
            K = np.minimum.outer(t, t)
            S = K @ np.linalg.inv(K + eta * np.eye(len(t)))
            R = X.T - S @ X.T
            expected += np.sum(R**2) / (np.trace(np.eye(len(t)) - S) / len(t))
        assert gcv_eta_scores(ds, b, [eta], "paper_verbatim")[0] == pytest.approx(expected, rel=1e-10)

    def test_model_I_selection_is_stable(self):
        picks = collections.Counter()
        for r in range(10):
            ds, _ = gen_model(ModelSpec("I", 100, "balanced", seed=replicate_seed(0, r)))
            picks[gcv_eta(ds, build_basis(ds))] += 1
        assert picks.most_common(1)[0][1] >= 8
