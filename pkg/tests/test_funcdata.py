"""Functional data containers, bases, and score projection."""

import numpy as np
import pytest

from gfreg import (
    CurveSet,
    ScoreMatrix,
    SimConfig,
    build_eigenbasis,
    build_fourier_basis,
    gen_dataset,
    project_scores,
    reconstruct_function,
)
from gfreg.exceptions import InvalidInputError
from gfreg.funcdata import cumulative_variance_dim, trapezoid_weights

GRID = np.linspace(0.0, 1.0, 201)


def analytic_fourier(dim, grid):
    """Independent construction of the Fourier system for cross-checking."""
    funcs = [np.ones_like(grid)]
    k = 1
    while len(funcs) < dim:
        funcs.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * k * grid))
        if len(funcs) < dim:
            funcs.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * k * grid))
        k += 1
    return np.array(funcs[:dim])


class TestFourierBasis:
    def test_constant_function(self):
        basis = build_fourier_basis(1, GRID)
        assert np.allclose(basis.eval[0], 1.0)
        gram = (basis.eval * basis.weights) @ basis.eval.T
        assert gram[0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_gram_is_identity_by_trapezoid_quadrature(self):
        basis = build_fourier_basis(5, GRID)
        funcs = analytic_fourier(5, GRID)
        assert np.allclose(basis.eval, funcs)
        w = trapezoid_weights(GRID)
        gram = (funcs * w) @ funcs.T
        assert np.abs(gram - np.eye(5)).max() <= 1e-6

    def test_second_function_at_quarter(self):
        basis = build_fourier_basis(3, GRID)
        idx = np.argmin(np.abs(GRID - 0.25))
        assert basis.eval[1, idx] == pytest.approx(np.sqrt(2.0), abs=1e-9)

    def test_rejects_bad_grid(self):
        with pytest.raises(InvalidInputError):
            build_fourier_basis(3, np.array([0.0, 0.5, 0.5, 1.0]))
        with pytest.raises(InvalidInputError):
            build_fourier_basis(3, np.array([0.0, 0.6, 0.4, 1.0]))
        with pytest.raises(InvalidInputError):
            build_fourier_basis(0, GRID)


class TestEigenbasis:
    def test_cumulative_rule(self):
        assert cumulative_variance_dim(np.array([0.5, 0.3, 0.1, 0.05, 0.05]), 0.9) == 3
        assert cumulative_variance_dim(np.array([0.5, 0.3, 0.1, 0.05, 0.05]), 0.5) == 1
        assert cumulative_variance_dim(np.array([0.5, 0.3, 0.1, 0.05, 0.05]), 1.0) == 5

    def test_rank_three_curves_give_three_dimensions(self):
        rng = np.random.default_rng(3)
        funcs = analytic_fourier(3, GRID)
        coeffs = rng.normal(size=(15, 2, 3))
        values = np.einsum("njd,dt->njt", coeffs, funcs)
        curves = CurveSet(grid=GRID, values=values, responses=np.zeros(15))
        basis, dim = build_eigenbasis(curves, var_threshold=0.99)
        assert dim == 3
        assert basis.dim == 3

    def test_dimension_monotone_in_threshold(self):
        rng = np.random.default_rng(4)
        values = rng.normal(size=(10, 3, GRID.size)).cumsum(axis=2) / 20.0
        curves = CurveSet(grid=GRID, values=values, responses=np.zeros(10))
        dims = [build_eigenbasis(curves, thr)[1] for thr in (0.5, 0.7, 0.9, 0.99, 1.0)]
        assert dims == sorted(dims)

    def test_simulated_curves_recover_generator_rank(self):
        data = gen_dataset(SimConfig(n_samples=40, seed=9))
        _, dim = build_eigenbasis(data.curves, var_threshold=0.999)
        assert dim <= 5

    def test_zero_variance_rejected(self):
        values = np.ones((4, 2, GRID.size))
        curves = CurveSet(grid=GRID, values=values, responses=np.zeros(4))
        with pytest.raises(InvalidInputError):
            build_eigenbasis(curves, var_threshold=0.9)


class TestScores:
    def test_basis_function_projects_to_unit_vector(self):
        basis = build_fourier_basis(4, GRID)
        values = np.broadcast_to(basis.eval[1], (3, 2, GRID.size)).copy()
        curves = CurveSet(grid=GRID, values=values, responses=np.zeros(3))
        scores = project_scores(curves, basis)
        want = np.array([0.0, 1.0, 0.0, 0.0])
        assert np.abs(scores.scores - want).max() <= 1e-6

    def test_zero_curves_project_to_zero(self):
        basis = build_fourier_basis(4, GRID)
        curves = CurveSet(grid=GRID, values=np.zeros((2, 2, GRID.size)), responses=np.zeros(2))
        assert np.abs(project_scores(curves, basis).scores).max() == 0.0

    def test_round_trip_recovers_scores(self):
        rng = np.random.default_rng(12)
        basis = build_fourier_basis(5, GRID)
        truth = rng.normal(size=(6, 3, 5))
        values = np.einsum("njd,dt->njt", truth, basis.eval)
        curves = CurveSet(grid=GRID, values=values, responses=np.zeros(6))
        got = project_scores(curves, basis).scores
        assert np.abs(got - truth).max() <= 1e-6

    def test_round_trip_on_eigenbasis(self):
        rng = np.random.default_rng(13)
        raw = rng.normal(size=(8, 2, GRID.size)).cumsum(axis=2) / 30.0
        curves = CurveSet(grid=GRID, values=raw, responses=np.zeros(8))
        basis, dim = build_eigenbasis(curves, var_threshold=0.8)
        coeffs = rng.normal(size=dim)
        curve = reconstruct_function(coeffs, basis)
        values = np.broadcast_to(curve, (1, 1, GRID.size)).copy()
        single = CurveSet(grid=GRID, values=values, responses=np.zeros(1))
        got = project_scores(single, basis).scores[0, 0]
        assert np.abs(got - coeffs).max() <= 1e-6

    def test_grid_mismatch_rejected(self):
        basis = build_fourier_basis(3, GRID)
        other = np.linspace(0.0, 1.0, 101)
        curves = CurveSet(grid=other, values=np.zeros((2, 1, 101)), responses=np.zeros(2))
        with pytest.raises(InvalidInputError):
            project_scores(curves, basis)

    def test_scaling_one_covariate_scales_its_score_block(self):
        rng = np.random.default_rng(14)
        basis = build_fourier_basis(4, GRID)
        values = rng.normal(size=(5, 3, GRID.size))
        curves = CurveSet(grid=GRID, values=values, responses=np.zeros(5))
        base = project_scores(curves, basis).scores

        scaled_values = values.copy()
        scaled_values[:, 1, :] *= 2.0  # power of two: exact in floating point
        scaled = CurveSet(grid=GRID, values=scaled_values, responses=np.zeros(5))
        got = project_scores(scaled, basis).scores
        assert np.array_equal(got[:, 1, :], 2.0 * base[:, 1, :])
        assert np.array_equal(got[:, 0, :], base[:, 0, :])
        assert np.array_equal(got[:, 2, :], base[:, 2, :])


class TestReconstruct:
    def test_unit_vector_gives_constant(self):
        basis = build_fourier_basis(4, GRID)
        curve = reconstruct_function(np.array([1.0, 0.0, 0.0, 0.0]), basis)
        assert np.allclose(curve, 1.0)

    def test_zero_coefficients(self):
        basis = build_fourier_basis(4, GRID)
        assert np.abs(reconstruct_function(np.zeros(4), basis)).max() == 0.0

    def test_project_after_reconstruct_is_identity(self):
        rng = np.random.default_rng(15)
        dim = 4
        grid = np.linspace(0.0, 1.0, 40 * dim + 1)
        basis = build_fourier_basis(dim, grid)
        coeffs = rng.normal(size=dim)
        curve = reconstruct_function(coeffs, basis)
        values = curve[None, None, :].copy()
        curves = CurveSet(grid=grid, values=values, responses=np.zeros(1))
        got = project_scores(curves, basis).scores[0, 0]
        assert np.abs(got - coeffs).max() <= 1e-6

    def test_length_mismatch(self):
        basis = build_fourier_basis(4, GRID)
        with pytest.raises(InvalidInputError):
            reconstruct_function(np.zeros(3), basis)


class TestContainers:
    def test_curveset_validation(self):
        with pytest.raises(InvalidInputError):
            CurveSet(grid=GRID, values=np.zeros((2, 1, 5)), responses=np.zeros(2))
        with pytest.raises(InvalidInputError):
            CurveSet(grid=GRID, values=np.zeros((2, 1, GRID.size)), responses=np.zeros(3))
        bad = np.zeros((2, 1, GRID.size))
        bad[0, 0, 0] = np.nan
        with pytest.raises(InvalidInputError):
            CurveSet(grid=GRID, values=bad, responses=np.zeros(2))
        with pytest.raises(InvalidInputError):
            CurveSet(grid=GRID + 0.5, values=np.zeros((2, 1, GRID.size)), responses=np.zeros(2))

    def test_score_matrix_flattening_is_covariate_major(self):
        scores = ScoreMatrix(np.arange(24, dtype=float).reshape(2, 3, 4))
        flat = scores.flat
        assert flat.shape == (2, 12)
        assert np.array_equal(flat[0, 4:8], scores.scores[0, 1, :])

    def test_score_matrix_rejects_non_finite(self):
        bad = np.zeros((2, 2, 2))
        bad[1, 1, 1] = np.inf
        with pytest.raises(InvalidInputError):
            ScoreMatrix(bad)
