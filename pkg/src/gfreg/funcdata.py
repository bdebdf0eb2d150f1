"""Discretized functional data: curve containers, orthonormal bases, scores.

Curves live on a shared grid in [0, 1] and are reduced to basis-projection
scores under trapezoid quadrature.  Two basis constructions are provided:
the orthonormal Fourier system and a data-driven eigenbasis obtained from
the pooled covariance of all observed curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError

# Entrywise tolerance for the quadrature Gram matrix of a basis.
TOL_ORTH = 1e-6

_GRID_MATCH_TOL = 1e-12


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Trapezoid-rule quadrature weights for a strictly increasing grid."""
    grid = np.asarray(grid, dtype=float)
    steps = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += steps / 2.0
    w[1:] += steps / 2.0
    return w


def _validate_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.ndim != 1 or grid.size < 2:
        raise InvalidInputError("grid must be a 1-D array with at least 2 points")
    if not np.all(np.isfinite(grid)):
        raise InvalidInputError("grid contains non-finite values")
    if np.any(np.diff(grid) <= 0):
        raise InvalidInputError("grid must be strictly increasing")
    if grid[0] < -1e-12 or grid[-1] > 1 + 1e-12:
        raise InvalidInputError("grid endpoints must lie within [0, 1]")
    return grid


@dataclass(frozen=True)
class CurveSet:
    """N samples of p functional covariates observed on a shared grid.

    Parameters
    ----------
    grid : (T,) array
        Strictly increasing abscissae in [0, 1].
    values : (N, p, T) array
        Curve evaluations ``X[n, j, i] = X_{nj}(t_i)``.
    responses : (N,) array
        Scalar responses.
    names : tuple of str, optional
        Covariate names, length p.
    """

    grid: np.ndarray
    values: np.ndarray
    responses: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        grid = _validate_grid(self.grid)
        values = np.asarray(self.values, dtype=float)
        responses = np.atleast_1d(np.asarray(self.responses, dtype=float))
        if values.ndim != 3:
            raise InvalidInputError("values must have shape (N, p, T)")
        if values.shape[2] != grid.size:
            raise InvalidInputError(
                f"values last axis ({values.shape[2]}) does not match grid length ({grid.size})"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("curve values contain non-finite entries")
        if responses.ndim != 1 or responses.size != values.shape[0]:
            raise InvalidInputError("responses length must equal the number of samples")
        if not np.all(np.isfinite(responses)):
            raise InvalidInputError("responses contain non-finite entries")
        if self.names is not None and len(self.names) != values.shape[1]:
            raise InvalidInputError("names length must equal the number of covariates")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "responses", responses)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.values.shape[1]

    @property
    def n_points(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class BasisSystem:
    """D orthonormal basis functions evaluated on a grid.

    Orthonormality is with respect to the trapezoid quadrature rule stored
    in ``weights``; the Gram matrix must match the identity entrywise
    within ``TOL_ORTH``.
    """

    kind: str
    eval: np.ndarray  # (D, T)
    grid: np.ndarray  # (T,)
    weights: np.ndarray = field(default=None)  # (T,)

    def __post_init__(self):
        grid = _validate_grid(self.grid)
        ev = np.asarray(self.eval, dtype=float)
        if ev.ndim != 2 or ev.shape[1] != grid.size:
            raise InvalidInputError("basis eval must have shape (D, T) matching the grid")
        if not np.all(np.isfinite(ev)):
            raise InvalidInputError("basis values contain non-finite entries")
        w = self.weights
        w = trapezoid_weights(grid) if w is None else np.asarray(w, dtype=float)
        if w.shape != grid.shape or np.any(w <= 0):
            raise InvalidInputError("quadrature weights must be positive and match the grid")
        gram = (ev * w) @ ev.T
        err = np.abs(gram - np.eye(ev.shape[0])).max()
        if err > TOL_ORTH:
            raise InvalidInputError(
                f"basis is not orthonormal under the quadrature rule (max Gram error {err:.3g})"
            )
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "eval", ev)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.eval.shape[0]


@dataclass(frozen=True)
class ScoreMatrix:
    """Projection scores, shape (N, p, D), with a flattened (N, p*D) view.

    Flattening orders columns covariate-major: column ``j*D + d`` holds the
    score of covariate j on basis function d.
    """

    scores: np.ndarray

    def __post_init__(self):
        sc = np.asarray(self.scores, dtype=float)
        if sc.ndim != 3:
            raise InvalidInputError("scores must have shape (N, p, D)")
        if not np.all(np.isfinite(sc)):
            raise InvalidInputError("scores contain non-finite entries")
        object.__setattr__(self, "scores", sc)

    @property
    def n_samples(self) -> int:
        return self.scores.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.scores.shape[1]

    @property
    def n_basis(self) -> int:
        return self.scores.shape[2]

    @property
    def flat(self) -> np.ndarray:
        n, p, d = self.scores.shape
        return self.scores.reshape(n, p * d)

    def subset(self, idx) -> "ScoreMatrix":
        return ScoreMatrix(self.scores[idx])


def as_score_matrix(scores) -> ScoreMatrix:
    """Accept a ScoreMatrix or a raw (N, p, D) array."""
    if isinstance(scores, ScoreMatrix):
        return scores
    return ScoreMatrix(np.asarray(scores, dtype=float))


def build_fourier_basis(dim: int, grid: np.ndarray) -> BasisSystem:
    """First ``dim`` functions of the orthonormal Fourier system on [0, 1].

    Ordered as constant, then sin/cos pairs of increasing frequency:
    1, sqrt(2) sin(2 pi t), sqrt(2) cos(2 pi t), sqrt(2) sin(4 pi t), ...

    The Gram matrix under trapezoid quadrature must be the identity within
    ``TOL_ORTH``; this holds on uniform grids dense relative to ``dim``
    (trapezoid quadrature is exact for trigonometric polynomials below the
    grid's Nyquist frequency).
    """
    if dim < 1:
        raise InvalidInputError("basis dimension must be >= 1")
    grid = _validate_grid(grid)
    ev = np.empty((dim, grid.size))
    ev[0] = 1.0
    for d in range(2, dim + 1):
        freq = d // 2
        phase = 2.0 * np.pi * freq * grid
        ev[d - 1] = np.sqrt(2.0) * (np.sin(phase) if d % 2 == 0 else np.cos(phase))
    return BasisSystem(kind="fourier", eval=ev, grid=grid)


def cumulative_variance_dim(eigvals: np.ndarray, var_threshold: float) -> int:
    """Smallest D whose cumulative eigenvalue fraction reaches the threshold."""
    if not 0 < var_threshold <= 1:
        raise InvalidInputError("var_threshold must lie in (0, 1]")
    vals = np.clip(np.asarray(eigvals, dtype=float), 0.0, None)
    total = vals.sum()
    if total <= 0:
        raise InvalidInputError("all eigenvalues are zero")
    frac = np.cumsum(vals) / total
    return int(np.argmax(frac >= var_threshold - 1e-12)) + 1


def build_eigenbasis(curves: CurveSet, var_threshold: float) -> tuple[BasisSystem, int]:
    """Eigenbasis of the pooled empirical covariance of all observed curves.

    All N*p curves are pooled, centered by the pooled mean, and the
    covariance surface is eigendecomposed under the trapezoid rule.  The
    dimension D is the smallest one whose cumulative eigenvalue fraction
    reaches ``var_threshold``; the first D eigenfunctions (unit quadrature
    norm) form the basis.
    """
    pooled = curves.values.reshape(-1, curves.n_points)
    if pooled.shape[0] < 2:
        raise InvalidInputError("need at least 2 pooled curves for an eigenbasis")
    centered = pooled - pooled.mean(axis=0)
    scale = np.abs(centered).max()
    if scale == 0.0 or scale < 1e-14 * max(1.0, np.abs(pooled).max()):
        raise InvalidInputError("pooled curves have zero variance; eigenbasis is undefined")

    w = trapezoid_weights(curves.grid)
    cov = centered.T @ centered / pooled.shape[0]
    sw = np.sqrt(w)
    sym = sw[:, None] * cov * sw[None, :]
    eigvals, eigvecs = np.linalg.eigh(sym)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    dim = cumulative_variance_dim(eigvals, var_threshold)
    funcs = (eigvecs[:, :dim] / sw[:, None]).T
    # Deterministic sign: largest-magnitude value of each eigenfunction is positive.
    for row in funcs:
        peak = row[np.argmax(np.abs(row))]
        if peak < 0:
            row *= -1.0
    basis = BasisSystem(kind="eigen", eval=funcs, grid=curves.grid, weights=w)
    return basis, dim


def project_scores(curves: CurveSet, basis: BasisSystem) -> ScoreMatrix:
    """Quadrature inner products of every curve with every basis function."""
    if curves.n_points != basis.grid.size or np.abs(curves.grid - basis.grid).max() > _GRID_MATCH_TOL:
        raise InvalidInputError("basis grid does not match the curve grid")
    weighted = basis.eval * basis.weights
    scores = np.einsum("njt,dt->njd", curves.values, weighted)
    return ScoreMatrix(scores)


def reconstruct_function(coeffs: np.ndarray, basis: BasisSystem) -> np.ndarray:
    """Pointwise curve sum_d coeffs[d] * basis_d(t_i) on the basis grid."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.ndim != 1 or coeffs.size != basis.dim:
        raise InvalidInputError(
            f"coefficient length {coeffs.size} does not match basis dimension {basis.dim}"
        )
    return coeffs @ basis.eval
