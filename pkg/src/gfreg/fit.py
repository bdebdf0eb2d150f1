"""Grouped-model estimation by block relaxation, plus baseline fits.

Given a partition of the covariates, the grouped model predicts

    y_n = beta0 + sum_k sum_{j in group k} f_j * <scores_nj, alpha_k>

with one template score vector ``alpha_k`` per group and one scale ``f_j``
per covariate.  The least-squares fit alternates three exact updates
(templates given scales, scales given templates, intercept), so the sum of
squared residuals is non-increasing.  Estimates are reported in normalized
form: unit-norm templates whose first nonzero component is positive, with
the scales absorbing the normalization constants.

Baselines: ``fit_ordinary`` (unrestricted least squares on all scores) and
``fit_matrix_variate`` (a single shared template, i.e. one group).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .detect import GroupingStructure
from .exceptions import DegenerateTemplateError, InvalidInputError
from .funcdata import as_score_matrix

_OBJECTIVE_FLOOR = 1e-14


@dataclass(frozen=True)
class GroupedModel:
    """Fitted grouped regression model.

    ``f`` is indexed by covariate (length p), ``A`` stacks one template row
    per group (K, D), and ``c`` records the cumulative normalization
    constants applied to each template (ones for an unnormalized model).
    """

    delta: GroupingStructure
    beta0: float
    f: np.ndarray
    A: np.ndarray
    c: np.ndarray
    converged: bool = True
    objective_trace: tuple[float, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        A = np.asarray(self.A, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if f.ndim != 1 or f.size != self.delta.n_covariates:
            raise InvalidInputError("scale coefficients must have one entry per covariate")
        if A.ndim != 2 or A.shape[0] != self.delta.n_groups:
            raise InvalidInputError("templates must have one row per group")
        if c.shape != (self.delta.n_groups,):
            raise InvalidInputError("normalization constants must have one entry per group")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "beta0", float(self.beta0))

    @property
    def n_covariates(self) -> int:
        return self.f.size

    @property
    def n_basis(self) -> int:
        return self.A.shape[1]

    def coefficient_rows(self) -> np.ndarray:
        """Implied per-covariate coefficient rows f_j * alpha_k(j), shape (p, D)."""
        return self.f[:, None] * self.A[self.delta.labels()]

    def predict(self, scores) -> np.ndarray:
        return predict(self, scores)


@dataclass(frozen=True)
class OrdinaryModel:
    """Unrestricted least-squares fit: intercept plus one row per covariate."""

    beta0: float
    B: np.ndarray
    metadata: dict = field(default_factory=dict)

    def predict(self, scores) -> np.ndarray:
        scores = as_score_matrix(scores)
        if scores.scores.shape[1:] != self.B.shape:
            raise InvalidInputError("score dimensions do not match the fitted model")
        return self.beta0 + scores.flat @ self.B.ravel()


def _solve_normal(design: np.ndarray, target: np.ndarray, label: str, meta: dict) -> np.ndarray:
    """Least squares via normal equations; ridge-jittered when singular."""
    gram = design.T @ design
    rhs = design.T @ target
    try:
        np.linalg.cholesky(gram)
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        warnings.warn(f"{label}: singular least-squares system, adding ridge jitter")
        meta["ridge_jitter_used"] = True
        eps = 1e-10 * max(float(np.trace(gram)), 1.0)
        return np.linalg.solve(gram + eps * np.eye(gram.shape[0]), rhs)


def _canonical_direction(v: np.ndarray) -> np.ndarray:
    """Flip sign so the largest-magnitude entry is positive."""
    peak = v[np.argmax(np.abs(v))]
    return -v if peak < 0 else v


def _initial_parameters(B0: np.ndarray, delta: GroupingStructure, y: np.ndarray,
                        xi: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Rank-one warm start per group from unit-normalized coefficient rows.

    Rows are normalized (and sign-canonicalized) before the SVD so the
    starting point, hence the whole fit, is equivariant to rescaling any
    covariate's scores.
    """
    n_groups = delta.n_groups
    d = B0.shape[1]
    A = np.zeros((n_groups, d))
    for k, block in enumerate(delta.blocks):
        rows = B0[list(block)]
        norms = np.linalg.norm(rows, axis=1)
        keep = norms > 0
        if not np.any(keep):
            A[k, 0] = 1.0
            continue
        unit = rows[keep] / norms[keep, None]
        unit = np.array([_canonical_direction(r) for r in unit])
        _, _, vt = np.linalg.svd(unit, full_matrices=False)
        A[k] = _canonical_direction(vt[0])
    f = np.einsum("jd,jd->j", B0, A[delta.labels()])
    partial = np.einsum("njd,jd->nj", xi, A[delta.labels()]) @ f
    beta0 = float(np.mean(y - partial))
    return A, f, beta0


def fit_grouped(scores, y, delta: GroupingStructure, max_iter: int = 500,
                tol: float = 1e-8) -> GroupedModel:
    """Fit the grouped model for a fixed partition by block relaxation.

    Alternates exact least-squares updates of the templates, the scales,
    and the intercept until the relative decrease of the sum of squared
    residuals falls below ``tol`` (or ``max_iter``).  The returned model is
    normalized; the objective trace (one value at initialization, then one
    per iteration) is non-increasing.
    """
    scores = as_score_matrix(scores)
    y = np.asarray(y, dtype=float).ravel()
    xi = scores.scores
    n, p, d = xi.shape
    if y.size != n:
        raise InvalidInputError("responses length must match the score rows")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("responses contain non-finite entries")
    if delta.n_covariates != p:
        raise InvalidInputError(
            f"partition covers {delta.n_covariates} covariates, scores have {p}"
        )
    n_groups = delta.n_groups
    for k, block in enumerate(delta.blocks):
        if not np.any(xi[:, list(block), :]):
            raise InvalidInputError(f"group {k} (covariates {block}) has an all-zero design")
    if n <= n_groups * d + p + 1:
        warnings.warn(
            f"few samples: N={n} <= K*D + p + 1 = {n_groups * d + p + 1}; fit may be unstable"
        )

    meta = {"ridge_jitter_used": False}
    design0 = np.concatenate([np.ones((n, 1)), scores.flat], axis=1)
    coef0 = _solve_normal(design0, y, "initial least squares", meta)
    B0 = coef0[1:].reshape(p, d)
    A, f, beta0 = _initial_parameters(B0, delta, y, xi)

    labels = delta.labels()
    blocks = [np.asarray(block) for block in delta.blocks]
    obj_scale = max(float(y @ y), 1.0)

    def predicted_partial(A_cur, f_cur):
        return np.einsum("njd,jd->nj", xi, A_cur[labels]) @ f_cur

    trace = [float(np.sum((y - beta0 - predicted_partial(A, f)) ** 2))]
    converged = False
    for _ in range(max_iter):
        # Template update: one D-block of columns per group, scales fixed.
        design_a = np.empty((n, n_groups * d))
        for k, block in enumerate(blocks):
            design_a[:, k * d:(k + 1) * d] = np.einsum("njd,j->nd", xi[:, block, :], f[block])
        A = _solve_normal(design_a, y - beta0, "template update", meta).reshape(n_groups, d)
        # Scale update: one column per covariate, templates fixed.
        design_f = np.einsum("njd,jd->nj", xi, A[labels])
        f = _solve_normal(design_f, y - beta0, "scale update", meta)
        # Intercept update.
        partial = design_f @ f
        beta0 = float(np.mean(y - partial))
        obj = float(np.sum((y - beta0 - partial) ** 2))
        trace.append(obj)
        prev = trace[-2]
        if obj <= _OBJECTIVE_FLOOR * obj_scale or prev - obj <= tol * max(prev, 1e-300):
            converged = True
            break

    model = GroupedModel(delta=delta, beta0=beta0, f=f, A=A, c=np.ones(n_groups),
                         converged=converged, objective_trace=tuple(trace), metadata=meta)
    return _normalize_allowing_zero(model)


def _normalize_allowing_zero(model: GroupedModel) -> GroupedModel:
    """Normalize a freshly fitted model, mapping zero templates to (e1, f=0).

    A zero-norm template only arises in degenerate fits where every product
    f_j * alpha_k is zero, so replacing it by the first unit vector with
    zero scales preserves all identifiable products.
    """
    A = model.A.copy()
    f = model.f.copy()
    c = model.c.copy()
    for k, block in enumerate(model.delta.blocks):
        norm = float(np.linalg.norm(A[k]))
        if norm == 0.0:
            A[k] = 0.0
            A[k, 0] = 1.0
            f[list(block)] = 0.0
            continue
        A, f, c = _normalize_group(A, f, c, k, block)
    return replace(model, A=A, f=f, c=c)


def _normalize_group(A, f, c, k, block):
    alpha = A[k]
    nonzero = np.flatnonzero(alpha)
    sign = 1.0 if alpha[nonzero[0]] > 0 else -1.0
    ck = sign * float(np.linalg.norm(alpha))
    if abs(ck - 1.0) <= 4.0 * np.finfo(float).eps:
        return A, f, c  # already normalized; keep the exact fixed point
    A[k] = alpha / ck
    f[list(block)] = f[list(block)] * ck
    c[k] = c[k] * ck
    return A, f, c


def normalize(model: GroupedModel) -> GroupedModel:
    """Rescale to unit-norm templates with positive leading component.

    Each template is divided by c_k = sign(first nonzero component) times
    its norm, and the scales of its group are multiplied by c_k, leaving
    every product f_j * alpha_k unchanged.  Idempotent.
    """
    A = model.A.copy()
    f = model.f.copy()
    c = model.c.copy()
    for k, block in enumerate(model.delta.blocks):
        if not np.any(A[k]):
            raise DegenerateTemplateError(f"template {k} has zero norm")
        A, f, c = _normalize_group(A, f, c, k, block)
    return replace(model, A=A, f=f, c=c)


def predict(model: GroupedModel, scores) -> np.ndarray:
    """Predicted responses beta0 + sum_k sum_{j in group k} f_j <scores_nj, alpha_k>."""
    scores = as_score_matrix(scores)
    if scores.n_covariates != model.n_covariates or scores.n_basis != model.n_basis:
        raise InvalidInputError("score dimensions do not match the fitted model")
    contrib = np.einsum("njd,jd->nj", scores.scores, model.A[model.delta.labels()])
    return model.beta0 + contrib @ model.f


def fit_ordinary(scores, y) -> OrdinaryModel:
    """Unrestricted least squares over the intercept and all p*D scores."""
    scores = as_score_matrix(scores)
    y = np.asarray(y, dtype=float).ravel()
    n, p, d = scores.scores.shape
    if y.size != n:
        raise InvalidInputError("responses length must match the score rows")
    meta = {"ridge_jitter_used": False}
    design = np.concatenate([np.ones((n, 1)), scores.flat], axis=1)
    coef = _solve_normal(design, y, "ordinary least squares", meta)
    return OrdinaryModel(beta0=float(coef[0]), B=coef[1:].reshape(p, d), metadata=meta)


def fit_matrix_variate(scores, y, max_iter: int = 500, tol: float = 1e-8) -> GroupedModel:
    """Single-template special case: all covariates in one group."""
    scores = as_score_matrix(scores)
    delta = GroupingStructure.single_group(scores.n_covariates)
    return fit_grouped(scores, y, delta, max_iter=max_iter, tol=tol)
