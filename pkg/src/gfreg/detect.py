"""Shape-based grouping of functional covariates.

The solver minimizes a least-squares loss on projection scores plus a
concave penalty on every pairwise "shape misalignment": for coefficient
rows ``B_i`` and ``B_j``, the misalignment vector collects the 2x2 minors
``B[i,d]*B[j,d'] - B[j,d]*B[i,d']`` over ``d < d'``, which vanish exactly
when the rows are proportional.  The penalized problem is solved with a
linearized ADMM: an exact group prox step on the misalignments, a linear
solve for the coefficients with the (nonlinear) constraint replaced by its
first-order expansion around the previous iterate, and a multiplier ascent
step.  Covariates whose normalized misalignment falls below a threshold
are merged into groups.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .exceptions import (
    ConfigurationError,
    DegenerateRowError,
    InvalidInputError,
    SolverFailureError,
)
from .funcdata import as_score_matrix
from .penalty import PenaltySpec, prox_update_rows, validate_theta


# ---------------------------------------------------------------------------
# Partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupingStructure:
    """A partition of covariate indices 0..p-1 into disjoint groups.

    Canonical form: members sorted within each block, blocks sorted by
    their smallest member.  Equality of canonical forms is partition
    equality.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.blocks)
        if not blocks or any(len(b) == 0 for b in blocks):
            raise InvalidInputError("partition must consist of nonempty blocks")
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        members = [i for b in blocks for i in b]
        if sorted(members) != list(range(len(members))):
            raise InvalidInputError("blocks must disjointly cover 0..p-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_covariates(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def n_groups(self) -> int:
        return len(self.blocks)

    def labels(self) -> np.ndarray:
        """Group index of each covariate, length p."""
        lab = np.empty(self.n_covariates, dtype=int)
        for k, block in enumerate(self.blocks):
            lab[list(block)] = k
        return lab

    @classmethod
    def from_labels(cls, labels) -> "GroupingStructure":
        labels = np.asarray(labels)
        groups: dict = {}
        for i, g in enumerate(labels):
            groups.setdefault(g, []).append(i)
        return cls(tuple(tuple(v) for v in groups.values()))

    @classmethod
    def singletons(cls, p: int) -> "GroupingStructure":
        return cls(tuple((j,) for j in range(p)))

    @classmethod
    def single_group(cls, p: int) -> "GroupingStructure":
        return cls((tuple(range(p)),))


# ---------------------------------------------------------------------------
# Misalignment
# ---------------------------------------------------------------------------

def _coeff_matrix(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise InvalidInputError("coefficient scores must be a (p, D) matrix")
    if not np.all(np.isfinite(B)):
        raise InvalidInputError("coefficient scores contain non-finite entries")
    return B


def shape_misalignment(bi: np.ndarray, bj: np.ndarray) -> np.ndarray:
    """All 2x2 minors bi[d]*bj[d'] - bj[d]*bi[d'], d < d' in lexicographic order."""
    bi = np.asarray(bi, dtype=float).ravel()
    bj = np.asarray(bj, dtype=float).ravel()
    if bi.size != bj.size:
        raise InvalidInputError("coefficient rows must have equal length")
    if bi.size < 2:
        raise InvalidInputError("misalignment needs at least 2 basis dimensions")
    du, dv = np.triu_indices(bi.size, 1)
    return bi[du] * bj[dv] - bj[du] * bi[dv]


def normalized_misalignment(bi: np.ndarray, bj: np.ndarray) -> float:
    """||misalignment|| / (||bi|| ||bj||); 0 iff proportional, at most 1."""
    bi = np.asarray(bi, dtype=float).ravel()
    bj = np.asarray(bj, dtype=float).ravel()
    ni, nj = np.linalg.norm(bi), np.linalg.norm(bj)
    if ni == 0.0:
        raise DegenerateRowError("first coefficient row has zero norm", row=0)
    if nj == 0.0:
        raise DegenerateRowError("second coefficient row has zero norm", row=1)
    value = np.linalg.norm(shape_misalignment(bi, bj)) / (ni * nj)
    return float(min(value, 1.0))


def _pair_misalignments(B: np.ndarray, pi: np.ndarray, pj: np.ndarray,
                        du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Misalignment vectors of all index pairs, shape (n_pairs, n_minors)."""
    Bi, Bj = B[pi], B[pj]
    return Bi[:, du] * Bj[:, dv] - Bj[:, du] * Bi[:, dv]


def misalignment_matrix(B) -> np.ndarray:
    """Symmetric (p, p) matrix of normalized misalignments, zero diagonal."""
    B = _coeff_matrix(B)
    p, d = B.shape
    norms = np.linalg.norm(B, axis=1)
    for j in np.flatnonzero(norms == 0.0):
        raise DegenerateRowError(f"coefficient row {j} has zero norm", row=int(j))
    pi, pj = np.triu_indices(p, 1)
    out = np.zeros((p, p))
    if pi.size:
        du, dv = np.triu_indices(d, 1)
        mis = _pair_misalignments(B, pi, pj, du, dv)
        vals = np.minimum(np.linalg.norm(mis, axis=1) / (norms[pi] * norms[pj]), 1.0)
        out[pi, pj] = vals
        out[pj, pi] = vals
    return out


# ---------------------------------------------------------------------------
# Thresholded grouping
# ---------------------------------------------------------------------------

def _connected_components(adj: np.ndarray) -> list[list[int]]:
    p = adj.shape[0]
    seen = np.zeros(p, dtype=bool)
    comps = []
    for start in range(p):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in np.flatnonzero(adj[i]):
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


def threshold_grouping(B, threshold: float) -> GroupingStructure:
    """Partition covariates by thresholding normalized misalignments.

    Connected components of the graph with an edge wherever the normalized
    misalignment is at most ``threshold``.  Componentwise the all-pairs
    condition is then verified; a component containing an above-threshold
    pair (thresholding is not transitive) is refined by average-linkage
    agglomerative clustering with merge cutoff ``threshold``.
    """
    if threshold < 0:
        raise InvalidInputError("threshold must be nonnegative")
    nm = misalignment_matrix(B)
    adj = nm <= threshold
    blocks: list[tuple[int, ...]] = []
    for comp in _connected_components(adj):
        if len(comp) == 1:
            blocks.append(tuple(comp))
            continue
        sub = nm[np.ix_(comp, comp)]
        iu = np.triu_indices(len(comp), 1)
        if np.all(sub[iu] <= threshold):
            blocks.append(tuple(comp))
            continue
        labels = fcluster(linkage(squareform(sub, checks=False), method="average"),
                          t=threshold, criterion="distance")
        for lab in np.unique(labels):
            blocks.append(tuple(np.asarray(comp)[labels == lab]))
    return GroupingStructure(tuple(blocks))


# ---------------------------------------------------------------------------
# Linearized ADMM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectConfig:
    """Solver settings for penalized group detection.

    ``threshold`` is the cutoff applied to normalized misalignments when a
    partition is read off a solution.  ``init`` selects the starting
    coefficients: "ols" (falls back to ridge when N <= p*D), "ridge", or an
    explicit (p, D) array.
    """

    penalty: PenaltySpec
    theta: float = 1.0
    threshold: float = 0.2
    max_iter: int = 2000
    tol_primal: float = 1e-6
    tol_change: float = 1e-6
    init: object = "ols"

    def __post_init__(self):
        if not isinstance(self.penalty, PenaltySpec):
            raise ConfigurationError("penalty must be a PenaltySpec")
        if float(self.theta) <= 0:
            raise ConfigurationError("theta must be positive")
        if float(self.threshold) < 0:
            raise ConfigurationError("threshold must be nonnegative")
        if int(self.max_iter) < 1:
            raise ConfigurationError("max_iter must be at least 1")
        if float(self.tol_primal) <= 0 or float(self.tol_change) <= 0:
            raise ConfigurationError("tolerances must be positive")
        if isinstance(self.init, str):
            if self.init not in ("ols", "ridge"):
                raise ConfigurationError('init must be "ols", "ridge", or a coefficient array')
        else:
            object.__setattr__(self, "init", _coeff_matrix(self.init))


@dataclass
class ADMMState:
    """Final iterates and diagnostics of one solver run."""

    B: np.ndarray
    M: np.ndarray
    u: np.ndarray
    iterations: int
    primal_residual: float
    change: float
    converged: bool


def _solve_spd(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric PSD system, adding 1e-10 diagonal jitter on failure."""
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        jittered = lhs + 1e-10 * np.eye(lhs.shape[0])
        try:
            return np.linalg.solve(jittered, rhs)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(jittered, rhs, rcond=None)[0]


def _constraint_jacobian(B: np.ndarray, pi: np.ndarray, pj: np.ndarray,
                         du: np.ndarray, dv: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Jacobian of the stacked misalignment map at B, shape (n_pairs*q, p*D)."""
    n_pairs, q = pi.size, du.size
    d = B.shape[1]
    out[:] = 0.0
    rows = np.arange(n_pairs * q).reshape(n_pairs, q)
    out[rows, (pi * d)[:, None] + du[None, :]] = B[pj][:, dv]
    out[rows, (pi * d)[:, None] + dv[None, :]] = -B[pj][:, du]
    out[rows, (pj * d)[:, None] + dv[None, :]] = B[pi][:, du]
    out[rows, (pj * d)[:, None] + du[None, :]] = -B[pi][:, dv]
    return out


def _b_update_core(M, u, B_prev, XtX, Xty, theta, pi, pj, du, dv, jbuf):
    p, d = B_prev.shape
    if pi.size == 0 or du.size == 0:
        b = _solve_spd(XtX, Xty)
        return b.reshape(p, d)
    jac = _constraint_jacobian(B_prev, pi, pj, du, dv, jbuf)
    resid = (_pair_misalignments(B_prev, pi, pj, du, dv) - M).ravel()
    jtj = jac.T @ jac
    lhs = XtX + theta * jtj
    rhs = Xty - jac.T @ u.ravel() - theta * (jac.T @ resid) + theta * (jtj @ B_prev.ravel())
    if not (np.all(np.isfinite(lhs)) and np.all(np.isfinite(rhs))):
        raise SolverFailureError("non-finite entries in the coefficient-update system")
    return _solve_spd(lhs, rhs).reshape(p, d)


def b_update(M, u, B_prev, Xi, y, theta) -> np.ndarray:
    """Exact minimizer of the linearized augmented-Lagrangian quadratic in B.

    ``Xi`` is the flattened (N, p*D) design and ``M``, ``u`` hold one row
    per covariate pair (i < j), one column per minor (d < d').
    """
    B_prev = _coeff_matrix(B_prev)
    p, d = B_prev.shape
    Xi = np.asarray(Xi, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if Xi.shape != (y.size, p * d):
        raise InvalidInputError("design shape does not match coefficients and responses")
    pi, pj = np.triu_indices(p, 1)
    du, dv = np.triu_indices(d, 1)
    M = np.asarray(M, dtype=float).reshape(pi.size, du.size)
    u = np.asarray(u, dtype=float).reshape(pi.size, du.size)
    jbuf = np.zeros((pi.size * du.size, p * d))
    return _b_update_core(M, u, B_prev, Xi.T @ Xi, Xi.T @ y, float(theta), pi, pj, du, dv, jbuf)


def _initial_coefficients(Xi, y, p, d, config) -> np.ndarray:
    if not isinstance(config.init, str):
        B0 = np.array(config.init, dtype=float)
        if B0.shape != (p, d):
            raise ConfigurationError(f"init coefficients must have shape ({p}, {d})")
        return B0
    n = Xi.shape[0]
    XtX = Xi.T @ Xi
    if config.init == "ols" and n > p * d:
        return np.linalg.lstsq(Xi, y, rcond=None)[0].reshape(p, d)
    eps = 1e-4 * np.trace(XtX) / (p * d)
    return _solve_spd(XtX + eps * np.eye(p * d), Xi.T @ y).reshape(p, d)


def admm_solve(scores, y, config: DetectConfig, u0: np.ndarray | None = None
               ) -> tuple[np.ndarray, ADMMState]:
    """Run the linearized ADMM on projection scores and centered responses.

    Responses are mean-centered internally; the intercept plays no role in
    group detection.  Iterates until both the primal residual (sup norm of
    misalignment-vs-M mismatch) and the coefficient change drop below their
    tolerances, or ``max_iter`` is reached.  Returns the final coefficient
    matrix and the solver state.
    """
    scores = as_score_matrix(scores)
    y = np.asarray(y, dtype=float).ravel()
    n, p, d = scores.scores.shape
    if n == 0 or y.size != n:
        raise InvalidInputError("responses must be a nonempty vector matching the score rows")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("responses contain non-finite entries")
    validate_theta(config.penalty, config.theta)

    theta = float(config.theta)
    Xi = scores.flat
    yc = y - y.mean()
    XtX = Xi.T @ Xi
    Xty = Xi.T @ yc
    B = _initial_coefficients(Xi, yc, p, d, config)

    pi, pj = np.triu_indices(p, 1)
    du, dv = np.triu_indices(d, 1)
    n_pairs, q = pi.size, du.size
    jbuf = np.zeros((n_pairs * q, p * d))
    if u0 is not None:
        u = np.array(u0, dtype=float).reshape(n_pairs, q)
    else:
        u = np.zeros((n_pairs, q))
    M = np.zeros((n_pairs, q))

    iterations = 0
    primal = np.inf
    change = np.inf
    converged = False
    if not np.all(np.isfinite(B)):
        raise SolverFailureError("non-finite initial coefficients", iteration=0)
    for iterations in range(1, config.max_iter + 1):
        wedge = _pair_misalignments(B, pi, pj, du, dv) if n_pairs and q else M
        M = prox_update_rows(config.penalty, wedge + u / theta, theta) if M.size else M
        try:
            B_new = _b_update_core(M, u, B, XtX, Xty, theta, pi, pj, du, dv, jbuf)
        except SolverFailureError as exc:
            raise SolverFailureError(
                f"solver diverged at iteration {iterations}: {exc}", iteration=iterations
            ) from None
        if not np.all(np.isfinite(B_new)):
            raise SolverFailureError(
                f"solver diverged: non-finite coefficients at iteration {iterations}",
                iteration=iterations,
            )
        if M.size:
            wedge_new = _pair_misalignments(B_new, pi, pj, du, dv)
            gap = wedge_new - M
            u = u + theta * gap
            primal = float(np.abs(gap).max())
        else:
            primal = 0.0
        change = float(np.abs(B_new - B).max())
        B = B_new
        if primal <= config.tol_primal and change <= config.tol_change:
            converged = True
            break

    state = ADMMState(B=B, M=M, u=u, iterations=iterations,
                      primal_residual=primal, change=change, converged=converged)
    return B, state


# ---------------------------------------------------------------------------
# Regularization path
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathEntry:
    lam: float
    coefficients: np.ndarray
    grouping: GroupingStructure
    state: ADMMState


@dataclass(frozen=True)
class PathFailure:
    lam: float
    message: str


@dataclass(frozen=True)
class PathResult:
    entries: tuple[PathEntry, ...]
    failures: tuple[PathFailure, ...] = field(default_factory=tuple)


def detect_path(scores, y, lambda_grid, config: DetectConfig,
                warm_start: bool = True) -> PathResult:
    """Solve along an ascending penalty grid, warm-starting B and u.

    Failed grid points are recorded and skipped; the path continues from
    the last successful iterates.  Disable ``warm_start`` to solve every
    grid point independently from the configured initializer.
    """
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise InvalidInputError("lambda grid must be nonempty")
    if any(v < 0 for v in grid):
        raise InvalidInputError("lambda grid values must be nonnegative")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("lambda grid must be sorted ascending")

    entries: list[PathEntry] = []
    failures: list[PathFailure] = []
    init = config.init
    u_warm = None
    for lam in grid:
        cfg = replace(config, penalty=replace(config.penalty, lam=lam), init=init)
        try:
            B, state = admm_solve(scores, y, cfg, u0=u_warm)
            grouping = threshold_grouping(B, config.threshold)
        except (SolverFailureError, DegenerateRowError) as exc:
            warnings.warn(f"grid point lam={lam:g} failed: {exc}")
            failures.append(PathFailure(lam=lam, message=str(exc)))
            continue
        entries.append(PathEntry(lam=lam, coefficients=B, grouping=grouping, state=state))
        if warm_start:
            init = B
            u_warm = state.u
    return PathResult(entries=tuple(entries), failures=tuple(failures))
