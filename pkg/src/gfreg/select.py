"""Tuning by Monte-Carlo cross-validation over candidate partitions.

Candidates are the distinct partitions found along the penalty path for
every grouping threshold in the grid.  Each candidate is scored by
repeated random 2/3 : 1/3 train/test splits: the grouped model is fitted
on the training part and the prediction root-mean-square error is averaged
over replicates.  All candidates are scored on the same splits (the split
sequence depends only on the seed), so their scores are directly
comparable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .detect import DetectConfig, GroupingStructure, detect_path, threshold_grouping
from .exceptions import GfregError, InvalidInputError, SolverFailureError
from .fit import fit_grouped, fit_ordinary, predict
from .funcdata import as_score_matrix

# Penalty grid reaching from effectively-unpenalized to everything-merged
# on data with unit-scale noise, and the grouping thresholds worth scanning.
DEFAULT_LAMBDA_GRID = (0.0, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0, 1.5, 2.5, 4.0, 6.0, 9.0, 14.0, 20.0)
DEFAULT_THRESHOLD_GRID = (0.06, 0.1, 0.2, 0.3, 0.35, 0.4)


@dataclass(frozen=True)
class CVConfig:
    """Cross-validation settings: replicates, split fraction, seed, grids."""

    reps: int = 100
    train_fraction: float = 2.0 / 3.0
    seed: int = 0
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    threshold_grid: tuple[float, ...] = DEFAULT_THRESHOLD_GRID

    def __post_init__(self):
        if int(self.reps) < 1:
            raise InvalidInputError("reps must be >= 1")
        if not 0.0 < float(self.train_fraction) < 1.0:
            raise InvalidInputError("train_fraction must lie strictly between 0 and 1")
        if len(self.lambda_grid) == 0 or len(self.threshold_grid) == 0:
            raise InvalidInputError("lambda and threshold grids must be nonempty")


def mccv_splits(n: int, cvconfig: CVConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """The seeded (train, test) index pairs used by ``mccv_rmse``."""
    n_train = int(round(cvconfig.train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise InvalidInputError(f"cannot split N={n} into nonempty train/test parts")
    rng = np.random.default_rng(cvconfig.seed)
    splits = []
    for _ in range(int(cvconfig.reps)):
        perm = rng.permutation(n)
        splits.append((perm[:n_train], perm[n_train:]))
    return splits


def mccv_rmse(delta: GroupingStructure, scores, y, cvconfig: CVConfig,
              max_iter: int = 500, tol: float = 1e-8) -> tuple[float, np.ndarray]:
    """Average test RMSE of the grouped model at ``delta`` over random splits.

    Replicates whose fit fails are skipped with a warning; more than 10%
    skipped raises.  Returns the mean RMSE and the per-replicate values.
    """
    scores = as_score_matrix(scores)
    y = np.asarray(y, dtype=float).ravel()
    splits = mccv_splits(y.size, cvconfig)
    rmses = []
    skipped = 0
    for b, (train, test) in enumerate(splits):
        try:
            model = fit_grouped(scores.subset(train), y[train], delta,
                                max_iter=max_iter, tol=tol)
        except GfregError as exc:
            warnings.warn(f"replicate {b} skipped: {exc}")
            skipped += 1
            continue
        resid = predict(model, scores.subset(test)) - y[test]
        rmses.append(float(np.sqrt(np.mean(resid**2))))
    if skipped > 0.1 * len(splits):
        raise SolverFailureError(
            f"{skipped} of {len(splits)} cross-validation replicates failed"
        )
    rmses = np.asarray(rmses)
    return float(rmses.mean()), rmses


@dataclass(frozen=True)
class CandidateResult:
    """One scored candidate partition and the grid point that produced it."""

    lam: float
    threshold: float
    grouping: GroupingStructure
    mean_rmse: float
    rmse_std: float
    rmses: tuple[float, ...]
    n_skipped: int = 0


@dataclass(frozen=True)
class CVReport:
    """All scored candidates plus the selected one (minimum mean RMSE)."""

    candidates: tuple[CandidateResult, ...]
    selected_index: int
    cvconfig: CVConfig
    failures: tuple[str, ...] = field(default_factory=tuple)

    @property
    def selected(self) -> CandidateResult:
        return self.candidates[self.selected_index]


def enumerate_candidates(scores, y, cvconfig: CVConfig, detect_config: DetectConfig,
                         warm_start: bool = True):
    """Distinct partitions over the (lambda, threshold) grid.

    The penalty path is solved once per lambda (solutions do not depend on
    the grouping threshold) and each threshold then reads its partitions
    off the stored coefficients.  Returns a list of
    (grouping, lam, threshold) triples, first occurrence order with
    thresholds scanned ascending, and the list of path failure messages.
    """
    lam_grid = tuple(sorted(float(v) for v in set(cvconfig.lambda_grid)))
    path = detect_path(scores, y, lam_grid, detect_config, warm_start=warm_start)
    if not path.entries:
        raise SolverFailureError("every penalty grid point failed; no candidates to score")
    seen: dict[GroupingStructure, tuple[float, float]] = {}
    for threshold in sorted(float(t) for t in set(cvconfig.threshold_grid)):
        for entry in path.entries:
            grouping = threshold_grouping(entry.coefficients, threshold)
            if grouping not in seen:
                seen[grouping] = (entry.lam, threshold)
    candidates = [(g, lam, thr) for g, (lam, thr) in seen.items()]
    failures = tuple(f"lam={f.lam:g}: {f.message}" for f in path.failures)
    return candidates, failures


def _score_candidate(grouping, lam, threshold, scores, y, cvconfig):
    try:
        mean, rmses = mccv_rmse(grouping, scores, y, cvconfig)
    except GfregError as exc:
        return None, f"candidate ({lam:g}, {threshold:g}) failed: {exc}"
    return CandidateResult(
        lam=lam,
        threshold=threshold,
        grouping=grouping,
        mean_rmse=mean,
        rmse_std=float(rmses.std()),
        rmses=tuple(rmses.tolist()),
        n_skipped=int(cvconfig.reps) - rmses.size,
    ), None


def select_model(scores, y, cvconfig: CVConfig, detect_config: DetectConfig,
                 jobs: int = 1) -> CVReport:
    """Enumerate candidate partitions, score each by MCCV, pick the best.

    Ties on mean RMSE prefer fewer groups, then the smaller penalty that
    produced the partition.  ``jobs`` parallelizes candidate scoring
    without changing any result.
    """
    scores = as_score_matrix(scores)
    y = np.asarray(y, dtype=float).ravel()
    candidates, failures = enumerate_candidates(scores, y, cvconfig, detect_config)

    if jobs != 1 and len(candidates) > 1:
        from joblib import Parallel, delayed

        outcomes = Parallel(n_jobs=jobs)(
            delayed(_score_candidate)(g, lam, thr, scores, y, cvconfig)
            for g, lam, thr in candidates
        )
    else:
        outcomes = [_score_candidate(g, lam, thr, scores, y, cvconfig)
                    for g, lam, thr in candidates]

    scored: list[CandidateResult] = []
    failure_list = list(failures)
    for result, error in outcomes:
        if result is None:
            warnings.warn(error)
            failure_list.append(error)
        else:
            scored.append(result)
    if not scored:
        raise SolverFailureError("all candidate partitions failed cross-validation")

    best = min(range(len(scored)),
               key=lambda i: (scored[i].mean_rmse, scored[i].grouping.n_groups,
                              scored[i].lam, scored[i].threshold))
    return CVReport(candidates=tuple(scored), selected_index=best,
                    cvconfig=cvconfig, failures=tuple(failure_list))


def baseline_comparison(scores, y, grouped: GroupingStructure, cvconfig: CVConfig,
                        oracle: GroupingStructure | None = None,
                        ) -> dict[str, tuple[float, np.ndarray]]:
    """Replicate-level MCCV RMSEs of the competing models on shared splits.

    Methods: "ordinary" (unrestricted least squares), "matrix" (single
    shared template), "grouped" (the supplied partition), and "oracle"
    (the true partition, when given).  Every method sees the same seeded
    splits, so per-replicate values are paired.
    """
    scores = as_score_matrix(scores)
    y = np.asarray(y, dtype=float).ravel()
    p = scores.n_covariates
    splits = mccv_splits(y.size, cvconfig)

    fitters = {
        "ordinary": lambda xs, ys: fit_ordinary(xs, ys),
        "matrix": lambda xs, ys: fit_grouped(xs, ys, GroupingStructure.single_group(p)),
        "grouped": lambda xs, ys: fit_grouped(xs, ys, grouped),
    }
    if oracle is not None:
        fitters["oracle"] = lambda xs, ys: fit_grouped(xs, ys, oracle)

    out: dict[str, tuple[float, np.ndarray]] = {}
    for name, fitter in fitters.items():
        rmses = []
        skipped = 0
        for b, (train, test) in enumerate(splits):
            try:
                model = fitter(scores.subset(train), y[train])
            except GfregError as exc:
                warnings.warn(f"{name}: replicate {b} skipped: {exc}")
                skipped += 1
                continue
            resid = model.predict(scores.subset(test)) - y[test]
            rmses.append(float(np.sqrt(np.mean(resid**2))))
        if skipped > 0.1 * len(splits):
            raise SolverFailureError(f"{name}: {skipped} of {len(splits)} replicates failed")
        arr = np.asarray(rmses)
        out[name] = (float(arr.mean()), arr)
    return out
