"""Command-line interface tying the pipeline together.

Subcommands: ``simulate`` (write a synthetic dataset), ``detect`` (solve a
penalty path and write the grouping path), ``fit`` (fit the grouped model
for a given partition), ``cv`` (tune over the penalty/threshold grids by
Monte-Carlo cross-validation), and ``baselines`` (replicate-level RMSE
comparison of the competing models).

Exit codes: 0 success, 2 invalid input or configuration, 3 solver failure.
Outputs are deterministic given inputs and seed, except the timestamp field
inside manifests.  ``GFREG_OUTDIR`` overrides the default output directory.
"""

from __future__ import annotations

import contextlib
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import io
from .detect import DetectConfig, GroupingStructure, detect_path
from .exceptions import ConfigurationError, InvalidInputError, SolverFailureError
from .fit import fit_grouped, predict
from .funcdata import CurveSet, ScoreMatrix, build_eigenbasis, build_fourier_basis, project_scores
from .penalty import PenaltySpec
from .select import (
    DEFAULT_LAMBDA_GRID,
    DEFAULT_THRESHOLD_GRID,
    CVConfig,
    baseline_comparison,
    select_model,
)
from .simgen import SimConfig, gen_dataset


@contextlib.contextmanager
def _exit_codes():
    try:
        yield
    except (InvalidInputError, ConfigurationError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except SolverFailureError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(3)


def _resolve_outdir(out: str | None) -> Path:
    outdir = Path(out or os.environ.get("GFREG_OUTDIR", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _parse_floats(text: str, what: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError:
        raise InvalidInputError(f"could not parse {what} {text!r}") from None
    if not values:
        raise InvalidInputError(f"{what} must contain at least one value")
    return values


def _parse_groups(text: str) -> GroupingStructure:
    blocks = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            blocks.append(tuple(int(tok) - 1 for tok in part.split(",")))
        except ValueError:
            raise InvalidInputError(f"could not parse group spec {part!r}") from None
    return GroupingStructure(tuple(blocks))


def _load_data(data_dir: str, basis: str, dim: int | None, var_threshold: float
               ) -> tuple[ScoreMatrix, np.ndarray, dict[str, Path]]:
    """Load scores and responses; project curves if no score file exists."""
    root = Path(data_dir)
    responses = root / io.RESPONSES_FILE
    if not responses.exists():
        raise InvalidInputError(f"missing {responses}")
    y = io.read_responses_csv(responses)
    inputs: dict[str, Path] = {io.RESPONSES_FILE: responses}

    scores_file = root / io.SCORES_FILE
    if scores_file.exists():
        scores = ScoreMatrix(io.read_scores_csv(scores_file))
        inputs[io.SCORES_FILE] = scores_file
        return scores, y, inputs

    curves_file = root / io.CURVES_FILE
    if not curves_file.exists():
        raise InvalidInputError(f"neither {scores_file} nor {curves_file} exists")
    grid, values = io.read_curves_csv(curves_file)
    curves = CurveSet(grid=grid, values=values, responses=y)
    if basis == "fourier":
        if dim is None:
            raise InvalidInputError("--dim is required to project curves on a Fourier basis")
        basis_system = build_fourier_basis(dim, grid)
    else:
        basis_system, _ = build_eigenbasis(curves, var_threshold)
    inputs[io.CURVES_FILE] = curves_file
    return project_scores(curves, basis_system), y, inputs


def _penalty_options(func):
    func = click.option("--penalty", type=click.Choice(["tlasso", "mcp", "scad"]),
                        default="mcp", show_default=True, help="Concave penalty kind.")(func)
    func = click.option("--gamma", type=float, default=2.1, show_default=True,
                        help="Penalty concavity parameter.")(func)
    func = click.option("--theta", type=float, default=1.0, show_default=True,
                        help="Augmented-Lagrangian weight.")(func)
    return func


def _basis_options(func):
    func = click.option("--basis", type=click.Choice(["fourier", "eigen"]), default="fourier",
                        show_default=True, help="Basis used when projecting raw curves.")(func)
    func = click.option("--dim", type=int, default=None,
                        help="Fourier basis dimension (required with --basis fourier on curves).")(func)
    func = click.option("--var-threshold", type=float, default=0.9, show_default=True,
                        help="Cumulative-variance cutoff for the eigenbasis.")(func)
    return func


def _solver_options(func):
    func = click.option("--max-iter", type=int, default=2000, show_default=True)(func)
    func = click.option("--tol-primal", type=float, default=1e-6, show_default=True)(func)
    func = click.option("--tol-change", type=float, default=1e-6, show_default=True)(func)
    return func


@click.group()
@click.version_option()
def main():
    """Grouped multiple functional regression toolkit."""


@main.command()
@click.option("--n", "n_samples", type=int, default=300, show_default=True, help="Sample size.")
@click.option("--s", "noise_sd", type=float, default=1.0, show_default=True,
              help="Noise standard deviation.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=int, default=5, show_default=True, help="Basis dimension D.")
@click.option("--grid-points", type=int, default=201, show_default=True)
@click.option("--groups", type=str, default=None,
              help='Partition like "1,2,3;4,5,6,7;8,9,10" (default: the 10-covariate setup).')
@click.option("--templates", type=str, default=None,
              help="Comma-separated template kinds, one per group.")
@click.option("--scales", type=str, default=None,
              help="Comma-separated scale coefficients, one per covariate.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: $GFREG_OUTDIR or '.').")
def simulate(n_samples, noise_sd, seed, dim, grid_points, groups, templates, scales, out):
    """Generate a synthetic dataset and write curves, scores, responses, truth."""
    with _exit_codes():
        kwargs = dict(n_samples=n_samples, noise_sd=noise_sd, seed=seed, n_basis=dim,
                      grid_points=grid_points)
        if groups is not None:
            grouping = _parse_groups(groups)
            kwargs["groups"] = grouping
            kwargs["n_covariates"] = grouping.n_covariates
            if templates is None:
                raise InvalidInputError("--templates is required with custom --groups")
        if templates is not None:
            kwargs["templates"] = tuple(t.strip() for t in templates.split(","))
        if scales is not None:
            kwargs["scales"] = _parse_floats(scales, "--scales")
        elif kwargs.get("n_covariates", 10) != 10:
            raise InvalidInputError("--scales is required when the covariate count is not 10")
        config = SimConfig(**kwargs)
        data = gen_dataset(config)

        outdir = _resolve_outdir(out)
        io.write_curves_csv(outdir / io.CURVES_FILE, data.curves)
        io.write_scores_csv(outdir / io.SCORES_FILE, data.scores)
        io.write_responses_csv(outdir / io.RESPONSES_FILE, data.responses)
        io.write_partition(outdir / io.TRUTH_FILE, data.truth)
        manifest = io.build_manifest(
            "simulate",
            {
                "n_samples": n_samples, "noise_sd": noise_sd, "n_basis": dim,
                "grid_points": grid_points,
                "groups": io.grouping_to_lists(data.truth),
                "templates": list(data.config.templates),
                "scales": list(data.config.scales),
                "rng": data.rng,
            },
            seed, {},
        )
        io.dump_json({"schema_version": io.SCHEMA_VERSION, "format": "dataset-manifest",
                      "manifest": manifest}, outdir / io.MANIFEST_FILE)
        click.echo(f"wrote dataset ({n_samples} samples) to {outdir}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory with scores.csv (or curves.csv) and responses.csv.")
@_penalty_options
@click.option("--lambda-grid", "lambda_grid", type=str,
              default=",".join(str(v) for v in DEFAULT_LAMBDA_GRID), show_default=True,
              help="Comma-separated ascending penalty strengths.")
@click.option("--threshold", type=float, default=0.2, show_default=True,
              help="Grouping cutoff on normalized misalignments.")
@_solver_options
@click.option("--no-warm-start", is_flag=True, default=False,
              help="Solve each grid point from the configured initializer.")
@_basis_options
@click.option("--out", type=click.Path(file_okay=False), default=None)
def detect(data_dir, penalty, gamma, theta, lambda_grid, threshold, max_iter,
           tol_primal, tol_change, no_warm_start, basis, dim, var_threshold, out):
    """Solve the penalty path and write the grouping path to path.json."""
    with _exit_codes():
        grid = _parse_floats(lambda_grid, "--lambda-grid")
        config = DetectConfig(
            penalty=PenaltySpec(kind=penalty, lam=float(grid[0]), gamma=gamma),
            theta=theta, threshold=threshold, max_iter=max_iter,
            tol_primal=tol_primal, tol_change=tol_change,
        )
        scores, y, inputs = _load_data(data_dir, basis, dim, var_threshold)
        result = detect_path(scores, y, grid, config, warm_start=not no_warm_start)
        if not result.entries:
            messages = "; ".join(f.message for f in result.failures)
            raise SolverFailureError(f"every penalty grid point failed: {messages}")
        payload = io.path_payload(result)
        payload["manifest"] = io.build_manifest(
            "detect",
            {"penalty": penalty, "gamma": gamma, "theta": theta,
             "lambda_grid": list(grid), "threshold": threshold, "max_iter": max_iter,
             "tol_primal": tol_primal, "tol_change": tol_change,
             "warm_start": not no_warm_start},
            None, inputs,
        )
        outdir = _resolve_outdir(out)
        io.dump_json(payload, outdir / "path.json")
        click.echo(f"wrote {len(result.entries)} path entries to {outdir / 'path.json'}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--partition", "partition_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Partition file (one group per line, 1-based indices).")
@click.option("--groups", type=str, default=None, help='Inline partition like "1,2,3;4,5".')
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@_basis_options
@click.option("--out", type=click.Path(file_okay=False), default=None)
def fit(data_dir, partition_file, groups, max_iter, tol, basis, dim, var_threshold, out):
    """Fit the grouped model for a fixed partition; write model.json, fitted.csv."""
    with _exit_codes():
        if (partition_file is None) == (groups is None):
            raise InvalidInputError("provide exactly one of --partition or --groups")
        scores, y, inputs = _load_data(data_dir, basis, dim, var_threshold)
        if partition_file is not None:
            delta = io.read_partition(partition_file)
            inputs["partition"] = Path(partition_file)
        else:
            delta = _parse_groups(groups)
        if delta.n_covariates != scores.n_covariates:
            raise InvalidInputError(
                f"partition covers {delta.n_covariates} covariates, data has {scores.n_covariates}"
            )
        model = fit_grouped(scores, y, delta, max_iter=max_iter, tol=tol)
        fitted = predict(model, scores)

        payload = io.model_payload(model)
        payload["manifest"] = io.build_manifest(
            "fit", {"partition": io.grouping_to_lists(delta), "max_iter": max_iter, "tol": tol},
            None, inputs,
        )
        outdir = _resolve_outdir(out)
        io.dump_json(payload, outdir / "model.json")
        io.write_responses_csv(outdir / "fitted.csv", fitted)
        click.echo(f"wrote model.json and fitted.csv to {outdir}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@_penalty_options
@click.option("--lambda-grid", "lambda_grid", type=str,
              default=",".join(str(v) for v in DEFAULT_LAMBDA_GRID), show_default=True)
@click.option("--threshold-grid", "threshold_grid", type=str,
              default=",".join(str(v) for v in DEFAULT_THRESHOLD_GRID), show_default=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--train-fraction", type=float, default=2.0 / 3.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel workers for candidate scoring (never changes results).")
@_solver_options
@_basis_options
@click.option("--out", type=click.Path(file_okay=False), default=None)
def cv(data_dir, penalty, gamma, theta, lambda_grid, threshold_grid, reps, train_fraction,
       seed, jobs, max_iter, tol_primal, tol_change, basis, dim, var_threshold, out):
    """Tune (lambda, threshold) by MCCV and write cv_report.json."""
    with _exit_codes():
        grid = _parse_floats(lambda_grid, "--lambda-grid")
        thresholds = _parse_floats(threshold_grid, "--threshold-grid")
        cvconfig = CVConfig(reps=reps, train_fraction=train_fraction, seed=seed,
                            lambda_grid=grid, threshold_grid=thresholds)
        detect_config = DetectConfig(
            penalty=PenaltySpec(kind=penalty, lam=float(grid[0]), gamma=gamma),
            theta=theta, max_iter=max_iter, tol_primal=tol_primal, tol_change=tol_change,
        )
        scores, y, inputs = _load_data(data_dir, basis, dim, var_threshold)
        report = select_model(scores, y, cvconfig, detect_config, jobs=jobs)

        payload = io.cv_report_payload(report)
        payload["manifest"] = io.build_manifest(
            "cv",
            {"penalty": penalty, "gamma": gamma, "theta": theta,
             "lambda_grid": list(grid), "threshold_grid": list(thresholds),
             "reps": reps, "train_fraction": train_fraction, "jobs": jobs},
            seed, inputs,
        )
        outdir = _resolve_outdir(out)
        io.dump_json(payload, outdir / "cv_report.json")
        sel = report.selected
        click.echo(
            f"selected partition with {sel.grouping.n_groups} groups "
            f"(lambda={sel.lam:g}, threshold={sel.threshold:g}, mean RMSE={sel.mean_rmse:.6g})"
        )


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--truth", "truth_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="True partition file; enables the oracle method.")
@click.option("--oracle", "want_oracle", is_flag=True, default=False,
              help="Require the oracle method (errors without --truth).")
@click.option("--partition", "partition_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Use this partition as the detected one (skips tuning).")
@_penalty_options
@click.option("--lambda-grid", "lambda_grid", type=str,
              default=",".join(str(v) for v in DEFAULT_LAMBDA_GRID), show_default=True)
@click.option("--threshold-grid", "threshold_grid", type=str,
              default=",".join(str(v) for v in DEFAULT_THRESHOLD_GRID), show_default=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--train-fraction", type=float, default=2.0 / 3.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@_basis_options
@click.option("--out", type=click.Path(file_okay=False), default=None)
def baselines(data_dir, truth_file, want_oracle, partition_file, penalty, gamma, theta,
              lambda_grid, threshold_grid, reps, train_fraction, seed, jobs,
              basis, dim, var_threshold, out):
    """Compare ordinary/matrix/grouped (and oracle) by MCCV; write baselines.json."""
    with _exit_codes():
        if want_oracle and truth_file is None:
            raise InvalidInputError("--oracle requires --truth")
        scores, y, inputs = _load_data(data_dir, basis, dim, var_threshold)
        cvconfig = CVConfig(reps=reps, train_fraction=train_fraction, seed=seed,
                            lambda_grid=_parse_floats(lambda_grid, "--lambda-grid"),
                            threshold_grid=_parse_floats(threshold_grid, "--threshold-grid"))

        if partition_file is not None:
            grouped = io.read_partition(partition_file)
            inputs["partition"] = Path(partition_file)
            selection = None
        else:
            detect_config = DetectConfig(
                penalty=PenaltySpec(kind=penalty, lam=0.0, gamma=gamma), theta=theta)
            selection = select_model(scores, y, cvconfig, detect_config, jobs=jobs)
            grouped = selection.selected.grouping

        oracle = None
        if truth_file is not None:
            oracle = io.read_partition(truth_file)
            inputs["truth"] = Path(truth_file)

        results = baseline_comparison(scores, y, grouped, cvconfig, oracle=oracle)
        payload = {
            "schema_version": io.SCHEMA_VERSION,
            "format": "baseline-comparison",
            "grouped_partition": io.grouping_to_lists(grouped),
            "methods": {
                name: {"mean_rmse": mean, "rmses": rmses.tolist()}
                for name, (mean, rmses) in results.items()
            },
            "manifest": io.build_manifest(
                "baselines",
                {"penalty": penalty, "gamma": gamma, "theta": theta, "reps": reps,
                 "train_fraction": train_fraction, "jobs": jobs,
                 "selected_by_cv": partition_file is None},
                seed, inputs,
            ),
        }
        if oracle is not None:
            payload["oracle_partition"] = io.grouping_to_lists(oracle)
        outdir = _resolve_outdir(out)
        io.dump_json(payload, outdir / "baselines.json")
        summary = ", ".join(f"{name}={mean:.6g}" for name, (mean, _) in results.items())
        click.echo(f"mean RMSE: {summary}")


if __name__ == "__main__":
    main()
