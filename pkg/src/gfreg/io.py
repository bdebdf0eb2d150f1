"""File formats: long-form CSVs, partition files, JSON results, manifests.

All numeric emission round-trips at full precision: CSV floats use 17
significant digits and JSON floats use Python's shortest round-trip
representation, so parse(emit(x)) == x exactly.  CSV layouts are long-form
and order-independent; sample, covariate, and basis ids are 1-based in
files and converted to 0-based indices in memory.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .detect import GroupingStructure, PathResult, misalignment_matrix
from .exceptions import InvalidInputError
from .fit import GroupedModel
from .funcdata import CurveSet, ScoreMatrix
from .select import CVReport

SCHEMA_VERSION = 1

CURVES_FILE = "curves.csv"
SCORES_FILE = "scores.csv"
RESPONSES_FILE = "responses.csv"
TRUTH_FILE = "truth.txt"
MANIFEST_FILE = "manifest.json"


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dump_json(obj: dict, path: Path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(command: str, config: dict, seed: int | None,
                   inputs: dict[str, str | Path]) -> dict:
    """Run provenance attached to (or written beside) every output file."""
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "artifact_version": __version__,
        "input_checksums": {name: sha256_file(Path(p)) for name, p in inputs.items()},
    }


# ---------------------------------------------------------------------------
# CSV readers/writers
# ---------------------------------------------------------------------------

def _open_rows(path: Path, expected_header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        if header != expected_header:
            raise InvalidInputError(
                f"{path}: line 1: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise InvalidInputError(
                    f"{path}: line {lineno}: expected {len(expected_header)} fields, got {len(row)}"
                )
            yield lineno, row


def _parse_int(path, lineno, text, what) -> int:
    try:
        return int(text)
    except ValueError:
        raise InvalidInputError(f"{path}: line {lineno}: bad {what} {text!r}") from None


def _parse_float(path, lineno, text, what) -> float:
    try:
        return float(text)
    except ValueError:
        raise InvalidInputError(f"{path}: line {lineno}: bad {what} {text!r}") from None


def write_curves_csv(path: Path, curves: CurveSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "covariate_id", "t", "value"])
        n, p, t = curves.values.shape
        grid_text = [format_float(v) for v in curves.grid]
        for i in range(n):
            for j in range(p):
                row_vals = curves.values[i, j]
                for k in range(t):
                    writer.writerow([i + 1, j + 1, grid_text[k], format_float(row_vals[k])])


def read_curves_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a long-form curves file; returns (grid, values[N, p, T])."""
    cells: dict[tuple[int, int, float], float] = {}
    samples: set[int] = set()
    covariates: set[int] = set()
    grid_vals: set[float] = set()
    for lineno, row in _open_rows(Path(path), ["sample_id", "covariate_id", "t", "value"]):
        i = _parse_int(path, lineno, row[0], "sample_id")
        j = _parse_int(path, lineno, row[1], "covariate_id")
        t = _parse_float(path, lineno, row[2], "t")
        v = _parse_float(path, lineno, row[3], "value")
        key = (i, j, t)
        if key in cells:
            raise InvalidInputError(f"{path}: line {lineno}: duplicate entry for {key}")
        cells[key] = v
        samples.add(i)
        covariates.add(j)
        grid_vals.add(t)
    return _assemble_grid_table(path, cells, samples, covariates, sorted(grid_vals))


def _assemble_grid_table(path, cells, samples, covariates, axis_vals):
    if not cells:
        raise InvalidInputError(f"{path}: no data rows")
    n, p, t = len(samples), len(covariates), len(axis_vals)
    if sorted(samples) != list(range(1, n + 1)):
        raise InvalidInputError(f"{path}: sample ids must be 1..N without gaps")
    if sorted(covariates) != list(range(1, p + 1)):
        raise InvalidInputError(f"{path}: covariate ids must be 1..p without gaps")
    if len(cells) != n * p * t:
        raise InvalidInputError(f"{path}: incomplete table ({len(cells)} of {n * p * t} cells)")
    axis_index = {v: k for k, v in enumerate(axis_vals)}
    values = np.empty((n, p, t))
    for (i, j, tv), v in cells.items():
        values[i - 1, j - 1, axis_index[tv]] = v
    return np.asarray(axis_vals, dtype=float), values


def write_scores_csv(path: Path, scores: ScoreMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "covariate_id", "d", "score"])
        n, p, d = scores.scores.shape
        for i in range(n):
            for j in range(p):
                for k in range(d):
                    writer.writerow([i + 1, j + 1, k + 1, format_float(scores.scores[i, j, k])])


def read_scores_csv(path: Path) -> np.ndarray:
    cells: dict[tuple[int, int, int], float] = {}
    samples: set[int] = set()
    covariates: set[int] = set()
    dims: set[int] = set()
    for lineno, row in _open_rows(Path(path), ["sample_id", "covariate_id", "d", "score"]):
        i = _parse_int(path, lineno, row[0], "sample_id")
        j = _parse_int(path, lineno, row[1], "covariate_id")
        d = _parse_int(path, lineno, row[2], "d")
        v = _parse_float(path, lineno, row[3], "score")
        key = (i, j, d)
        if key in cells:
            raise InvalidInputError(f"{path}: line {lineno}: duplicate entry for {key}")
        cells[key] = v
        samples.add(i)
        covariates.add(j)
        dims.add(d)
    if not cells:
        raise InvalidInputError(f"{path}: no data rows")
    n, p, dd = len(samples), len(covariates), len(dims)
    if sorted(samples) != list(range(1, n + 1)) or sorted(covariates) != list(range(1, p + 1)) \
            or sorted(dims) != list(range(1, dd + 1)):
        raise InvalidInputError(f"{path}: ids must be contiguous and 1-based")
    if len(cells) != n * p * dd:
        raise InvalidInputError(f"{path}: incomplete table ({len(cells)} of {n * p * dd} cells)")
    out = np.empty((n, p, dd))
    for (i, j, d), v in cells.items():
        out[i - 1, j - 1, d - 1] = v
    return out


def write_responses_csv(path: Path, y: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "y"])
        for i, v in enumerate(np.asarray(y, dtype=float)):
            writer.writerow([i + 1, format_float(v)])


def read_responses_csv(path: Path) -> np.ndarray:
    vals: dict[int, float] = {}
    for lineno, row in _open_rows(Path(path), ["sample_id", "y"]):
        i = _parse_int(path, lineno, row[0], "sample_id")
        if i in vals:
            raise InvalidInputError(f"{path}: line {lineno}: duplicate sample id {i}")
        vals[i] = _parse_float(path, lineno, row[1], "y")
    if not vals or sorted(vals) != list(range(1, len(vals) + 1)):
        raise InvalidInputError(f"{path}: sample ids must be 1..N without gaps")
    return np.array([vals[i] for i in range(1, len(vals) + 1)])


# ---------------------------------------------------------------------------
# Partition files
# ---------------------------------------------------------------------------

def write_partition(path: Path, grouping: GroupingStructure) -> None:
    """One line per group: comma-separated 1-based covariate indices."""
    lines = [",".join(str(i + 1) for i in block) for block in grouping.blocks]
    Path(path).write_text("\n".join(lines) + "\n")


def read_partition(path: Path) -> GroupingStructure:
    blocks = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            members = [int(tok) - 1 for tok in line.split(",")]
        except ValueError:
            raise InvalidInputError(f"{path}: line {lineno}: bad covariate index") from None
        if any(m < 0 for m in members):
            raise InvalidInputError(f"{path}: line {lineno}: covariate indices are 1-based")
        blocks.append(tuple(members))
    if not blocks:
        raise InvalidInputError(f"{path}: no groups found")
    return GroupingStructure(tuple(blocks))


def grouping_to_lists(grouping: GroupingStructure) -> list[list[int]]:
    """1-based block lists for JSON output."""
    return [[i + 1 for i in block] for block in grouping.blocks]


def grouping_from_lists(blocks) -> GroupingStructure:
    return GroupingStructure(tuple(tuple(i - 1 for i in block) for block in blocks))


# ---------------------------------------------------------------------------
# Result documents (manifest-free payloads; the CLI attaches manifests)
# ---------------------------------------------------------------------------

def path_payload(path_result: PathResult) -> dict:
    entries = []
    for e in path_result.entries:
        entries.append({
            "lambda": e.lam,
            "partition": grouping_to_lists(e.grouping),
            "n_groups": e.grouping.n_groups,
            "coefficients": e.coefficients.tolist(),
            "normalized_misalignment": misalignment_matrix(e.coefficients).tolist(),
            "iterations": e.state.iterations,
            "primal_residual": e.state.primal_residual,
            "change": e.state.change,
            "converged": e.state.converged,
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "format": "grouping-path",
        "entries": entries,
        "failures": [{"lambda": f.lam, "message": f.message} for f in path_result.failures],
    }


def model_payload(model: GroupedModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "format": "grouped-model",
        "partition": grouping_to_lists(model.delta),
        "beta0": model.beta0,
        "f": model.f.tolist(),
        "alpha": model.A.tolist(),
        "c": model.c.tolist(),
        "converged": model.converged,
        "objective_trace": list(model.objective_trace),
        "metadata": dict(model.metadata),
    }


def cv_report_payload(report: CVReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "format": "cv-report",
        "config": {
            "reps": report.cvconfig.reps,
            "train_fraction": report.cvconfig.train_fraction,
            "seed": report.cvconfig.seed,
            "lambda_grid": list(report.cvconfig.lambda_grid),
            "threshold_grid": list(report.cvconfig.threshold_grid),
        },
        "candidates": [
            {
                "lambda": c.lam,
                "threshold": c.threshold,
                "partition": grouping_to_lists(c.grouping),
                "n_groups": c.grouping.n_groups,
                "mean_rmse": c.mean_rmse,
                "rmse_std": c.rmse_std,
                "rmses": list(c.rmses),
                "n_skipped": c.n_skipped,
            }
            for c in report.candidates
        ],
        "selected_index": report.selected_index,
        "failures": list(report.failures),
    }


def serialize_cv_report(report: CVReport) -> str:
    """Canonical JSON text of a report (no manifest, hence fully deterministic)."""
    return json.dumps(cv_report_payload(report), sort_keys=True, indent=2, default=_json_default)
