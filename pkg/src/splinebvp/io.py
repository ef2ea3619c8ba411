"""CSV and JSON writers. Floats are written with 17 significant digits so
reruns can be compared byte for byte."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .spline import KnotGrid, PiecewisePolynomial, evaluate

TABLE_COLUMNS = (
    "problem",
    "degree",
    "knots",
    "variant",
    "seed",
    "residual_l2",
    "err_l2_pct",
    "err_h1_pct",
    "err_h2_pct",
)


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if value is None else str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def spline_samples(spline: PiecewisePolynomial, count: int = 400):
    """Header and rows ``x, s0 .. sq`` at ``count`` uniform points."""
    if count < 2:
        raise ValueError("need at least two samples")
    x = np.linspace(spline.grid.a, spline.grid.b, count)
    cols = [evaluate(spline, x, r) for r in range(spline.degree + 1)]
    header = ("x",) + tuple(f"s{r}" for r in range(spline.degree + 1))
    return header, list(zip(x, *cols))


def write_spline_samples(path, spline, count=400) -> Path:
    header, rows = spline_samples(spline, count)
    return write_csv(path, header, rows)


def write_residual_profile(path, points, residuals) -> Path:
    return write_csv(path, ("xi", "residual"), zip(points, residuals))


def write_trace(path, traces) -> Path:
    """Loss history; iteration numbers run on across strategy stages."""
    rows, offset = [], 0
    for k, trace in enumerate(traces):
        for r in trace.records:
            if k and r.iter == 0:
                continue
            rows.append((offset + r.iter, r.loss, r.grad_norm))
        offset += trace.iterations
    return write_csv(path, ("iter", "loss", "grad_norm"), rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def solution_record(solution, **extra) -> dict:
    """Everything needed to rebuild the spline of a solution."""
    rec = {
        "knots": solution.knots_used.knots,
        "coeffs": solution.spline.coeffs,
        "degree": solution.spline.degree,
        "y_star": solution.y_star,
        "alpha": solution.alpha.values,
        "seed": solution.seed,
        "status": solution.status,
        "loss": solution.loss,
    }
    rec.update(extra)
    return rec


def load_spline(path) -> PiecewisePolynomial:
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    try:
        grid = KnotGrid(np.asarray(rec["knots"], dtype=float))
        coeffs = np.asarray(rec["coeffs"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"{path}: not a solution file (missing {exc})") from None
    return PiecewisePolynomial(grid, coeffs)
