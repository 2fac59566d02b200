"""Ordinary least-squares line fits used for decay-rate estimates."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Tuple


class DegenerateFitError(ValueError):
    """Too few points, or all abscissae equal."""


@dataclass(frozen=True)
class FitReport:
    slope: float
    intercept: float
    r_squared: float
    points_used: int
    model: str = "linear"


def fit_line(points: Iterable[Tuple[float, float]], model: str = "linear") -> FitReport:
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise DegenerateFitError(f"need at least 3 points, got {len(pts)}")
    xs, ys = zip(*pts)
    try:
        slope, intercept = statistics.linear_regression(xs, ys)
    except statistics.StatisticsError as exc:
        raise DegenerateFitError(str(exc)) from exc
    ybar = statistics.fmean(ys)
    ss_tot = sum((y - ybar) ** 2 for y in ys)
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in pts)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return FitReport(slope, intercept, r2, len(pts), model)
