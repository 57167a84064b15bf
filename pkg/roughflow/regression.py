#!/usr/bin/env python3
"""Small regression helpers shared by the diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats

# Values at or below this are treated as exact zeros and left out of log fits
LOG_FLOOR = 1e-13


@dataclass(frozen=True)
class LineFit:
    """Least-squares line y = slope * x + intercept."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int

    def summary(self) -> dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
        }


def fit_line(x: Any, y: Any) -> LineFit:
    """linregress wrapper returning nan fields when fewer than two usable points exist."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    mask = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[mask], ys[mask]
    if xs.size < 2 or np.ptp(xs) == 0.0:
        return LineFit(math.nan, math.nan, math.nan, int(xs.size))
    result = stats.linregress(xs, ys)
    # linregress returns numpy scalars; keep plain floats in reports
    return LineFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue) ** 2,
        n_points=int(xs.size),
    )


def fit_loglog(x: Any, y: Any, floor: float = LOG_FLOOR) -> LineFit:
    """Fit log y against log x over the points with y above ``floor``."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    keep = (ys > floor) & (xs > 0)
    return fit_line(np.log(xs[keep]), np.log(ys[keep]))


def fit_geometric_rate(levels: Any, values: Any, floor: float = LOG_FLOOR) -> tuple[float, LineFit]:
    """Fit values ~ C * rate**level; returns (rate, fit of log2 values)."""
    ns = np.asarray(levels, dtype=float)
    vs = np.asarray(values, dtype=float)
    keep = vs > floor
    fit = fit_line(ns[keep], np.log2(vs[keep]))
    rate = 2.0**fit.slope if math.isfinite(fit.slope) else math.nan
    return rate, fit
