#!/usr/bin/env python3
"""Rough drivers on a time grid.

A driver stores one group-like signature per grid cell. Signatures over grid
pairs come from Chen products of cells; queries between grid nodes scale the
cell's log-signature by the time fraction and re-exponentiate, which is exact
for canonical lifts of piecewise-linear paths and for pure-area drivers.

Also here: the grid Hölder norm, the p-variation control table built by
dynamic programming, and the greedy accumulation count N_beta.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .errors import DimensionMismatchError, InvalidGridError
from .tensor_algebra import TruncatedTensorSeries, tensor_exp, tensor_log, tensor_mul

logger = logging.getLogger(__name__)

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args: Any, **kwargs: Any) -> Any:
        """Stand-in decorator that leaves the function uncompiled."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


# Slack on the control threshold: w >= beta - ACCUMULATION_TOLERANCE counts as reaching beta
ACCUMULATION_TOLERANCE = 1e-12
# Chen consistency tolerance quoted by drivers
CHEN_TOLERANCE = 1e-10

LOG_LINEAR = "log_linear"


# =============================================================================
# DRIVER
# =============================================================================

class RoughDriver:
    """Segment-signature oracle over a strictly increasing time grid."""

    def __init__(
        self,
        width: int,
        p: float,
        times: Sequence[float],
        segments: Sequence[TruncatedTensorSeries],
        interpolation: str = LOG_LINEAR,
    ):
        if p <= 1.0:
            msg = f"Roughness p must exceed 1, got {p}"
            raise InvalidGridError(msg)
        grid = np.asarray(times, dtype=float).reshape(-1)
        if grid.size < 2:
            msg = f"A driver needs at least two grid times, got {grid.size}"
            raise InvalidGridError(msg)
        if not np.all(np.diff(grid) > 0):
            msg = "Driver grid times must be strictly increasing"
            raise InvalidGridError(msg)
        if len(segments) != grid.size - 1:
            msg = f"Expected {grid.size - 1} segment signatures, got {len(segments)}"
            raise InvalidGridError(msg)
        depth = int(math.floor(p))
        for seg in segments:
            if seg.width != width:
                raise DimensionMismatchError("segment width", seg.width, width)
            if seg.depth != depth:
                raise DimensionMismatchError("segment depth", seg.depth, depth)
        if interpolation != LOG_LINEAR:
            msg = f"Unknown interpolation rule {interpolation!r}"
            raise InvalidGridError(msg)
        grid.setflags(write=False)
        self.width = int(width)
        self.p = float(p)
        self.depth = depth
        self.times = grid
        self.segments: tuple[TruncatedTensorSeries, ...] = tuple(segments)
        self.interpolation = interpolation

    # -- basic facts ----------------------------------------------------------

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def n_cells(self) -> int:
        return len(self.segments)

    @cached_property
    def segment_logs(self) -> tuple[TruncatedTensorSeries, ...]:
        return tuple(tensor_log(seg) for seg in self.segments)

    def increments(self) -> np.ndarray:
        """Level-1 increment of every cell, shape (cells, width)."""
        return np.array([seg.levels[1] for seg in self.segments])

    # -- signatures -----------------------------------------------------------

    def grid_signature(self, i: int, j: int) -> TruncatedTensorSeries:
        """Signature over [t_i, t_j] as the Chen product of cells i..j-1."""
        if not 0 <= i <= j < self.times.size:
            msg = f"Grid indices ({i}, {j}) outside 0..{self.times.size - 1}"
            raise InvalidGridError(msg)
        result = TruncatedTensorSeries.unit(self.width, self.depth)
        for k in range(i, j):
            result = tensor_mul(result, self.segments[k])
        return result

    def _cell_piece(self, k: int, a: float, b: float) -> TruncatedTensorSeries:
        left, right = self.times[k], self.times[k + 1]
        if a <= left and b >= right:
            return self.segments[k]
        fraction = (b - a) / (right - left)
        return tensor_exp(self.segment_logs[k].scale(fraction))

    def signature(self, s: float, t: float) -> TruncatedTensorSeries:
        """Signature over [s, t] for any s <= t inside the horizon."""
        if s > t:
            msg = f"signature needs s <= t, got s={s}, t={t}"
            raise InvalidGridError(msg)
        eps = 1e-12 * max(1.0, abs(self.end))
        if s < self.start - eps or t > self.end + eps:
            msg = f"[{s}, {t}] is outside the driver horizon [{self.start}, {self.end}]"
            raise InvalidGridError(msg)
        if t == s:
            return TruncatedTensorSeries.unit(self.width, self.depth)
        first = max(int(np.searchsorted(self.times, s, side="right")) - 1, 0)
        last = min(int(np.searchsorted(self.times, t, side="left")) - 1, self.n_cells - 1)
        last = max(last, first)
        result = TruncatedTensorSeries.unit(self.width, self.depth)
        for k in range(first, last + 1):
            a = max(s, float(self.times[k]))
            b = min(t, float(self.times[k + 1]))
            if b > a:
                result = tensor_mul(result, self._cell_piece(k, a, b))
        return result

    def log_signature(self, s: float, t: float) -> TruncatedTensorSeries:
        return tensor_log(self.signature(s, t))

    def restrict(self, s: float, t: float) -> RoughDriver:
        """Driver on [s, t] whose grid is {s}, the grid nodes inside, and {t}."""
        if not s < t:
            msg = f"restrict needs s < t, got s={s}, t={t}"
            raise InvalidGridError(msg)
        inner = [float(u) for u in self.times if s < u < t]
        grid = [s, *inner, t]
        segments = [self.signature(a, b) for a, b in zip(grid[:-1], grid[1:], strict=True)]
        return RoughDriver(self.width, self.p, grid, segments, self.interpolation)

    def chen_defect(self, i: int, j: int, k: int) -> float:
        """|X_{t_i t_j} X_{t_j t_k} - X_{t_i t_k}| in max norm."""
        joined = tensor_mul(self.grid_signature(i, j), self.grid_signature(j, k))
        return joined.max_abs_diff(self.grid_signature(i, k))

    # -- norms ----------------------------------------------------------------

    @cached_property
    def level_norm_table(self) -> np.ndarray:
        """Euclidean level norms |X^m_{t_i t_j}|, shape (depth, M+1, M+1)."""
        size = self.times.size
        table = np.zeros((self.depth, size, size))
        for i in range(size):
            running = TruncatedTensorSeries.unit(self.width, self.depth)
            for j in range(i + 1, size):
                running = tensor_mul(running, self.segments[j - 1])
                for m in range(1, self.depth + 1):
                    table[m - 1, i, j] = running.level_norm(m)
        table.setflags(write=False)
        return table

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "width": self.width,
            "p": self.p,
            "times": self.times.tolist(),
            "segments": [seg.to_dict() for seg in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RoughDriver:
        segments = [TruncatedTensorSeries.from_dict(seg) for seg in data["segments"]]
        return cls(int(data["width"]), float(data["p"]), data["times"], segments)

    def __repr__(self) -> str:
        return (
            f"RoughDriver(width={self.width}, p={self.p}, cells={self.n_cells}, "
            f"horizon=[{self.start:g}, {self.end:g}])"
        )


def save_driver(driver: RoughDriver, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(driver.to_dict(), indent=2, sort_keys=True) + "\n")
    logger.info("Wrote driver with %d cells to %s", driver.n_cells, path)
    return path


def load_driver(path: str | Path) -> RoughDriver:
    return RoughDriver.from_dict(json.loads(Path(path).read_text()))


# =============================================================================
# CONSTRUCTORS
# =============================================================================

def signature_lift(
    points: Sequence[Sequence[float]] | np.ndarray,
    times: Sequence[float],
    depth: int,
    p: float | None = None,
) -> RoughDriver:
    """Canonical lift of the piecewise-linear path through ``points``."""
    values = np.asarray(points, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    grid = np.asarray(times, dtype=float).reshape(-1)
    if values.shape[0] < 2:
        msg = f"signature_lift needs at least two points, got {values.shape[0]}"
        raise InvalidGridError(msg)
    if values.shape[0] != grid.size:
        msg = f"{values.shape[0]} points but {grid.size} times"
        raise InvalidGridError(msg)
    if p is None:
        p = depth + 0.5
    if int(math.floor(p)) != depth:
        raise DimensionMismatchError("floor(p) vs depth", int(math.floor(p)), depth)
    segments = [
        TruncatedTensorSeries.from_increment(inc, depth) for inc in np.diff(values, axis=0)
    ]
    return RoughDriver(values.shape[1], p, grid, segments)


def pure_area_driver(
    horizon: float,
    grid: int,
    coeff_matrix: Sequence[Sequence[float]] | np.ndarray,
    p: float = 2.5,
) -> RoughDriver:
    """Driver X_{st} = 1 + (t-s) C with no level-1 part."""
    if grid < 1:
        msg = f"pure_area_driver needs grid >= 1, got {grid}"
        raise InvalidGridError(msg)
    coeffs = np.asarray(coeff_matrix, dtype=float)
    if coeffs.ndim != 2 or coeffs.shape[0] != coeffs.shape[1]:
        raise DimensionMismatchError("area matrix shape", coeffs.shape, "square")
    depth = int(math.floor(p))
    if depth < 2:
        raise DimensionMismatchError("depth for an area driver", depth, ">= 2")
    width = coeffs.shape[0]
    times = np.linspace(0.0, horizon, grid + 1)
    segments = []
    for h in np.diff(times):
        levels = [np.ones(1), np.zeros(width), h * coeffs.ravel()]
        levels += [np.zeros(width**k) for k in range(3, depth + 1)]
        segments.append(TruncatedTensorSeries(width, depth, levels))
    return RoughDriver(width, p, times, segments)


# =============================================================================
# HOLDER NORM AND CONTROL
# =============================================================================

def holder_norm(driver: RoughDriver) -> float:
    """max over grid pairs and levels of |X^i|^(1/i) / |t-s|^(1/p)."""
    table = driver.level_norm_table
    size = driver.times.size
    gaps = driver.times[None, :] - driver.times[:, None]
    upper = np.triu(np.ones((size, size), dtype=bool), k=1)
    best = 0.0
    for m in range(1, driver.depth + 1):
        ratios = table[m - 1][upper] ** (1.0 / m) / gaps[upper] ** (1.0 / driver.p)
        best = max(best, float(ratios.max(initial=0.0)))
    return best


@njit(cache=True)
def _pvar_dynamic_program(weights: np.ndarray) -> np.ndarray:
    """best[i, j] = max over grid partitions of [i, j] of summed interval weights."""
    size = weights.shape[0]
    best = np.zeros((size, size))
    for i in range(size):
        for j in range(i + 1, size):
            top = 0.0
            for k in range(i, j):
                candidate = best[i, k] + weights[k, j]
                if candidate > top:
                    top = candidate
            best[i, j] = top
    return best


@dataclass(frozen=True)
class ControlTable:
    """Grid-restricted p-variation control w(i, j), i <= j."""

    times: np.ndarray
    values: np.ndarray

    def w(self, i: int, j: int) -> float:
        return float(self.values[i, j])

    @property
    def size(self) -> int:
        return int(self.times.size)

    @classmethod
    def from_function(
        cls, times: Sequence[float], fn: Callable[[float, float], float],
    ) -> ControlTable:
        """Tabulate a synthetic control fn(s, t) on the grid."""
        grid = np.asarray(times, dtype=float)
        values = np.zeros((grid.size, grid.size))
        for i in range(grid.size):
            for j in range(i + 1, grid.size):
                values[i, j] = fn(float(grid[i]), float(grid[j]))
        return cls(grid, values)

    def superadditivity_defect(self) -> float:
        """max over i <= j <= k of w(i,j) + w(j,k) - w(i,k)."""
        vals = self.values
        worst = 0.0
        for j in range(self.size):
            combined = vals[: j + 1, j][:, None] + vals[j, j:][None, :]
            worst = max(worst, float(np.max(combined - vals[: j + 1, j:])))
        return worst

    def to_frame(self) -> pd.DataFrame:
        i_idx, j_idx = np.triu_indices(self.size)
        return pd.DataFrame(
            {
                "i": i_idx,
                "j": j_idx,
                "t_i": self.times[i_idx],
                "t_j": self.times[j_idx],
                "w": self.values[i_idx, j_idx],
            },
        )

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def interval_weights(driver: RoughDriver) -> np.ndarray:
    """Per-interval weight max over levels of |X^m|^(p/m) for every grid pair."""
    table = driver.level_norm_table
    weights = np.zeros(table.shape[1:])
    for m in range(1, driver.depth + 1):
        weights = np.maximum(weights, table[m - 1] ** (driver.p / m))
    return weights


def control_table(driver: RoughDriver) -> ControlTable:
    """p-variation control restricted to the driver's grid."""
    weights = np.ascontiguousarray(interval_weights(driver))
    values = _pvar_dynamic_program(weights)
    logger.debug("Built control table on %d grid points (numba=%s)", driver.times.size, HAS_NUMBA)
    return ControlTable(np.asarray(driver.times, dtype=float), values)


def holder_domination_defect(driver: RoughDriver, table: ControlTable | None = None) -> float:
    """max over grid pairs of w(s,t) - |t-s| (1+|X|)^p; never positive in exact arithmetic."""
    table = control_table(driver) if table is None else table
    bound = (1.0 + holder_norm(driver)) ** driver.p
    gaps = table.times[None, :] - table.times[:, None]
    upper = np.triu(np.ones_like(table.values, dtype=bool), k=1)
    if not upper.any():
        return 0.0
    return float(np.max(table.values[upper] - gaps[upper] * bound))


# =============================================================================
# ACCUMULATION
# =============================================================================

@dataclass(frozen=True)
class AccumulationReport:
    """Greedy stopping times of a control at mass beta."""

    beta: float
    stopping_times: tuple[float, ...]
    stopping_indices: tuple[int, ...]
    n_beta: int

    def summary(self) -> dict[str, Any]:
        return {
            "beta": self.beta,
            "n_beta": self.n_beta,
            "stopping_times": list(self.stopping_times),
        }


def accumulation(table: ControlTable, beta: float) -> AccumulationReport:
    """tau_{i+1} = first grid time with w(tau_i, .) >= beta, capped at the horizon."""
    if beta <= 0:
        msg = f"beta must be positive, got {beta}"
        raise ValueError(msg)
    last = table.size - 1
    indices = [0]
    current = 0
    threshold = beta - ACCUMULATION_TOLERANCE
    while current < last:
        row = table.values[current, current + 1 :]
        hits = np.nonzero(row >= threshold)[0]
        current = current + 1 + int(hits[0]) if hits.size else last
        indices.append(current)
    n_beta = sum(1 for k in indices[1:] if k < last)
    return AccumulationReport(
        beta=float(beta),
        stopping_times=tuple(float(table.times[k]) for k in indices),
        stopping_indices=tuple(indices),
        n_beta=n_beta,
    )


# =============================================================================
# YOUNG COMPONENT
# =============================================================================

@dataclass(frozen=True)
class YoungPath:
    """Piecewise-linear R^m path driving the fields W_j of a mixed equation."""

    times: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != times.size or times.size < 2:
            msg = f"YoungPath needs matching times/values with >= 2 points, got {times.size}/{values.shape[0]}"
            raise InvalidGridError(msg)
        if not np.all(np.diff(times) > 0):
            msg = "YoungPath times must be strictly increasing"
            raise InvalidGridError(msg)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.values[:, j]) for j in range(self.dim)])

    def increment(self, s: float, t: float) -> np.ndarray:
        return self.at(t) - self.at(s)

    def holder_norm(self, q: float) -> float:
        """Grid 1/q-Hölder seminorm."""
        gaps = self.times[None, :] - self.times[:, None]
        diffs = np.linalg.norm(self.values[None, :, :] - self.values[:, None, :], axis=-1)
        upper = np.triu(np.ones_like(gaps, dtype=bool), k=1)
        return float(np.max(diffs[upper] / gaps[upper] ** (1.0 / q)))
