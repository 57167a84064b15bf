#!/usr/bin/env python3
"""Global solution flows.

Step maps over the dyadic subdivisions of an interval are composed into
mu^n; the solver cuts [s, t] into pieces (Hölder step budget or greedy
control stopping times), refines each piece dyadically until successive
compositions agree on a probe set, and patches the local flows together.

Diagnostics in this module measure the dyadic decay rate, off-partition flow
defects and growth envelopes, and provide a classical ODE reference for
canonical lifts of piecewise-linear paths.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from .config import PartitionStrategy, SolverConfig
from .errors import (
    AssumptionViolationError,
    BlowUpError,
    DimensionMismatchError,
    ExplosionError,
    InvalidGridError,
)
from .logode_step import build_step_field, mu, mu_with_jacobian
from .regression import LOG_FLOOR, LineFit, fit_geometric_rate, fit_line
from .rough_path import (
    AccumulationReport,
    RoughDriver,
    YoungPath,
    accumulation,
    control_table,
    holder_norm,
)
from .sampling import ball_sample
from .tensor_algebra import TruncatedTensorSeries
from .vector_fields import PolyVectorField, assumption_audit

logger = logging.getLogger(__name__)

# Number of trailing (time, state) records used to extrapolate a blow-up time
EXPLOSION_FIT_POINTS = 10
# Times closer than this are treated as the same partition point
TIME_TOLERANCE = 1e-12
# Tolerance of the classical reference solve
REFERENCE_TOLERANCE = 1e-12


# =============================================================================
# SYSTEM
# =============================================================================

@dataclass(frozen=True, eq=False)
class RoughSystem:
    """Driver and vector fields of one rough differential equation."""

    driver: RoughDriver
    fields: tuple[PolyVectorField, ...]
    v0: PolyVectorField | None = None
    young: YoungPath | None = None
    young_fields: tuple[PolyVectorField, ...] = ()

    def __post_init__(self) -> None:
        if not self.fields:
            msg = "A rough system needs at least one driving field"
            raise ValueError(msg)
        if len(self.fields) != self.driver.width:
            raise DimensionMismatchError("number of driving fields vs driver width", len(self.fields), self.driver.width)
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "young_fields", tuple(self.young_fields))

    @property
    def dim(self) -> int:
        return self.fields[0].dim


# =============================================================================
# DYADIC COMPOSITION
# =============================================================================

@dataclass(frozen=True, eq=False)
class DyadicMap:
    """mu^n_{ts}: the 2^n step maps of the dyadic subdivision, applied left to right."""

    s: float
    t: float
    level: int
    steps: tuple[Any, ...] = field(repr=False)

    def __call__(self, x: Any) -> np.ndarray:
        y = np.asarray(x, dtype=float)
        nodes: list[tuple[float, np.ndarray]] = [(self.s, y)]
        for index, step in enumerate(self.steps):
            try:
                y = mu(step, y)
            except BlowUpError as exc:
                exc.step_index = index
                exc.node_history = [(time, np.atleast_2d(state)[exc.point_index].copy()) for time, state in nodes]
                raise
            nodes.append((step.t, y))
        return y

    def with_jacobian(self, x: Any) -> tuple[np.ndarray, np.ndarray]:
        y = np.asarray(x, dtype=float)
        dim = y.shape[-1]
        jac = np.broadcast_to(np.eye(dim), (*y.shape[:-1], dim, dim)).copy()
        for index, step in enumerate(self.steps):
            try:
                y, factor = mu_with_jacobian(step, y)
            except BlowUpError as exc:
                exc.step_index = index
                raise
            jac = factor @ jac
        return y, jac

    def jacobian(self, x: Any) -> np.ndarray:
        return self.with_jacobian(x)[1]


def _dyadic_times(s: float, t: float, n: int) -> np.ndarray:
    count = 2**n
    times = s + (t - s) * np.arange(count + 1) / count
    times[-1] = t
    return times


def dyadic_compose(
    driver: RoughDriver,
    fields: Sequence[PolyVectorField],
    v0: PolyVectorField | None,
    s: float,
    t: float,
    n: int,
    config: SolverConfig | None = None,
    *,
    young: YoungPath | None = None,
    young_fields: Sequence[PolyVectorField] = (),
) -> DyadicMap:
    """Compose the step maps of t^n_k = k 2^-n (t - s) + s."""
    if n < 0:
        msg = f"Dyadic level must be >= 0, got {n}"
        raise ValueError(msg)
    times = _dyadic_times(s, t, n)
    steps = tuple(
        build_step_field(driver, fields, v0, float(a), float(b), config=config, young=young, young_fields=young_fields)
        for a, b in zip(times[:-1], times[1:], strict=True)
    )
    return DyadicMap(float(s), float(t), n, steps)


def _sup_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(np.atleast_2d(a) - np.atleast_2d(b), axis=-1)))


@dataclass(frozen=True)
class DefectStudy:
    """sup_x |mu^{n+1}(x) - mu^n(x)| per level and the fitted geometric rate."""

    s: float
    t: float
    radius: float
    levels: tuple[int, ...]
    defects: tuple[float, ...]
    fitted_rate: float
    theoretical_rate: float
    fit: LineFit
    converged: bool
    exact: bool
    smallness_ok: bool

    def to_frame(self) -> pd.DataFrame:
        n = len(self.levels)
        return pd.DataFrame(
            {
                "level": self.levels,
                "defect": self.defects,
                "fitted_rate": [self.fitted_rate] * n,
                "theoretical_rate": [self.theoretical_rate] * n,
            },
        )

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def summary(self) -> dict[str, Any]:
        return {
            "interval": [self.s, self.t],
            "fitted_rate": self.fitted_rate,
            "theoretical_rate": self.theoretical_rate,
            "converged": self.converged,
            "exact": self.exact,
            "smallness_ok": self.smallness_ok,
            "r_squared": self.fit.r_squared,
        }


def theoretical_dyadic_rate(p: float) -> float:
    """2^-(([p] + 1 - p) / p)."""
    return 2.0 ** (-(int(p) + 1 - p) / p)


def dyadic_defect_study(
    driver: RoughDriver,
    fields: Sequence[PolyVectorField],
    v0: PolyVectorField | None,
    s: float,
    t: float,
    radius: float,
    n_max: int,
    config: SolverConfig | None = None,
    *,
    n_min: int = 0,
    fit_from: int = 0,
    points: np.ndarray | None = None,
) -> DefectStudy:
    """Measure successive dyadic defects on a ball sample and fit their decay."""
    config = SolverConfig(p=driver.p) if config is None else config
    dim = fields[0].dim
    pts = ball_sample(dim, config.sample_points, radius, config.seed) if points is None else np.atleast_2d(points)
    norm = holder_norm(driver.restrict(s, t))
    smallness_ok = (t - s) ** (1.0 / driver.p) * (1.0 + norm) <= config.smallness
    if not smallness_ok:
        logger.warning(
            "Interval [%g, %g] violates the smallness bound (%.3g > %.3g)",
            s, t, (t - s) ** (1.0 / driver.p) * (1.0 + norm), config.smallness,
        )

    levels = list(range(n_min, n_max + 1))
    previous = dyadic_compose(driver, fields, v0, s, t, n_min, config)(pts)
    defects = []
    for n in levels:
        current = dyadic_compose(driver, fields, v0, s, t, n + 1, config)(pts)
        defects.append(_sup_distance(current, previous))
        logger.debug("Dyadic level %d defect %.3e", n, defects[-1])
        previous = current

    exact = all(d <= LOG_FLOOR for d in defects)
    fit_levels = [n for n in levels if n >= fit_from]
    fit_defects = [d for n, d in zip(levels, defects, strict=True) if n >= fit_from]
    if exact:
        rate, fit = 0.0, LineFit(math.nan, math.nan, math.nan, 0)
    else:
        rate, fit = fit_geometric_rate(fit_levels, fit_defects)
    converged = exact or (math.isfinite(rate) and rate < 1.0)
    if not converged:
        logger.warning("Dyadic defects on [%g, %g] do not decay (rate %.3g)", s, t, rate)
    return DefectStudy(
        s=float(s),
        t=float(t),
        radius=float(radius),
        levels=tuple(levels),
        defects=tuple(defects),
        fitted_rate=rate,
        theoretical_rate=theoretical_dyadic_rate(driver.p),
        fit=fit,
        converged=converged,
        exact=exact,
        smallness_ok=smallness_ok,
    )


# =============================================================================
# PARTITIONS
# =============================================================================

@dataclass(frozen=True)
class PartitionPlan:
    times: tuple[float, ...]
    strategy: PartitionStrategy
    step_budget: int
    holder_norm: float
    accumulation: AccumulationReport | None = None

    @property
    def n_pieces(self) -> int:
        return len(self.times) - 1


def step_budget(norm: float, p: float, c3: float) -> int:
    """N = floor(c3 (1 + |X|)^p), at least one piece."""
    return max(1, int(math.floor(c3 * (1.0 + norm) ** p)))


def partition_interval(driver: RoughDriver, s: float, t: float, config: SolverConfig) -> PartitionPlan:
    """Cut [s, t] according to the configured strategy."""
    local = driver.restrict(s, t)
    norm = holder_norm(local)
    budget = step_budget(norm, driver.p, config.c3)
    max_length = (config.smallness / (1.0 + norm)) ** driver.p

    if config.partition is PartitionStrategy.HOLDER_BUDGET:
        coarse = np.linspace(s, t, budget + 1)
        times = [float(s)]
        for a, b in zip(coarse[:-1], coarse[1:], strict=True):
            halvings = max(0, math.ceil(math.log2((b - a) / max_length))) if b - a > max_length else 0
            pieces = 2**halvings
            times.extend(float(a + (b - a) * k / pieces) for k in range(1, pieces + 1))
        times[-1] = float(t)
        plan = PartitionPlan(tuple(times), config.partition, budget, norm)
    else:
        table = control_table(local)
        report = accumulation(table, config.beta)
        times_list = list(report.stopping_times)
        for i, j in zip(report.stopping_indices[:-1], report.stopping_indices[1:], strict=True):
            w = table.w(i, j)
            length = table.times[j] - table.times[i]
            if w > config.beta and length > max_length:
                logger.warning(
                    "Piece [%g, %g] has control %.3g > beta and misses the smallness bound",
                    table.times[i], table.times[j], w,
                )
        plan = PartitionPlan(tuple(times_list), config.partition, budget, norm, report)
    logger.info(
        "Partitioned [%g, %g] into %d pieces (%s, |X|=%.4g, budget N=%d)",
        s, t, plan.n_pieces, plan.strategy.value, norm, budget,
    )
    return plan


# =============================================================================
# FLOW COMPOSITION
# =============================================================================

@dataclass(frozen=True)
class ExplosionReport:
    """Where and when a solution escaped."""

    interval: tuple[float, float]
    step_interval: tuple[float, float]
    last_state: tuple[float, ...]
    t_star_estimate: float
    initial_point: tuple[float, ...]
    history: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "interval": list(self.interval),
            "step_interval": list(self.step_interval),
            "last_state": list(self.last_state),
            "t_star_estimate": self.t_star_estimate,
            "initial_point": list(self.initial_point),
            "history": [list(h) for h in self.history],
        }


def extrapolate_blowup_time(records: Sequence[tuple[float, np.ndarray]], n_points: int = EXPLOSION_FIT_POINTS) -> float:
    """Zero crossing of a line fitted to 1/|y| against time over the last records."""
    tail = list(records)[-n_points:]
    times = np.array([time for time, _ in tail], dtype=float)
    inverse = np.array([1.0 / max(float(np.linalg.norm(state)), 1e-300) for _, state in tail])
    fit = fit_line(times, inverse)
    if not math.isfinite(fit.slope) or fit.slope >= 0.0:
        return math.nan
    return -fit.intercept / fit.slope


@dataclass(frozen=True, eq=False)
class FlowComposition:
    """Patched solution flow phi_{ts} over a partition of [s, t]."""

    s: float
    t: float
    partition: tuple[float, ...]
    local_maps: tuple[DyadicMap, ...] = field(repr=False)
    levels: tuple[int, ...]
    defects: tuple[float, ...]
    converged: tuple[bool, ...]
    config: SolverConfig = field(repr=False)
    system: RoughSystem = field(repr=False)
    step_budget: int = 1
    holder_norm: float = 0.0
    n_beta: int | None = None

    @property
    def dim(self) -> int:
        return self.system.dim

    @property
    def n_pieces(self) -> int:
        return len(self.local_maps)

    @property
    def all_converged(self) -> bool:
        return all(self.converged)

    def partition_index(self, u: float) -> int | None:
        for k, time in enumerate(self.partition):
            if abs(time - u) <= TIME_TOLERANCE * max(1.0, abs(u)):
                return k
        return None

    def evaluate_between(self, i: int, j: int, x: Any) -> np.ndarray:
        """phi between partition points i <= j."""
        y = np.asarray(x, dtype=float)
        for local in self.local_maps[i:j]:
            y = local(y)
        return y

    def __call__(self, x: Any) -> np.ndarray:
        return self.evaluate_between(0, self.n_pieces, x)

    def trajectory(self, x: Any) -> list[np.ndarray]:
        """States at every partition point."""
        y = np.asarray(x, dtype=float)
        states = [y]
        for local in self.local_maps:
            y = local(y)
            states.append(y)
        return states

    def to_frame(self, points: Any) -> pd.DataFrame:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        states = self.trajectory(pts)
        rows = []
        for time, state in zip(self.partition, states, strict=True):
            for x0, phi in zip(pts, np.atleast_2d(state), strict=True):
                row = {"t": time}
                row.update({f"x0_{j}": v for j, v in enumerate(x0)})
                row.update({f"phi_{j}": v for j, v in enumerate(phi)})
                rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path: str | Path, points: Any) -> Path:
        path = Path(path)
        self.to_frame(points).to_csv(path, index=False, float_format="%.17g")
        return path

    def summary(self) -> dict[str, Any]:
        return {
            "interval": [self.s, self.t],
            "partition": list(self.partition),
            "levels": list(self.levels),
            "defects": list(self.defects),
            "converged": all(self.converged),
            "step_budget": self.step_budget,
            "holder_norm": self.holder_norm,
            "n_beta": self.n_beta,
        }


def _check_assumptions(
    v0: PolyVectorField | None, fields: Sequence[PolyVectorField], config: SolverConfig, horizon: float,
) -> None:
    audit = assumption_audit(v0, fields, config.p, alpha=config.audit_alpha, horizon=horizon, seed=config.seed)
    if audit.passed:
        return
    if config.allow_audit_failures:
        logger.warning("Solving despite %d audit violations (override set)", len(audit.violations))
        return
    raise AssumptionViolationError(list(audit.violations))


def _refine_piece(
    system: RoughSystem, a: float, b: float, probes: np.ndarray, config: SolverConfig,
) -> tuple[DyadicMap, np.ndarray, int, float, bool]:
    def compose(n: int) -> DyadicMap:
        return dyadic_compose(
            system.driver, system.fields, system.v0, a, b, n, config,
            young=system.young, young_fields=system.young_fields,
        )

    level = config.min_dyadic_level
    current = compose(level)
    images = current(probes)
    defect = math.inf
    while level < config.max_dyadic_level:
        finer = compose(level + 1)
        finer_images = finer(probes)
        defect = _sup_distance(finer_images, images)
        level += 1
        current, images = finer, finer_images
        if defect < config.dyadic_tolerance:
            return current, images, level, defect, True
    logger.warning(
        "Piece [%g, %g] reached max dyadic level %d with defect %.3e",
        a, b, config.max_dyadic_level, defect,
    )
    return current, images, level, defect, False


def solve_flow(
    driver: RoughDriver,
    fields: Sequence[PolyVectorField],
    v0: PolyVectorField | None,
    s: float,
    t: float,
    config: SolverConfig | None = None,
    *,
    points: Any = None,
    young: YoungPath | None = None,
    young_fields: Sequence[PolyVectorField] = (),
    check_assumptions: bool = True,
) -> FlowComposition:
    """Solve the flow on [s, t] by partitioning and dyadic refinement of each piece."""
    config = SolverConfig(p=driver.p) if config is None else config
    if config.depth != driver.depth:
        raise DimensionMismatchError("truncation depth of config vs driver", config.depth, driver.depth)
    if t < s:
        msg = f"solve_flow needs s <= t, got s={s}, t={t}"
        raise InvalidGridError(msg)
    system = RoughSystem(driver, tuple(fields), v0, young, tuple(young_fields))
    if check_assumptions:
        _check_assumptions(v0, fields, config, driver.end)

    if t == s:
        return FlowComposition(float(s), float(t), (float(s),), (), (), (), (), config, system)

    plan = partition_interval(driver, s, t, config)
    probes = (
        ball_sample(system.dim, config.sample_points, config.radius, config.seed)
        if points is None
        else np.atleast_2d(np.asarray(points, dtype=float))
    )

    local_maps, levels, defects, converged = [], [], [], []
    boundary: list[tuple[float, np.ndarray]] = [(plan.times[0], probes)]
    current = probes
    for a, b in zip(plan.times[:-1], plan.times[1:], strict=True):
        try:
            local, current, level, defect, ok = _refine_piece(system, a, b, current, config)
        except BlowUpError as exc:
            raise ExplosionError(_explosion_report(exc, (a, b), boundary, probes)) from exc
        local_maps.append(local)
        levels.append(level)
        defects.append(defect)
        converged.append(ok)
        boundary.append((b, current))

    fc = FlowComposition(
        s=float(s),
        t=float(t),
        partition=plan.times,
        local_maps=tuple(local_maps),
        levels=tuple(levels),
        defects=tuple(defects),
        converged=tuple(converged),
        config=config,
        system=system,
        step_budget=plan.step_budget,
        holder_norm=plan.holder_norm,
        n_beta=None if plan.accumulation is None else plan.accumulation.n_beta,
    )
    logger.info("Solved flow on [%g, %g] with %d pieces, max level %d", s, t, fc.n_pieces, max(levels, default=0))
    return fc


def _explosion_report(
    exc: BlowUpError,
    piece: tuple[float, float],
    boundary: list[tuple[float, np.ndarray]],
    probes: np.ndarray,
) -> ExplosionReport:
    idx = exc.point_index
    records = [(time, np.atleast_2d(states)[idx]) for time, states in boundary]
    records += exc.node_history + exc.history_times()
    records.sort(key=lambda item: item[0])
    cleaned: list[tuple[float, np.ndarray]] = []
    for time, state in records:
        if cleaned and abs(cleaned[-1][0] - time) <= TIME_TOLERANCE:
            cleaned[-1] = (time, state)
        else:
            cleaned.append((time, state))
    t_star = extrapolate_blowup_time(cleaned)
    report = ExplosionReport(
        interval=(float(piece[0]), float(piece[1])),
        step_interval=exc.interval,
        last_state=tuple(float(v) for v in exc.last_state),
        t_star_estimate=t_star,
        initial_point=tuple(float(v) for v in np.atleast_2d(probes)[idx]),
        history=tuple((float(time), float(np.linalg.norm(state))) for time, state in cleaned[-EXPLOSION_FIT_POINTS:]),
    )
    logger.warning("Explosion detected on [%g, %g], estimated blow-up time %.6g", piece[0], piece[1], t_star)
    return report


# =============================================================================
# FLOW DIAGNOSTICS
# =============================================================================

def flow_defect(fc: FlowComposition, u: float, radius: float | None = None, *, points: Any = None) -> float:
    """sup over B(0, R) of |phi_{t,u}(phi_{u,s}(x)) - phi_{t,s}(x)|."""
    if not fc.s < u < fc.t:
        msg = f"u={u} must lie strictly inside ({fc.s}, {fc.t})"
        raise ValueError(msg)
    config = fc.config
    radius = config.radius if radius is None else radius
    pts = ball_sample(fc.dim, config.sample_points, radius, config.seed) if points is None else np.atleast_2d(points)
    direct = fc(pts)

    k = fc.partition_index(u)
    if k is not None:
        middle = fc.evaluate_between(0, k, pts)
        composed = fc.evaluate_between(k, fc.n_pieces, middle)
        return _sup_distance(composed, direct)

    system = fc.system
    kwargs = {"young": system.young, "young_fields": system.young_fields, "check_assumptions": False}
    first = solve_flow(system.driver, system.fields, system.v0, fc.s, u, config, points=pts, **kwargs)
    middle = first(pts)
    second = solve_flow(system.driver, system.fields, system.v0, u, fc.t, config, points=middle, **kwargs)
    defect = _sup_distance(second(middle), direct)
    logger.info("Flow defect at u=%g: %.3e", u, defect)
    return defect


@dataclass(frozen=True)
class EnvelopeReport:
    """Measured sup |phi(x) - x| on balls against the growth envelope."""

    alpha: float
    radii: tuple[float, ...]
    measured: tuple[float, ...]
    envelope: tuple[float, ...]
    c4: float
    c4_per_radius: tuple[float, ...]
    step_budget: int
    relative_spread: float
    measured_monotone: bool
    envelope_monotone: bool
    within_envelope: bool

    @property
    def shape_matches(self) -> bool:
        return self.measured_monotone == self.envelope_monotone

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "radius": self.radii,
                "measured": self.measured,
                "envelope": self.envelope,
                "c4_at_radius": self.c4_per_radius,
            },
        )

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def summary(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "c4": self.c4,
            "step_budget": self.step_budget,
            "relative_spread": self.relative_spread,
            "shape_matches": self.shape_matches,
            "within_envelope": self.within_envelope,
        }


def envelope_value(radius: float, c4: float, alpha: float, scale: float, budget: int) -> float:
    """Growth envelope of sup |phi(x) - x| on B(0, R); ``scale`` is |t-s|^(1/p)."""
    if alpha >= 1.0:
        return (1.0 + radius) * scale * math.exp(c4 * budget * scale)
    inner = 1.0 + c4 * scale * budget / (1.0 + radius) ** (1.0 - alpha)
    return (1.0 + radius) * (max(inner, 0.0) ** (1.0 / (1.0 - alpha)) - 1.0)


def envelope_constant(measured: float, radius: float, alpha: float, scale: float, budget: int) -> float:
    """Invert ``envelope_value`` for c4 at one radius."""
    if measured <= 0.0 or scale <= 0.0:
        return math.nan
    if alpha >= 1.0:
        return math.log(measured / ((1.0 + radius) * scale)) / (budget * scale)
    a = scale * budget / (1.0 + radius) ** (1.0 - alpha)
    return ((measured / (1.0 + radius) + 1.0) ** (1.0 - alpha) - 1.0) / a


def _is_monotone(values: Sequence[float]) -> bool:
    return all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(values[:-1], values[1:], strict=True))


def growth_envelope(fc: FlowComposition, radii: Sequence[float], alpha: float) -> EnvelopeReport:
    """Measure sup |phi_{ts}(x) - x| over B(0, R) for each R and fit c4."""
    if not 0.0 <= alpha <= 1.0:
        msg = f"alpha must lie in [0, 1], got {alpha}"
        raise ValueError(msg)
    config = fc.config
    scale = (fc.t - fc.s) ** (1.0 / config.p)
    measured = []
    for radius in radii:
        pts = ball_sample(fc.dim, config.sample_points, radius, config.seed)
        measured.append(_sup_distance(fc(pts), pts) if fc.n_pieces else 0.0)
    per_radius = [envelope_constant(m, r, alpha, scale, fc.step_budget) for m, r in zip(measured, radii, strict=True)]
    finite = [c for c in per_radius if math.isfinite(c)]
    c4 = max(finite) if finite else 0.0
    envelope = [envelope_value(r, c4, alpha, scale, fc.step_budget) if scale > 0 else 0.0 for r in radii]
    top = max(measured, default=0.0)
    spread = (top - min(measured)) / top if top > 0 else 0.0
    return EnvelopeReport(
        alpha=float(alpha),
        radii=tuple(float(r) for r in radii),
        measured=tuple(measured),
        envelope=tuple(envelope),
        c4=c4,
        c4_per_radius=tuple(per_radius),
        step_budget=fc.step_budget,
        relative_spread=spread,
        measured_monotone=_is_monotone(measured),
        envelope_monotone=_is_monotone(envelope),
        within_envelope=all(m <= e * (1.0 + 1e-9) + 1e-15 for m, e in zip(measured, envelope, strict=True)),
    )


@dataclass(frozen=True)
class SweepReport:
    """Log of sup |phi - x| against N |t-s|^(1/p) over stretched horizons."""

    horizons: tuple[float, ...]
    abscissae: tuple[float, ...]
    log_sups: tuple[float, ...]
    fit: LineFit
    c4: float
    alpha: float

    @property
    def slope_matches_c4(self) -> bool:
        return abs(self.fit.slope - self.c4) <= 0.5 * abs(self.c4)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"horizon": self.horizons, "n_scale": self.abscissae, "log_sup": self.log_sups})


def growth_sweep(
    system_factory: Callable[[float], tuple[RoughDriver, Sequence[PolyVectorField], PolyVectorField | None]],
    horizons: Sequence[float],
    radius: float,
    config: SolverConfig,
    alpha: float = 1.0,
) -> SweepReport:
    """Solve over [0, T] for each T and regress log sup |phi - x| on N T^(1/p)."""
    abscissae, log_sups, constants = [], [], []
    for horizon in horizons:
        driver, fields, v0 = system_factory(horizon)
        pts = ball_sample(fields[0].dim, config.sample_points, radius, config.seed)
        fc = solve_flow(driver, fields, v0, driver.start, driver.end, config, points=pts, check_assumptions=False)
        sup = _sup_distance(fc(pts), pts)
        scale = (fc.t - fc.s) ** (1.0 / config.p)
        abscissae.append(fc.step_budget * scale)
        log_sups.append(math.log(sup) if sup > 0 else -math.inf)
        if alpha >= 1.0:
            constants.append(math.log(sup / ((1.0 + radius) * scale)) if sup > 0 else -math.inf)
        else:
            constants.append(envelope_constant(sup, radius, alpha, scale, fc.step_budget))
    fit = fit_line(abscissae, log_sups)
    if alpha >= 1.0:
        c4 = fit_line(abscissae, constants).slope
    else:
        c4 = max((c for c in constants if math.isfinite(c)), default=math.nan)
    logger.info("Growth sweep slope %.4f, c4 %.4f, R^2 %.4f", fit.slope, c4, fit.r_squared)
    return SweepReport(
        horizons=tuple(float(h) for h in horizons),
        abscissae=tuple(abscissae),
        log_sups=tuple(log_sups),
        fit=fit,
        c4=c4,
        alpha=float(alpha),
    )


# =============================================================================
# CLASSICAL REFERENCE
# =============================================================================

def _is_canonical_lift(segment: TruncatedTensorSeries) -> bool:
    lifted = TruncatedTensorSeries.from_increment(segment.levels[1], segment.depth)
    return lifted.max_abs_diff(segment) <= 1e-12


def classical_solve(
    driver: RoughDriver,
    fields: Sequence[PolyVectorField],
    v0: PolyVectorField | None,
    x: Any,
    s: float,
    t: float,
    *,
    young: YoungPath | None = None,
    young_fields: Sequence[PolyVectorField] = (),
    tolerance: float = REFERENCE_TOLERANCE,
) -> np.ndarray:
    """Reference solution of the underlying ODE for canonical lifts of piecewise-linear paths."""
    if not all(_is_canonical_lift(seg) for seg in driver.segments):
        msg = "classical_solve needs a canonical lift of a piecewise-linear path"
        raise ValueError(msg)
    breaks = {float(s), float(t)}
    breaks.update(float(u) for u in driver.times if s < u < t)
    if young is not None:
        breaks.update(float(u) for u in young.times if s < u < t)
    grid = sorted(breaks)

    points = np.atleast_2d(np.asarray(x, dtype=float))
    results = []
    for start in points:
        y = start.copy()
        for a, b in zip(grid[:-1], grid[1:], strict=True):
            if b <= a:
                continue
            mid = 0.5 * (a + b)
            cell = min(int(np.searchsorted(driver.times, mid, side="right")) - 1, driver.n_cells - 1)
            velocity = driver.segments[cell].levels[1] / (driver.times[cell + 1] - driver.times[cell])
            young_velocity = None
            if young is not None:
                young_velocity = (young.at(b) - young.at(a)) / (b - a)

            def rhs(time: float, state: np.ndarray, velocity: np.ndarray = velocity, young_velocity: np.ndarray | None = young_velocity) -> np.ndarray:
                out = np.zeros_like(state)
                if v0 is not None:
                    out += v0.evaluate(state, time)
                for vj, fj in zip(velocity, fields, strict=True):
                    if vj:
                        out += vj * fj.evaluate(state, time)
                if young_velocity is not None:
                    for vm, wm in zip(young_velocity, young_fields, strict=True):
                        if vm:
                            out += vm * wm.evaluate(state, time)
                return out

            sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=tolerance, atol=tolerance)
            if not sol.success:
                msg = f"Reference solve failed on [{a}, {b}]: {sol.message}"
                raise RuntimeError(msg)
            y = sol.y[:, -1]
        results.append(y)
    out = np.array(results)
    return out[0] if np.asarray(x).ndim == 1 else out
