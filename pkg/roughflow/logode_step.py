#!/usr/bin/env python3
"""Log-ODE step maps.

On an interval [s, t] the step field is

    (t - s) V0(s, .) + sum_I Lambda^I_{st} F_I(s, .) + sum_j Y^j_{st} W_j(s, .)

where Lambda = log X_{st} in word coordinates and F_I is V_I Id in word mode
or V_[I] / |I| in bracket mode (the two agree when Lambda is a Lie element).
The step map mu_{ts} is the time-1 map of y' = field(y), integrated with
fixed-step RK4; its Jacobian comes from the variational equation.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .config import SolverConfig, StepMode
from .errors import BlowUpError, DimensionMismatchError, InvalidGridError
from .regression import LOG_FLOOR, fit_loglog
from .rough_path import RoughDriver, YoungPath, holder_norm
from .sampling import ball_sample
from .tensor_algebra import TruncatedTensorSeries, all_words, check_weak_geometric
from .vector_fields import (
    CompiledField,
    FieldFamily,
    FieldLike,
    PolyVectorField,
    apply_operator,
    word_fields,
)

logger = logging.getLogger(__name__)

# Number of (r, state) pairs kept for blow-up reports
HISTORY_LENGTH = 16


# =============================================================================
# STEP FAMILIES
# =============================================================================

@lru_cache(maxsize=32)
def step_family(
    fields: tuple[PolyVectorField, ...],
    v0: PolyVectorField | None,
    young_fields: tuple[PolyVectorField, ...],
    depth: int,
    mode: StepMode,
) -> tuple[FieldFamily, tuple[tuple[int, ...], ...]]:
    """Compiled basis [V0, F_I for all words I, W_j] and the word order used."""
    dim = fields[0].dim
    words = tuple(all_words(len(fields), depth))
    per_word = word_fields(fields, depth, mode.value)
    basis = [v0 if v0 is not None else PolyVectorField.zeros(dim)]
    basis += [per_word[w] for w in words]
    basis += list(young_fields)
    logger.debug("Compiled %s-mode step family with %d basis fields", mode.value, len(basis))
    return FieldFamily(basis), words


def step_weights(
    log_signature: TruncatedTensorSeries,
    words: Sequence[tuple[int, ...]],
    length: float,
    mode: StepMode,
    young_increment: np.ndarray | None = None,
) -> np.ndarray:
    """Weights matching the basis order of ``step_family``."""
    lam = [log_signature.coefficient(w) for w in words]
    if mode is StepMode.BRACKET:
        # right-nested bracketing of a degree-k Lie element returns k times it
        lam = [c / len(w) for c, w in zip(lam, words, strict=True)]
    young = [] if young_increment is None else list(young_increment)
    return np.array([length, *lam, *young], dtype=float)


# =============================================================================
# STEP MAP
# =============================================================================

@dataclass(frozen=True, eq=False)
class StepMap:
    """One log-ODE map mu_{ts} with its integrator settings."""

    s: float
    t: float
    family: FieldFamily = field(repr=False)
    weights: np.ndarray = field(repr=False)
    compiled: CompiledField = field(repr=False)
    log_signature: TruncatedTensorSeries = field(repr=False)
    mode: StepMode = StepMode.WORD
    substeps: int = 32
    guard: float = 1e8
    warnings: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.family.dim

    def step_field(self) -> PolyVectorField:
        """The assembled right-hand side as a symbolic field."""
        return self.family.symbolic(self.weights, self.s)

    def __call__(self, x: Any) -> np.ndarray:
        return mu(self, x)


def _resolve(config: SolverConfig | None, driver: RoughDriver) -> SolverConfig:
    config = SolverConfig(p=driver.p) if config is None else config
    if config.depth != driver.depth:
        raise DimensionMismatchError("truncation depth of config vs driver", config.depth, driver.depth)
    return config


def build_step_field(
    driver: RoughDriver,
    fields: Sequence[PolyVectorField],
    v0: PolyVectorField | None,
    s: float,
    t: float,
    mode: StepMode | str | None = None,
    *,
    config: SolverConfig | None = None,
    young: YoungPath | None = None,
    young_fields: Sequence[PolyVectorField] = (),
) -> StepMap:
    """Assemble the step field of [s, t] and wrap it with the integrator settings."""
    config = _resolve(config, driver)
    mode = config.mode if mode is None else StepMode(mode)
    if not s < t:
        msg = f"build_step_field needs s < t, got s={s}, t={t}"
        raise InvalidGridError(msg)
    if len(fields) != driver.width:
        raise DimensionMismatchError("number of driving fields vs driver width", len(fields), driver.width)
    if (young is None) != (not young_fields):
        msg = "A Young path and its fields must be given together"
        raise ValueError(msg)
    if young is not None and young.dim != len(young_fields):
        raise DimensionMismatchError("Young path dimension vs Young fields", young.dim, len(young_fields))

    family, words = step_family(tuple(fields), v0, tuple(young_fields), driver.depth, mode)
    signature = driver.signature(s, t)
    log_sig = driver.log_signature(s, t)
    warnings: list[str] = []
    if mode is StepMode.BRACKET:
        report = check_weak_geometric(signature)
        if not report.passed:
            warnings.append(
                f"bracket mode on a non-geometric increment (shuffle violation {report.max_violation:.3g})",
            )
            logger.warning("Step [%g, %g]: %s", s, t, warnings[-1])
    young_inc = None if young is None else young.increment(s, t)
    weights = step_weights(log_sig, words, t - s, mode, young_inc)
    return StepMap(
        s=float(s),
        t=float(t),
        family=family,
        weights=weights,
        compiled=family.combine(weights, s),
        log_signature=log_sig,
        mode=mode,
        substeps=config.substeps,
        guard=config.blowup_guard,
        warnings=tuple(warnings),
    )


# =============================================================================
# INTEGRATION
# =============================================================================

def _integrate(step: StepMap, x: Any, with_jacobian: bool) -> tuple[np.ndarray, np.ndarray | None]:
    y = np.array(x, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[-1] != step.dim:
        raise DimensionMismatchError("point dimension", y.shape[-1], step.dim)
    jac = np.broadcast_to(np.eye(step.dim), (y.shape[0], step.dim, step.dim)).copy() if with_jacobian else None

    if not step.compiled.is_zero:
        field_at = step.compiled.value
        jac_at = step.compiled.jacobian
        h = 1.0 / step.substeps
        history: deque[tuple[float, np.ndarray]] = deque(maxlen=HISTORY_LENGTH)
        history.append((0.0, y.copy()))
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(step.substeps):
                k1 = field_at(y)
                k2 = field_at(y + 0.5 * h * k1)
                k3 = field_at(y + 0.5 * h * k2)
                k4 = field_at(y + h * k3)
                y_next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                if jac is not None:
                    j1 = jac_at(y) @ jac
                    j2 = jac_at(y + 0.5 * h * k1) @ (jac + 0.5 * h * j1)
                    j3 = jac_at(y + 0.5 * h * k2) @ (jac + 0.5 * h * j2)
                    j4 = jac_at(y + h * k3) @ (jac + h * j3)
                    jac = jac + (h / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
                r = (n + 1) * h
                norms = np.linalg.norm(y_next, axis=-1)
                bad = ~np.isfinite(norms) | (norms > step.guard)
                if bad.any():
                    idx = int(np.argmax(bad))
                    raise BlowUpError(
                        last_state=y[idx].copy(),
                        r=r,
                        history=[(rr, state[idx].copy()) for rr, state in history],
                        interval=(step.s, step.t),
                        point_index=idx,
                    )
                y = y_next
                history.append((r, y.copy()))

    if single:
        return y[0], None if jac is None else jac[0]
    return y, jac


def mu(step: StepMap, x: Any) -> np.ndarray:
    """Time-1 map of the step ODE started at x (single point or batch)."""
    y, _ = _integrate(step, x, with_jacobian=False)
    return y


def mu_jacobian(step: StepMap, x: Any) -> np.ndarray:
    """D mu(x) from the variational equation J' = DF(y) J, J(0) = I."""
    _, jac = _integrate(step, x, with_jacobian=True)
    return jac


def mu_with_jacobian(step: StepMap, x: Any) -> tuple[np.ndarray, np.ndarray]:
    y, jac = _integrate(step, x, with_jacobian=True)
    return y, jac


# =============================================================================
# TAYLOR REMAINDER
# =============================================================================

@dataclass(frozen=True)
class RemainderReport:
    """Measured sup of |f(mu(x)) - Taylor expansion| over a ball, per step length."""

    probe: str
    hs: tuple[float, ...]
    remainders: tuple[float, ...]
    slope: float
    slopes_so_far: tuple[float, ...]
    exact: bool
    expected_order: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"h": self.hs, "remainder": self.remainders, "slope_so_far": self.slopes_so_far},
        )

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def summary(self) -> dict[str, Any]:
        return {
            "probe": self.probe,
            "slope": self.slope,
            "expected_order": self.expected_order,
            "exact": self.exact,
        }


def _values(f: FieldLike, points: np.ndarray, time: float) -> np.ndarray:
    vals = np.asarray(f.evaluate(points, time))
    return vals[:, None] if vals.ndim == 1 else vals


def taylor_remainder(
    driver: RoughDriver,
    fields: Sequence[PolyVectorField],
    v0: PolyVectorField | None,
    s: float,
    hs: Sequence[float],
    f: FieldLike | None = None,
    radius: float = 1.0,
    config: SolverConfig | None = None,
    *,
    points: np.ndarray | None = None,
    probe: str | None = None,
) -> RemainderReport:
    """sup over B(0, R) of |f o mu_{t,s} - f - (t-s) V0 f - sum_I X^I V_I f| for t = s + h."""
    config = _resolve(config, driver)
    dim = fields[0].dim
    f = PolyVectorField.identity(dim) if f is None else f
    probe = probe or ("Id" if f == PolyVectorField.identity(dim) else "f")
    pts = ball_sample(dim, config.sample_points, radius, config.seed) if points is None else np.atleast_2d(points)

    words = all_words(len(fields), driver.depth)
    operators = {w: apply_operator(fields, w, f) for w in words}
    drift_term = v0.freeze(s).apply(f) if v0 is not None else None
    base = _values(f, pts, s)
    word_values = {w: _values(op, pts, s) for w, op in operators.items()}
    drift_values = _values(drift_term, pts, s) if drift_term is not None else 0.0

    remainders = []
    for h in hs:
        t = s + float(h)
        step = build_step_field(driver, fields, v0, s, t, config=config)
        image = mu(step, pts)
        signature = driver.signature(s, t)
        expansion = base + (t - s) * drift_values
        for w in words:
            expansion = expansion + signature.coefficient(w) * word_values[w]
        gap = _values(f, image, s) - expansion
        remainders.append(float(np.max(np.linalg.norm(gap, axis=-1))))

    exact = all(r <= LOG_FLOOR for r in remainders)
    fit = fit_loglog(hs, remainders)
    slopes = [math.nan] + [fit_loglog(hs[: j + 1], remainders[: j + 1]).slope for j in range(1, len(hs))]
    report = RemainderReport(
        probe=probe,
        hs=tuple(float(h) for h in hs),
        remainders=tuple(remainders),
        slope=fit.slope,
        slopes_so_far=tuple(slopes),
        exact=exact,
        expected_order=(driver.depth + 1) / driver.p,
    )
    logger.info("Taylor remainder slope %.4f (expected >= %.4f)", report.slope, report.expected_order)
    return report


# =============================================================================
# STEP GROWTH MONITOR
# =============================================================================

@dataclass(frozen=True)
class GronwallReport:
    """Fitted constants of |mu(x) - x| <= K (1+|x|)^alpha C and |D mu - I| <= K' C."""

    hs: tuple[float, ...]
    scales: tuple[float, ...]
    displacement_ratios: tuple[float, ...]
    jacobian_ratios: tuple[float, ...]
    k_displacement: float
    k_jacobian: float
    alpha: float

    def summary(self) -> dict[str, Any]:
        return {
            "k_displacement": self.k_displacement,
            "k_jacobian": self.k_jacobian,
            "alpha": self.alpha,
        }


def step_scale(length: float, norm: float, p: float) -> float:
    """C = |t-s| + sum_{i <= [p]} |t-s|^(i/p) |X|^i."""
    depth = int(p)
    return length + sum(length ** (i / p) * norm**i for i in range(1, depth + 1))


def step_growth_monitor(
    driver: RoughDriver,
    fields: Sequence[PolyVectorField],
    v0: PolyVectorField | None,
    s: float,
    hs: Sequence[float],
    alpha: float = 1.0,
    config: SolverConfig | None = None,
    *,
    points: np.ndarray | None = None,
) -> GronwallReport:
    """Check the displacement and Jacobian bounds of step maps over shrinking steps."""
    config = _resolve(config, driver)
    dim = fields[0].dim
    pts = ball_sample(dim, config.sample_points, config.radius, config.seed) if points is None else np.atleast_2d(points)
    norm = holder_norm(driver)
    weights = (1.0 + np.linalg.norm(pts, axis=-1)) ** alpha
    scales, disp, jacs = [], [], []
    for h in hs:
        step = build_step_field(driver, fields, v0, s, s + float(h), config=config)
        image, jac = mu_with_jacobian(step, pts)
        scale = step_scale(float(h), norm, driver.p)
        scales.append(scale)
        disp.append(float(np.max(np.linalg.norm(image - pts, axis=-1) / weights)) / scale)
        deviation = np.linalg.norm(jac - np.eye(dim), ord=2, axis=(-2, -1))
        jacs.append(float(np.max(deviation)) / scale)
    return GronwallReport(
        hs=tuple(float(h) for h in hs),
        scales=tuple(scales),
        displacement_ratios=tuple(disp),
        jacobian_ratios=tuple(jacs),
        k_displacement=max(disp, default=0.0),
        k_jacobian=max(jacs, default=0.0),
        alpha=float(alpha),
    )
