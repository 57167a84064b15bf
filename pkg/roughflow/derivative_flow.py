#!/usr/bin/env python3
"""Derivatives of solution flows.

D phi is the ordered product of the step-map Jacobians along the partition,
each evaluated at the propagated point. Parameter derivatives come from the
same machinery applied to the state augmented with constant parameters.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .config import SolverConfig
from .errors import DimensionMismatchError
from .flow_builder import FlowComposition, solve_flow
from .regression import LineFit, fit_line
from .rough_path import RoughDriver
from .vector_fields import PolyVectorField, ScalarField

logger = logging.getLogger(__name__)

# Allowed mismatch between the stored product and a fresh re-multiplication
REMULTIPLY_TOLERANCE = 1e-10


def _operator_norm(matrices: np.ndarray) -> np.ndarray:
    return np.linalg.norm(matrices, ord=2, axis=(-2, -1))


@dataclass(frozen=True, eq=False)
class DerivativeRecord:
    """Jacobian factors of each partition piece and their running product.

    ``points`` holds the states at the partition times, ``factors[k]`` the
    Jacobian of the k-th local map at ``points[k]`` and ``products[k]`` the
    accumulated product up to partition time k. Leading batch axes follow the
    shape of the evaluation point.
    """

    partition: tuple[float, ...]
    points: tuple[np.ndarray, ...] = field(repr=False)
    factors: tuple[np.ndarray, ...] = field(repr=False)
    products: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def product(self) -> np.ndarray:
        return self.products[-1]

    @property
    def deviations(self) -> tuple[float, ...]:
        """sup over the batch of |D phi - I| at every partition time."""
        out = []
        for prod in self.products:
            eye = np.eye(prod.shape[-1])
            out.append(float(np.max(_operator_norm(prod - eye))))
        return tuple(out)

    @property
    def deviation(self) -> float:
        return self.deviations[-1]

    def remultiply_defect(self) -> float:
        dim = self.product.shape[-1]
        prod = np.broadcast_to(np.eye(dim), self.product.shape).copy()
        for factor in self.factors:
            prod = factor @ prod
        return float(np.max(np.abs(prod - self.product)))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for k, (factor, prod) in enumerate(zip(self.factors, self.products[1:], strict=True)):
            rows.append(
                {
                    "interval": k,
                    "t_start": self.partition[k],
                    "t_end": self.partition[k + 1],
                    "factor_norm": float(np.max(_operator_norm(factor))),
                    "accumulated_norm": float(np.max(_operator_norm(prod))),
                },
            )
        return pd.DataFrame(rows, columns=["interval", "t_start", "t_end", "factor_norm", "accumulated_norm"])

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def flow_jacobian(fc: FlowComposition, x: Any) -> DerivativeRecord:
    """Chain rule across the partition of ``fc``."""
    y = np.asarray(x, dtype=float)
    if y.shape[-1] != fc.dim:
        raise DimensionMismatchError("point dimension", y.shape[-1], fc.dim)
    eye = np.broadcast_to(np.eye(fc.dim), (*y.shape[:-1], fc.dim, fc.dim)).copy()
    points, factors, products = [y], [], [eye]
    for local in fc.local_maps:
        y, factor = local.with_jacobian(y)
        points.append(y)
        factors.append(factor)
        products.append(factor @ products[-1])
    record = DerivativeRecord(fc.partition, tuple(points), tuple(factors), tuple(products))
    defect = record.remultiply_defect()
    if defect > REMULTIPLY_TOLERANCE:
        logger.warning("Jacobian product drifts by %.3e on re-multiplication", defect)
    return record


def second_derivative(fc: FlowComposition, x: Any, h: float = 1e-4) -> np.ndarray:
    """D^2 phi(x) by central differences of the Jacobian; entry [i, j, k] is d_k (D phi)_{ij}."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        msg = "second_derivative takes a single point"
        raise ValueError(msg)
    out = np.zeros((fc.dim, fc.dim, fc.dim))
    for k in range(fc.dim):
        shift = np.zeros(fc.dim)
        shift[k] = h
        plus = flow_jacobian(fc, x + shift).product
        minus = flow_jacobian(fc, x - shift).product
        out[:, :, k] = (plus - minus) / (2.0 * h)
    return out


# =============================================================================
# PARAMETERS
# =============================================================================

@dataclass(frozen=True)
class ParameterSensitivity:
    """phi(a0, x) with its derivatives in the parameters (d x m) and the state (d x d)."""

    a0: tuple[float, ...]
    x: tuple[float, ...]
    value: np.ndarray = field(repr=False)
    d_a: np.ndarray = field(repr=False)
    d_x: np.ndarray = field(repr=False)


def augment_field(components: Sequence[ScalarField], n_params: int) -> PolyVectorField:
    """Field on (a, x) with a' = 0 and the given state components."""
    comps = list(components)
    if not comps:
        msg = "A parametrised field needs at least one state component"
        raise ValueError(msg)
    dim = comps[0].dim
    if dim != n_params + len(comps):
        raise DimensionMismatchError("parametrised field arity", dim, n_params + len(comps))
    return PolyVectorField([ScalarField(dim) for _ in range(n_params)] + comps)


def parameter_sensitivity(
    driver: RoughDriver,
    fields: Sequence[Sequence[ScalarField]],
    v0: Sequence[ScalarField] | None,
    a0: Sequence[float],
    s: float,
    t: float,
    x: Sequence[float],
    config: SolverConfig | None = None,
) -> ParameterSensitivity:
    """D_a phi_{ts}(a0, x) through the augmented state (a, x).

    Each field is the list of its state components, written as functions of
    the m + d coordinates (a_1, ..., a_m, x_1, ..., x_d).
    """
    a0 = np.asarray(a0, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    m, d = a0.size, x.size
    aug_fields = [augment_field(f, m) for f in fields]
    aug_v0 = None if v0 is None else augment_field(v0, m)
    start = np.concatenate([a0, x])
    fc = solve_flow(driver, aug_fields, aug_v0, s, t, config, points=start[None, :], check_assumptions=False)
    record = flow_jacobian(fc, start)
    jac = record.product
    value = record.points[-1][m:]
    logger.info("Parameter sensitivity at a0=%s: |D_a phi| = %.4g", a0.tolist(), float(np.linalg.norm(jac[m:, :m])))
    return ParameterSensitivity(
        a0=tuple(a0.tolist()),
        x=tuple(x.tolist()),
        value=value,
        d_a=jac[m:, :m].copy(),
        d_x=jac[m:, m:].copy(),
    )


# =============================================================================
# GROWTH OF THE DERIVATIVE
# =============================================================================

@dataclass(frozen=True)
class DerivativeGrowthReport:
    """|D phi - I| against the bound shape w^{1/p} e^{c N_beta} for one horizon."""

    deviation: float
    n_beta: int
    control: float
    p: float

    @property
    def log_deviation(self) -> float:
        return math.log(self.deviation) if self.deviation > 0 else -math.inf

    @property
    def log_scale(self) -> float:
        return math.log(self.control) / self.p if self.control > 0 else -math.inf

    @property
    def excess(self) -> float:
        """log |D phi - I| - log w^{1/p}, the quantity bounded by c N_beta."""
        if not (math.isfinite(self.log_deviation) and math.isfinite(self.log_scale)):
            return math.nan
        return self.log_deviation - self.log_scale

    def summary(self) -> dict[str, Any]:
        return {
            "deviation": self.deviation,
            "n_beta": self.n_beta,
            "control": self.control,
            "excess": self.excess,
        }


def derivative_growth_check(record: DerivativeRecord, n_beta: int, control: float, p: float) -> DerivativeGrowthReport:
    return DerivativeGrowthReport(deviation=record.deviation, n_beta=int(n_beta), control=float(control), p=float(p))


@dataclass(frozen=True)
class DerivativeGrowthFit:
    """Regressions over a family of stretched horizons."""

    deviation_fit: LineFit
    excess_fit: LineFit

    @property
    def c1(self) -> float:
        return self.excess_fit.slope

    def summary(self) -> dict[str, Any]:
        return {
            "c1": self.c1,
            "deviation_fit": self.deviation_fit.summary(),
            "excess_fit": self.excess_fit.summary(),
        }


def fit_derivative_growth(reports: Sequence[DerivativeGrowthReport]) -> DerivativeGrowthFit:
    """Fit log |D phi - I| and its excess over log w^{1/p} against N_beta."""
    n_beta = [r.n_beta for r in reports]
    deviation_fit = fit_line(n_beta, [r.log_deviation for r in reports])
    excess_fit = fit_line(n_beta, [r.excess for r in reports])
    logger.info("Derivative growth: c1=%.4f (R^2 %.4f)", excess_fit.slope, deviation_fit.r_squared)
    return DerivativeGrowthFit(deviation_fit, excess_fit)
