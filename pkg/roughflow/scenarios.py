#!/usr/bin/env python3
"""Builtin systems used by the command line runner and the test-suite.

Each factory returns a ready-to-solve ``Scenario``: driver, vector fields,
solver configuration and the probe points the runner reports on.
"""

from __future__ import annotations

import inspect
import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import SolverConfig
from .errors import ScenarioError
from .flow_builder import FlowComposition, solve_flow
from .rough_path import RoughDriver, pure_area_driver, signature_lift
from .vector_fields import PolyVectorField, ScalarField

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A rough differential equation with the settings it is meant to be run with."""

    name: str
    driver: RoughDriver
    fields: tuple[PolyVectorField, ...]
    v0: PolyVectorField | None
    config: SolverConfig
    points: np.ndarray | None = field(default=None, repr=False)
    expect_explosion: bool = False
    description: str = ""
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.fields[0].dim

    def system(self) -> tuple[RoughDriver, tuple[PolyVectorField, ...], PolyVectorField | None]:
        return self.driver, self.fields, self.v0

    def solve(self, config: SolverConfig | None = None) -> FlowComposition:
        return solve_flow(
            self.driver, self.fields, self.v0, self.driver.start, self.driver.end,
            config or self.config, points=self.points,
        )


# =============================================================================
# PATHS
# =============================================================================

def smooth_path_driver(horizon: float, n_cells: int, p: float = 2.5, amplitude: float = 0.3) -> RoughDriver:
    """Canonical lift of a small smooth planar loop sampled on a uniform grid."""
    times = np.linspace(0.0, horizon, n_cells + 1)
    points = amplitude * np.column_stack([np.sin(2.0 * times), 1.0 - np.cos(3.0 * times)])
    return signature_lift(points, times, int(p), p)


def _uniform_cells(horizon: float, spacing: float) -> int:
    return max(1, int(round(horizon / spacing)))


# =============================================================================
# FACTORY FUNCTIONS
# =============================================================================

def constant_drift_scenario(c: float = 0.5, horizon: float = 1.0, n_cells: int = 4) -> Scenario:
    """dY = c dt with an idle driver; phi_{T,0}(x) = x + c T."""
    times = np.linspace(0.0, horizon, n_cells + 1)
    driver = signature_lift(np.zeros((n_cells + 1, 1)), times, 2, 2.5)
    return Scenario(
        name="constant_drift",
        driver=driver,
        fields=(PolyVectorField.zeros(1),),
        v0=PolyVectorField.constant([c]),
        config=SolverConfig(p=2.5, substeps=4, sample_points=16),
        points=np.array([[-1.0], [0.0], [0.5], [2.0]]),
        description="Constant drift, exact translation by c T",
        params={"c": c, "horizon": horizon, "n_cells": n_cells},
    )


def compliant_fields() -> tuple[PolyVectorField, PolyVectorField]:
    """V1 = (1, 0.5 sin x1), V2 = (0.5 cos x2, 1): bounded with bounded derivatives."""
    v1 = PolyVectorField([ScalarField.constant(2, 1.0), ScalarField.monomial(2, 0.5, sin={0: 1})])
    v2 = PolyVectorField([ScalarField.monomial(2, 0.5, cos={1: 1}), ScalarField.constant(2, 1.0)])
    return v1, v2


def compliant_scenario(horizon: float = 1.0, n_cells: int = 16, p: float = 2.5) -> Scenario:
    return Scenario(
        name="compliant",
        driver=smooth_path_driver(horizon, n_cells, p),
        fields=compliant_fields(),
        v0=None,
        config=SolverConfig(p=p, substeps=8, sample_points=32, radius=1.0),
        description="Bounded trigonometric fields driven by a smooth planar loop",
        params={"horizon": horizon, "n_cells": n_cells, "p": p},
    )


LINEAR_COMMUTING_MATRICES = (
    np.array([[0.2, 0.1], [0.1, 0.2]]),
    np.array([[0.3, -0.1], [-0.1, 0.3]]),
)


def linear_commuting_scenario(horizon: float = 1.0, n_cells: int = 16) -> Scenario:
    """V_j(x) = A_j x with commuting A_j; phi(x) = exp(A1 dX1 + A2 dX2) x."""
    fields = tuple(PolyVectorField.linear(a) for a in LINEAR_COMMUTING_MATRICES)
    return Scenario(
        name="linear_commuting",
        driver=smooth_path_driver(horizon, n_cells),
        fields=fields,
        v0=None,
        config=SolverConfig(p=2.5, substeps=8, sample_points=32, radius=1.0),
        description="Commuting linear fields with a matrix exponential flow",
        params={"horizon": horizon, "n_cells": n_cells},
    )


def scalar_linear_scenario(horizon: float = 1.0, spacing: float = 0.125) -> Scenario:
    """dY = Y dX with X_t = t; phi_{T,0}(x) = x e^T."""
    n_cells = _uniform_cells(horizon, spacing)
    times = np.linspace(0.0, horizon, n_cells + 1)
    driver = signature_lift(times[:, None], times, 2, 2.5)
    return Scenario(
        name="scalar_linear",
        driver=driver,
        fields=(PolyVectorField.identity(1),),
        v0=None,
        config=SolverConfig(p=2.5, substeps=8, sample_points=16, radius=1.0),
        points=np.array([[1.0], [-0.5], [2.0]]),
        description="Scalar linear equation with a monotone driver",
        params={"horizon": horizon, "spacing": spacing},
    )


def counterexample_fields() -> tuple[PolyVectorField, PolyVectorField]:
    """V1(x, y) = (x sin y, x), V2 = 0: linear growth but unbounded derivatives."""
    v1 = PolyVectorField([ScalarField.monomial(2, 1.0, (1, 0), sin={1: 1}), ScalarField.coordinate(2, 0)])
    return v1, PolyVectorField.zeros(2)


def counterexample_scenario(a: float = 1.0, n_cells: int = 64) -> Scenario:
    """Pure area driver e1 (x) e1 pushes x' = x^2 from (a, 0); blow-up at t = 1/a."""
    if a <= 0:
        msg = f"counterexample needs a > 0, got {a}"
        raise ScenarioError(msg)
    driver = pure_area_driver(2.0 / a, n_cells, [[1.0, 0.0], [0.0, 0.0]], p=2.5)
    return Scenario(
        name="counterexample",
        driver=driver,
        fields=counterexample_fields(),
        v0=None,
        config=SolverConfig(p=2.5, allow_audit_failures=True, sample_points=1),
        points=np.array([[a, 0.0]]),
        expect_explosion=True,
        description="Linear-growth fields whose solution explodes in finite time",
        params={"a": a, "n_cells": n_cells},
    )


def bounded_fields(amplitude: float = 0.02) -> tuple[PolyVectorField, PolyVectorField]:
    """V1 = (1, 0), V2 = (0, 1 + amplitude sin x1)."""
    v1 = PolyVectorField.constant([1.0, 0.0])
    v2 = PolyVectorField([ScalarField(2), ScalarField.constant(2, 1.0) + ScalarField.monomial(2, amplitude, sin={0: 1})])
    return v1, v2


def bounded_scenario(horizon: float = 1.0, spacing: float = 0.125) -> Scenario:
    return Scenario(
        name="bounded",
        driver=smooth_path_driver(horizon, _uniform_cells(horizon, spacing)),
        fields=bounded_fields(),
        v0=None,
        config=SolverConfig(p=2.5, substeps=8, sample_points=16, radius=1.0),
        description="Nearly constant bounded fields for growth sweeps",
        params={"horizon": horizon, "spacing": spacing},
    )


BUILTIN_SCENARIOS: dict[str, Callable[..., Scenario]] = {
    "constant_drift": constant_drift_scenario,
    "compliant": compliant_scenario,
    "linear_commuting": linear_commuting_scenario,
    "scalar_linear": scalar_linear_scenario,
    "counterexample": counterexample_scenario,
    "bounded": bounded_scenario,
}


def build_scenario(name: str, **params: Any) -> Scenario:
    """Instantiate a builtin scenario, rejecting unknown names and parameters."""
    try:
        factory = BUILTIN_SCENARIOS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_SCENARIOS))
        msg = f"Unknown scenario {name!r}; known scenarios: {known}"
        raise ScenarioError(msg) from None
    accepted = set(inspect.signature(factory).parameters)
    unknown = set(params) - accepted
    if unknown:
        msg = f"Scenario {name!r} does not take parameters {sorted(unknown)}"
        raise ScenarioError(msg)
    logger.debug("Building scenario %s with %s", name, params)
    return factory(**params)


def create_default_scenarios() -> dict[str, Scenario]:
    """Every builtin scenario with its default parameters."""
    return {name: factory() for name, factory in BUILTIN_SCENARIOS.items()}
