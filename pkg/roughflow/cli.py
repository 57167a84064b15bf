#!/usr/bin/env python3
"""Scenario runner.

``roughflow <command> [--config FILE] [--out DIR] [--seed INT] [--override k=v]``

Every command writes its artifacts plus a ``manifest.json`` echoing the
resolved scenario and solver configuration into the output directory.
Exit codes: 0 success, 2 unexpected (or missing expected) blow-up, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import SolverConfig, parse_overrides, resolve_config
from .derivative_flow import flow_jacobian
from .errors import AssumptionViolationError, ExplosionError, RoughFlowError, ScenarioError
from .flow_builder import dyadic_defect_study, solve_flow
from .logode_step import taylor_remainder
from .rough_path import RoughDriver, accumulation, control_table, load_driver, save_driver, signature_lift
from .sampling import ball_sample
from .scenarios import Scenario, build_scenario
from .tensor_algebra import check_weak_geometric
from .vector_fields import PolyVectorField, assumption_audit, load_fields

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BLOWUP = 2
EXIT_INPUT = 3

COMMANDS = ("lift", "audit", "solve", "converge", "remainder", "nbeta", "explode", "jacobian")
CSV_FORMAT = "%.17g"


class ScenarioSpec(BaseModel):
    """Contents of a ``--config`` file; every field is optional."""

    model_config = ConfigDict(extra="forbid")

    scenario: str | None = None
    params: dict[str, float | int] = Field(default_factory=dict)
    path_file: Path | None = None
    driver_file: Path | None = None
    fields_file: Path | None = None
    solver: dict[str, Any] = Field(default_factory=dict)
    points: list[list[float]] | None = None
    interval: tuple[float, float] | None = None
    radius: float = Field(default=1.0, gt=0.0)
    n_min: int = Field(default=0, ge=0)
    n_max: int = Field(default=6, ge=0)
    fit_from: int = Field(default=0, ge=0)
    hs: list[float] = Field(default_factory=lambda: [0.5, 0.25, 0.125, 0.0625, 0.03125])
    depth: int = Field(default=2, ge=1)
    p: float | None = None
    expect_explosion: bool | None = None


@dataclass
class RunContext:
    """Everything a command needs, resolved once."""

    command: str
    spec: ScenarioSpec
    config: SolverConfig
    out: Path
    scenario: Scenario | None = None
    driver: RoughDriver | None = None
    fields: tuple[PolyVectorField, ...] = ()
    v0: PolyVectorField | None = None
    outputs: list[str] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)

    def require_system(self) -> tuple[RoughDriver, tuple[PolyVectorField, ...], PolyVectorField | None]:
        if self.driver is None or not self.fields:
            msg = f"'{self.command}' needs a scenario or both driver_file and fields_file"
            raise ScenarioError(msg)
        return self.driver, self.fields, self.v0

    def interval(self) -> tuple[float, float]:
        driver, _, _ = self.require_system()
        if self.spec.interval is not None:
            return self.spec.interval
        return driver.start, driver.end

    def points(self) -> np.ndarray:
        if self.spec.points is not None:
            return np.asarray(self.spec.points, dtype=float)
        if self.scenario is not None and self.scenario.points is not None:
            return self.scenario.points
        _, fields, _ = self.require_system()
        return ball_sample(fields[0].dim, self.config.sample_points, self.config.radius, self.config.seed)

    def expect_explosion(self) -> bool:
        if self.spec.expect_explosion is not None:
            return self.spec.expect_explosion
        return self.command == "explode" or (self.scenario is not None and self.scenario.expect_explosion)

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.out / name
        frame.to_csv(path, index=False, float_format=CSV_FORMAT)
        self.outputs.append(name)
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        self.outputs.append(name)
        return path


# =============================================================================
# INPUT
# =============================================================================

def _read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text())


def load_spec(config_file: Path | None, scenario: str | None, params: dict[str, Any]) -> ScenarioSpec:
    data = _read_json(config_file) if config_file is not None else {}
    if not isinstance(data, dict):
        msg = f"{config_file} must contain a JSON object"
        raise ScenarioError(msg)
    if scenario is not None:
        data["scenario"] = scenario
    if params:
        data["params"] = {**data.get("params", {}), **params}
    return ScenarioSpec.model_validate(data)


def build_context(command: str, spec: ScenarioSpec, out: Path, seed: int | None, overrides: dict[str, Any]) -> RunContext:
    if command == "explode" and spec.scenario is None:
        spec = spec.model_copy(update={"scenario": "counterexample"})
    scenario = build_scenario(spec.scenario, **spec.params) if spec.scenario else None

    driver = scenario.driver if scenario else None
    fields = scenario.fields if scenario else ()
    v0 = scenario.v0 if scenario else None
    if spec.driver_file is not None:
        driver = load_driver(spec.driver_file)
    if spec.fields_file is not None:
        loaded, v0 = load_fields(spec.fields_file)
        fields = tuple(loaded)

    layers: list[dict[str, Any]] = []
    if scenario is not None:
        layers.append(scenario.config.model_dump(exclude_unset=True))
    elif driver is not None:
        layers.append({"p": driver.p})
    layers += [spec.solver, overrides]
    if seed is not None:
        layers.append({"seed": seed})
    config = resolve_config(*layers)
    return RunContext(command, spec, config, out, scenario, driver, tuple(fields), v0)


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_lift(ctx: RunContext) -> int:
    if ctx.spec.path_file is None:
        msg = "'lift' needs path_file with {\"times\": [...], \"points\": [[...], ...]}"
        raise ScenarioError(msg)
    data = _read_json(ctx.spec.path_file)
    driver = signature_lift(data["points"], data["times"], ctx.spec.depth, ctx.spec.p)
    save_driver(driver, ctx.out / "driver.json")
    ctx.outputs.append("driver.json")
    report = check_weak_geometric(driver.signature(driver.start, driver.end))
    ctx.results["lift"] = {"n_cells": driver.n_cells, "width": driver.width, "p": driver.p, "shuffle": report.summary()}
    return EXIT_OK


def cmd_audit(ctx: RunContext) -> int:
    if not ctx.fields:
        msg = "'audit' needs a scenario or fields_file"
        raise ScenarioError(msg)
    horizon = ctx.driver.end if ctx.driver is not None else 1.0
    report = assumption_audit(
        ctx.v0, ctx.fields, ctx.config.p, alpha=ctx.config.audit_alpha, horizon=horizon, seed=ctx.config.seed,
    )
    ctx.write_csv("audit.csv", report.to_frame())
    ctx.results["audit"] = report.summary()
    return EXIT_OK


def _solve(ctx: RunContext) -> tuple[Any, int]:
    driver, fields, v0 = ctx.require_system()
    s, t = ctx.interval()
    points = ctx.points()
    try:
        fc = solve_flow(driver, fields, v0, s, t, ctx.config, points=points)
    except ExplosionError as exc:
        ctx.write_json("explosion.json", exc.report.to_dict())
        ctx.results["explosion"] = exc.report.to_dict()
        if ctx.expect_explosion():
            logger.info("Explosion detected as expected near t=%.6g", exc.report.t_star_estimate)
            return None, EXIT_OK
        logger.error("Unexpected explosion: %s", exc)
        return None, EXIT_BLOWUP
    ctx.results["flow"] = fc.summary()
    if ctx.expect_explosion():
        ctx.write_csv("flow.csv", fc.to_frame(points))
        logger.error("Expected an explosion but the flow stayed finite on [%g, %g]", s, t)
        return fc, EXIT_BLOWUP
    return fc, EXIT_OK


def cmd_solve(ctx: RunContext) -> int:
    fc, code = _solve(ctx)
    if fc is not None and code == EXIT_OK:
        ctx.write_csv("flow.csv", fc.to_frame(ctx.points()))
    return code


def cmd_converge(ctx: RunContext) -> int:
    driver, fields, v0 = ctx.require_system()
    s, t = ctx.interval()
    study = dyadic_defect_study(
        driver, fields, v0, s, t, ctx.spec.radius, ctx.spec.n_max, ctx.config,
        n_min=ctx.spec.n_min, fit_from=ctx.spec.fit_from,
    )
    ctx.write_csv("defects.csv", study.to_frame())
    ctx.results["converge"] = study.summary()
    return EXIT_OK


def cmd_remainder(ctx: RunContext) -> int:
    driver, fields, v0 = ctx.require_system()
    s, _ = ctx.interval()
    report = taylor_remainder(driver, fields, v0, s, ctx.spec.hs, radius=ctx.spec.radius, config=ctx.config)
    ctx.write_csv("remainder.csv", report.to_frame())
    ctx.results["remainder"] = report.summary()
    return EXIT_OK


def cmd_nbeta(ctx: RunContext) -> int:
    driver, _, _ = ctx.require_system() if ctx.fields else (ctx.driver, (), None)
    if driver is None:
        msg = "'nbeta' needs a scenario or driver_file"
        raise ScenarioError(msg)
    s, t = ctx.spec.interval or (driver.start, driver.end)
    table = control_table(driver.restrict(s, t))
    report = accumulation(table, ctx.config.beta)
    ctx.write_csv("control.csv", table.to_frame())
    ctx.write_csv(
        "accumulation.csv",
        pd.DataFrame({"index": report.stopping_indices, "time": report.stopping_times}),
    )
    ctx.results["nbeta"] = report.summary()
    return EXIT_OK


def cmd_jacobian(ctx: RunContext) -> int:
    fc, code = _solve(ctx)
    if fc is None or code != EXIT_OK:
        return code
    record = flow_jacobian(fc, ctx.points())
    ctx.write_csv("jacobian.csv", record.to_frame())
    ctx.results["jacobian"] = {
        "deviation": record.deviation,
        "remultiply_defect": record.remultiply_defect(),
        "determinant_min": float(np.min(np.linalg.det(record.product))),
    }
    return EXIT_OK


HANDLERS: dict[str, Callable[[RunContext], int]] = {
    "lift": cmd_lift,
    "audit": cmd_audit,
    "solve": cmd_solve,
    "converge": cmd_converge,
    "remainder": cmd_remainder,
    "nbeta": cmd_nbeta,
    "explode": cmd_solve,
    "jacobian": cmd_jacobian,
}


def run(ctx: RunContext) -> int:
    """Execute one command and write its manifest."""
    ctx.out.mkdir(parents=True, exist_ok=True)
    code = HANDLERS[ctx.command](ctx)
    manifest = {
        "command": ctx.command,
        "spec": ctx.spec.model_dump(mode="json"),
        "config": ctx.config.summary(),
        "outputs": sorted(ctx.outputs),
        "results": ctx.results,
        "exit_code": code,
    }
    ctx.write_json("manifest.json", manifest)
    logger.info("%s finished with exit code %d, outputs in %s", ctx.command, code, ctx.out)
    return code


# =============================================================================
# ENTRY POINT
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roughflow", description="Log-ODE flows of rough differential equations.")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, default=None, help="JSON scenario file")
        cmd.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
        cmd.add_argument("--seed", type=int, default=None, help="Seed of the ball sampling")
        cmd.add_argument("--scenario", default=None, help="Builtin scenario name")
        cmd.add_argument("--param", action="append", default=[], help="Scenario parameter k=v")
        cmd.add_argument("--override", action="append", default=[], help="Solver setting k=v")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        spec = load_spec(args.config, args.scenario, parse_overrides(args.param))
        ctx = build_context(args.command, spec, args.out, args.seed, parse_overrides(args.override))
        return run(ctx)
    except json.JSONDecodeError as exc:
        logger.error("Malformed JSON at line %d column %d: %s", exc.lineno, exc.colno, exc.msg)
        return EXIT_INPUT
    except ValidationError as exc:
        logger.error("Invalid input: %s", exc)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        logger.error("Missing input file: %s", exc.filename)
        return EXIT_INPUT
    except AssumptionViolationError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except (RoughFlowError, ValueError, KeyError) as exc:
        logger.error("Input error: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
