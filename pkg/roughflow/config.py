#!/usr/bin/env python3
"""Solver configuration.

The universal constants of the construction are never known numerically, so
the ones that drive the algorithm are exposed here as tunables. Values are
merged from defaults, ``ROUGHFLOW_*`` environment variables, scenario files
and command line overrides (lowest to highest precedence).
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Mapping
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

ENV_PREFIX = "ROUGHFLOW_"


class PartitionStrategy(str, Enum):
    """How the solver cuts [s, t] into locally solvable pieces."""

    HOLDER_BUDGET = "holder_budget"      # N = floor(c3 (1+|X|)^p) uniform pieces
    CONTROL_GREEDY = "control_greedy"    # greedy stopping times of the p-variation control


class StepMode(str, Enum):
    """How the log-signature is contracted against the vector fields."""

    WORD = "word"          # Lambda^I V_I Id, valid for any driver
    BRACKET = "bracket"    # Lambda^I V_[I] / |I|, geometric drivers only


class SolverConfig(BaseModel):
    """Tunables of the log-ODE flow solver."""

    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    # ROUGHNESS
    p: float = Field(default=2.5, gt=1.0)

    # PARTITIONING
    c3: float = Field(default=1.0, gt=0.0)                 # step budget constant
    beta: float = Field(default=0.25, gt=0.0)              # control mass per piece
    smallness: float = Field(default=0.5, gt=0.0)          # |t-s|^(1/p)(1+|X|) bound
    partition: PartitionStrategy = PartitionStrategy.CONTROL_GREEDY

    # DYADIC REFINEMENT
    dyadic_tolerance: float = Field(default=1e-8, gt=0.0)
    min_dyadic_level: int = Field(default=0, ge=0)
    max_dyadic_level: int = Field(default=12, ge=1)

    # STEP INTEGRATION
    substeps: int = Field(default=32, ge=1)
    blowup_guard: float = Field(default=1e8, gt=0.0)
    mode: StepMode = StepMode.WORD

    # SAMPLING OF BALLS
    sample_points: int = Field(default=256, ge=1)
    radius: float = Field(default=2.0, gt=0.0)
    seed: int = 42

    # ASSUMPTION AUDIT
    audit_alpha: float = Field(default=1.0, ge=0.0, le=1.0)
    allow_audit_failures: bool = False

    @model_validator(mode="after")
    def _check_levels(self) -> SolverConfig:
        if self.min_dyadic_level > self.max_dyadic_level:
            msg = (
                f"min_dyadic_level ({self.min_dyadic_level}) exceeds "
                f"max_dyadic_level ({self.max_dyadic_level})"
            )
            raise ValueError(msg)
        return self

    @property
    def depth(self) -> int:
        """Truncation level [p]."""
        return int(self.p)

    def with_overrides(self, **overrides: Any) -> SolverConfig:
        """Return a validated copy with the given fields replaced."""
        if not overrides:
            return self
        data = self.model_dump()
        data.update(overrides)
        return SolverConfig.model_validate(data)

    def summary(self) -> dict[str, Any]:
        """JSON-ready dump used in run manifests."""
        return self.model_dump(mode="json")


def parse_override_value(raw: str) -> Any:
    """Interpret a ``k=v`` value as JSON when possible, else keep the string."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(pairs: list[str] | None) -> dict[str, Any]:
    """Turn ``["beta=0.3", "mode=bracket"]`` into a dict."""
    result: dict[str, Any] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            msg = f"Override {pair!r} is not of the form key=value"
            raise ValueError(msg)
        result[key.strip()] = parse_override_value(value.strip())
    return result


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    """Collect ``ROUGHFLOW_<FIELD>`` variables that name a config field."""
    environ = os.environ if environ is None else environ
    known = set(SolverConfig.model_fields)
    found: dict[str, Any] = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        if name in known:
            found[name] = parse_override_value(value)
        else:
            logger.debug("Ignoring unknown environment setting %s", key)
    return found


def resolve_config(
    *layers: Mapping[str, Any] | None,
    environ: Mapping[str, str] | None = None,
) -> SolverConfig:
    """Merge defaults, environment and the given layers (later layers win)."""
    merged: dict[str, Any] = dict(env_overrides(environ))
    for layer in layers:
        if layer:
            merged.update(layer)
    config = SolverConfig.model_validate(merged)
    logger.debug("Resolved solver config: %s", config.summary())
    return config
