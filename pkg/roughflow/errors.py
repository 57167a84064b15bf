#!/usr/bin/env python3
"""Exception hierarchy for the rough flow engine.

Every error keeps the offending values as attributes so that callers (and the
command line runner) can turn them into structured reports.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import numpy as np

if TYPE_CHECKING:
    from .flow_builder import ExplosionReport


class RoughFlowError(Exception):
    """Base class for all engine errors."""


class DimensionMismatchError(RoughFlowError, ValueError):
    """Raised when widths, depths or state dimensions of two operands differ."""

    def __init__(self, what: str, left: Any, right: Any):
        self.what = what
        self.left = left
        self.right = right
        super().__init__(f"{what} mismatch: {left} != {right}")


class LevelZeroError(RoughFlowError, ValueError):
    """Raised when exp/log receive an element with the wrong scalar level."""

    def __init__(self, operation: str, value: float, expected: float):
        self.operation = operation
        self.value = value
        self.expected = expected
        super().__init__(
            f"{operation} requires level-0 coefficient {expected}, got {value!r}",
        )


class InvalidGridError(RoughFlowError, ValueError):
    """Raised for non-increasing or otherwise malformed time grids."""


class WordIndexError(RoughFlowError, IndexError):
    """Raised when a word uses a letter outside the alphabet."""

    def __init__(self, word: tuple[int, ...], width: int):
        self.word = tuple(word)
        self.width = width
        super().__init__(f"Word {self.word} uses letters outside 0..{width - 1}")


class AssumptionViolationError(RoughFlowError):
    """Raised when fields fail the regularity/growth audit and no override is set."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        shown = ", ".join(self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"Vector fields fail the assumption audit: {shown}{more}")


class BlowUpError(RoughFlowError):
    """Raised when a step ODE leaves the blow-up guard.

    ``last_state`` is the last finite state of the offending point, ``r`` the
    step-ODE time at which the guard fired, ``history`` the recent
    ``(r, state)`` pairs of that point.
    """

    def __init__(
        self,
        last_state: np.ndarray,
        r: float,
        history: list[tuple[float, np.ndarray]],
        interval: tuple[float, float],
        point_index: int = 0,
        step_index: int | None = None,
    ):
        self.last_state = np.asarray(last_state, dtype=float)
        self.r = float(r)
        self.history = history
        self.interval = (float(interval[0]), float(interval[1]))
        self.point_index = point_index
        self.step_index = step_index
        # (time, state) at the dyadic nodes already passed, filled in by the composer
        self.node_history: list[tuple[float, np.ndarray]] = []
        super().__init__(
            f"Blow-up guard exceeded at r={self.r:.6g} in step "
            f"[{self.interval[0]:.6g}, {self.interval[1]:.6g}]",
        )

    def history_times(self) -> list[tuple[float, np.ndarray]]:
        """History with r rescaled to physical time inside the step interval."""
        s, t = self.interval
        return [(s + r * (t - s), state) for r, state in self.history]


class ExplosionError(RoughFlowError):
    """Raised by the flow solver when the solution escapes to infinity."""

    def __init__(self, report: ExplosionReport):
        self.report = report
        super().__init__(
            f"Explosion on [{report.interval[0]:.6g}, {report.interval[1]:.6g}], "
            f"estimated blow-up time {report.t_star_estimate:.6g}",
        )


class ScenarioError(RoughFlowError, ValueError):
    """Raised for malformed scenario or configuration input."""
