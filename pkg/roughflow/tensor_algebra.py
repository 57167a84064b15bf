#!/usr/bin/env python3
"""Truncated tensor algebra over R^width.

Level k of a series is a flat float64 array of length width**k. A word
(i1, ..., ik) over the 0-based alphabet {0..width-1} sits at the base-width
index with i1 as the most significant digit, so ``np.outer(a_i, b_j).ravel()``
is exactly word concatenation.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np

from .errors import DimensionMismatchError, LevelZeroError, WordIndexError

logger = logging.getLogger(__name__)

# Tolerance on the scalar level for group-like inputs to log
GROUP_LIKE_TOLERANCE = 1e-12
# Default tolerance of the shuffle identity check
SHUFFLE_TOLERANCE = 1e-10


# =============================================================================
# WORDS
# =============================================================================

def word_index(word: Sequence[int], width: int) -> int:
    """Position of ``word`` inside its level block."""
    index = 0
    for letter in word:
        if not 0 <= letter < width:
            raise WordIndexError(tuple(word), width)
        index = index * width + int(letter)
    return index


@lru_cache(maxsize=64)
def words(width: int, length: int) -> tuple[tuple[int, ...], ...]:
    """All words of the given length in block order."""
    return tuple(itertools.product(range(width), repeat=length))


def all_words(width: int, depth: int) -> list[tuple[int, ...]]:
    """Non-empty words up to ``depth`` ordered by length, then block order."""
    return [w for k in range(1, depth + 1) for w in words(width, k)]


@lru_cache(maxsize=4096)
def shuffles(left: tuple[int, ...], right: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Shuffle product of two words as a list with multiplicity."""
    if not left:
        return (right,)
    if not right:
        return (left,)
    head_left = tuple((left[0], *w) for w in shuffles(left[1:], right))
    head_right = tuple((right[0], *w) for w in shuffles(left, right[1:]))
    return head_left + head_right


# =============================================================================
# SERIES
# =============================================================================

class TruncatedTensorSeries:
    """Immutable element of the truncated tensor algebra T^depth(R^width)."""

    __slots__ = ("depth", "levels", "width")

    def __init__(self, width: int, depth: int, levels: Sequence[Any]):
        if width < 1 or depth < 1:
            msg = f"width and depth must be positive, got width={width}, depth={depth}"
            raise ValueError(msg)
        if len(levels) != depth + 1:
            raise DimensionMismatchError("number of levels", len(levels), depth + 1)
        blocks = []
        for k, block in enumerate(levels):
            arr = np.array(block, dtype=float).reshape(-1)
            if arr.size != width**k:
                raise DimensionMismatchError(f"level {k} size", arr.size, width**k)
            arr.setflags(write=False)
            blocks.append(arr)
        self.width = int(width)
        self.depth = int(depth)
        self.levels: tuple[np.ndarray, ...] = tuple(blocks)

    # -- constructors ---------------------------------------------------------

    @classmethod
    def unit(cls, width: int, depth: int) -> TruncatedTensorSeries:
        """The group identity (1, 0, ..., 0)."""
        levels = [np.ones(1)] + [np.zeros(width**k) for k in range(1, depth + 1)]
        return cls(width, depth, levels)

    @classmethod
    def zero(cls, width: int, depth: int) -> TruncatedTensorSeries:
        """The zero element, i.e. the Lie-algebra origin."""
        return cls(width, depth, [np.zeros(width**k) for k in range(depth + 1)])

    @classmethod
    def from_increment(cls, increment: Sequence[float], depth: int) -> TruncatedTensorSeries:
        """Signature of a straight segment: exp of the increment at level 1."""
        inc = np.asarray(increment, dtype=float).reshape(-1)
        width = inc.size
        levels = [np.ones(1)]
        block = np.ones(1)
        for k in range(1, depth + 1):
            block = np.outer(block, inc).ravel() / k
            levels.append(block)
        return cls(width, depth, levels)

    @classmethod
    def lie_element(
        cls, width: int, depth: int, coefficients: dict[tuple[int, ...], float],
    ) -> TruncatedTensorSeries:
        """Build a level-0-free series from word coefficients."""
        levels = [np.zeros(width**k) for k in range(depth + 1)]
        for word, value in coefficients.items():
            if not 1 <= len(word) <= depth:
                raise DimensionMismatchError("word length", len(word), f"1..{depth}")
            levels[len(word)][word_index(word, width)] += value
        return cls(width, depth, levels)

    # -- accessors ------------------------------------------------------------

    def coefficient(self, word: Sequence[int]) -> float:
        """Coefficient of a word; the empty word is level 0."""
        if len(word) > self.depth:
            raise DimensionMismatchError("word length", len(word), f"<= {self.depth}")
        return float(self.levels[len(word)][word_index(word, self.width)])

    def level_norm(self, k: int) -> float:
        """Euclidean norm of the level-k block."""
        return float(np.linalg.norm(self.levels[k]))

    @property
    def scalar(self) -> float:
        return float(self.levels[0][0])

    def is_group_like(self, tol: float = GROUP_LIKE_TOLERANCE) -> bool:
        return abs(self.scalar - 1.0) <= tol

    def is_lie_like(self, tol: float = GROUP_LIKE_TOLERANCE) -> bool:
        return abs(self.scalar) <= tol

    # -- arithmetic -----------------------------------------------------------

    def _check_compatible(self, other: TruncatedTensorSeries) -> None:
        if self.width != other.width:
            raise DimensionMismatchError("width", self.width, other.width)
        if self.depth != other.depth:
            raise DimensionMismatchError("depth", self.depth, other.depth)

    def __add__(self, other: TruncatedTensorSeries) -> TruncatedTensorSeries:
        self._check_compatible(other)
        return TruncatedTensorSeries(
            self.width, self.depth, [a + b for a, b in zip(self.levels, other.levels, strict=True)],
        )

    def __sub__(self, other: TruncatedTensorSeries) -> TruncatedTensorSeries:
        self._check_compatible(other)
        return TruncatedTensorSeries(
            self.width, self.depth, [a - b for a, b in zip(self.levels, other.levels, strict=True)],
        )

    def scale(self, factor: float) -> TruncatedTensorSeries:
        return TruncatedTensorSeries(self.width, self.depth, [factor * a for a in self.levels])

    def __rmul__(self, factor: float) -> TruncatedTensorSeries:
        return self.scale(float(factor))

    def __mul__(self, other: TruncatedTensorSeries | float) -> TruncatedTensorSeries:
        if isinstance(other, TruncatedTensorSeries):
            return tensor_mul(self, other)
        return self.scale(float(other))

    def __matmul__(self, other: TruncatedTensorSeries) -> TruncatedTensorSeries:
        return tensor_mul(self, other)

    def max_abs_diff(self, other: TruncatedTensorSeries) -> float:
        self._check_compatible(other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.levels, other.levels, strict=True))

    def power(self, fraction: float) -> TruncatedTensorSeries:
        """exp(fraction * log g) for a group-like g."""
        return tensor_exp(tensor_log(self).scale(fraction))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TruncatedTensorSeries):
            return NotImplemented
        return (
            self.width == other.width
            and self.depth == other.depth
            and all(np.array_equal(a, b) for a, b in zip(self.levels, other.levels, strict=True))
        )

    def __hash__(self) -> int:
        return hash((self.width, self.depth, tuple(a.tobytes() for a in self.levels)))

    def __repr__(self) -> str:
        return f"TruncatedTensorSeries(width={self.width}, depth={self.depth}, levels={[a.tolist() for a in self.levels]})"

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "width": self.width,
            "depth": self.depth,
            "levels": [a.tolist() for a in self.levels],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TruncatedTensorSeries:
        return cls(int(data["width"]), int(data["depth"]), data["levels"])


# =============================================================================
# PRODUCT, EXPONENTIAL, LOGARITHM
# =============================================================================

def tensor_mul(a: TruncatedTensorSeries, b: TruncatedTensorSeries) -> TruncatedTensorSeries:
    """Truncated product; for signatures this is Chen's concatenation."""
    a._check_compatible(b)
    levels = []
    for k in range(a.depth + 1):
        block = np.zeros(a.width**k)
        for i in range(k + 1):
            left = a.levels[i]
            right = b.levels[k - i]
            if not left.any() or not right.any():
                continue
            block += np.outer(left, right).ravel()
        levels.append(block)
    return TruncatedTensorSeries(a.width, a.depth, levels)


def tensor_exp(lie: TruncatedTensorSeries) -> TruncatedTensorSeries:
    """Truncated exponential sum_k lie^k / k! of a level-0-free element."""
    if not lie.is_lie_like():
        raise LevelZeroError("tensor_exp", lie.scalar, 0.0)
    result = TruncatedTensorSeries.unit(lie.width, lie.depth)
    term = result
    for k in range(1, lie.depth + 1):
        term = tensor_mul(term, lie).scale(1.0 / k)
        result = result + term
    return result


def tensor_log(group: TruncatedTensorSeries) -> TruncatedTensorSeries:
    """Truncated logarithm sum_k (-1)^(k+1) (g-1)^k / k of a group-like g."""
    if not group.is_group_like():
        raise LevelZeroError("tensor_log", group.scalar, 1.0)
    unit = TruncatedTensorSeries.unit(group.width, group.depth)
    excess = group - unit
    result = TruncatedTensorSeries.zero(group.width, group.depth)
    power = unit
    for k in range(1, group.depth + 1):
        power = tensor_mul(power, excess)
        sign = 1.0 if k % 2 == 1 else -1.0
        result = result + power.scale(sign / k)
    return result


# =============================================================================
# GEOMETRICITY
# =============================================================================

@dataclass(frozen=True)
class ShuffleReport:
    """Outcome of the shuffle identity check."""

    max_violation: float
    passed: bool
    tol: float
    worst_pair: tuple[tuple[int, ...], tuple[int, ...]] | None
    pairs_checked: int
    group_like: bool = True

    def summary(self) -> dict[str, Any]:
        return {
            "max_violation": self.max_violation,
            "passed": self.passed,
            "tol": self.tol,
            "worst_pair": None if self.worst_pair is None else [list(w) for w in self.worst_pair],
            "pairs_checked": self.pairs_checked,
            "group_like": self.group_like,
        }


def check_weak_geometric(
    group: TruncatedTensorSeries, tol: float = SHUFFLE_TOLERANCE,
) -> ShuffleReport:
    """Check X^I X^J = sum over shuffles K of X^K for |I| + |J| <= depth."""
    if not group.is_group_like():
        logger.warning("Shuffle check on a non group-like element (level 0 = %g)", group.scalar)
        return ShuffleReport(
            max_violation=abs(group.scalar - 1.0),
            passed=False,
            tol=tol,
            worst_pair=None,
            pairs_checked=0,
            group_like=False,
        )

    worst = 0.0
    worst_pair = None
    checked = 0
    for n_left in range(1, group.depth):
        for n_right in range(n_left, group.depth - n_left + 1):
            for left in words(group.width, n_left):
                for right in words(group.width, n_right):
                    lhs = group.coefficient(left) * group.coefficient(right)
                    counts = Counter(shuffles(left, right))
                    rhs = math.fsum(m * group.coefficient(k) for k, m in counts.items())
                    violation = abs(lhs - rhs)
                    checked += 1
                    if violation > worst:
                        worst = violation
                        worst_pair = (left, right)

    return ShuffleReport(
        max_violation=worst,
        passed=worst <= tol,
        tol=tol,
        worst_pair=worst_pair,
        pairs_checked=checked,
    )


def chen_product(series: Iterable[TruncatedTensorSeries]) -> TruncatedTensorSeries:
    """Ordered product of a non-empty sequence of series."""
    iterator = iter(series)
    try:
        result = next(iterator)
    except StopIteration:
        msg = "chen_product needs at least one factor"
        raise ValueError(msg) from None
    for factor in iterator:
        result = tensor_mul(result, factor)
    return result
