#!/usr/bin/env python3
"""Symbolic vector fields on R^d.

Fields are sympy expressions in the coordinates x0..x{d-1} and the time t,
built from polynomial, sin and cos factors. Differentiation, Lie brackets and
iterated first-order operators are exact; evaluation goes through
``sympy.lambdify`` with the numpy backend, which also backs the weighted-sum
evaluation used by the step integrator (``FieldFamily``).

The JSON term list

    coeff * prod_j x_j^e_j * prod_j sin(x_j)^a_j * prod_j cos(x_j)^b_j * t^k

is only the file format.

Also here: sphere-sampled growth exponents and the regularity/growth audit of
a driving system.
"""

from __future__ import annotations

import itertools
import json
import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import sympy as sp

from .errors import DimensionMismatchError, WordIndexError
from .sampling import sphere_sample
from .tensor_algebra import all_words

logger = logging.getLogger(__name__)

# Coefficients at or below this magnitude are dropped after every operation
COEFF_CLEANUP = 1e-14
# Growth exponents tried by the fit, smallest first
ALPHA_GRID = tuple(round(0.1 * k, 1) for k in range(11))
# Allowed relative rise of the max ratio between consecutive radii
GROWTH_SLACK = 1.2
# Ratios below this are treated as zero when comparing radii
RATIO_FLOOR = 1e-12
DEFAULT_RADII = (1.0, 10.0, 100.0, 1000.0)
DEFAULT_DIRECTIONS = 256

TIME = sp.Symbol("t", real=True)

Evaluator = Callable[[np.ndarray, float], np.ndarray]


# =============================================================================
# SYMBOLS AND NUMERIC EVALUATION
# =============================================================================

@lru_cache(maxsize=None)
def coordinates(dim: int) -> tuple[sp.Symbol, ...]:
    """Coordinate symbols x0..x{dim-1}."""
    if dim < 1:
        msg = f"Dimension must be >= 1, got {dim}"
        raise ValueError(msg)
    return tuple(sp.symbols(f"x0:{dim}", real=True))


@lru_cache(maxsize=None)
def term_generators(dim: int) -> tuple[sp.Expr, ...]:
    """(x_j..., sin x_j..., cos x_j..., t), the generators of the term list."""
    xs = coordinates(dim)
    return (*xs, *(sp.sin(x) for x in xs), *(sp.cos(x) for x in xs), TIME)


def _clean(expr: sp.Expr) -> sp.Expr:
    """Expanded form with float coefficients, tiny coefficients dropped."""
    expanded = sp.expand(expr)
    kept = [
        sp.Float(float(coeff)) * term
        for term, coeff in expanded.as_coefficients_dict().items()
        if abs(float(coeff)) > COEFF_CLEANUP
    ]
    return sp.Add(*kept)


def numeric_evaluator(dim: int, exprs: Sequence[sp.Expr]) -> Evaluator:
    """Batched numpy evaluation of ``exprs``; output shape (..., len(exprs))."""
    fn = sp.lambdify((*coordinates(dim), TIME), list(exprs), modules="numpy")

    def evaluate(x: np.ndarray, t: float = 0.0) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        batch = arr.shape[:-1]
        values = fn(*np.moveaxis(arr, -1, 0), float(t))
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), batch) for v in values], axis=-1)
    return evaluate


# =============================================================================
# SCALAR FIELDS
# =============================================================================

class ScalarField:
    """Immutable real function on R^d held as a sympy expression."""

    def __init__(self, dim: int, expr: Any = 0):
        self.dim = int(dim)
        cleaned = _clean(sp.sympify(expr))
        stray = cleaned.free_symbols - {*coordinates(self.dim), TIME}
        if stray:
            msg = f"Symbols {sorted(map(str, stray))} are not coordinates of R^{self.dim} or t"
            raise ValueError(msg)
        self.expr: sp.Expr = cleaned

    # -- constructors ---------------------------------------------------------

    @classmethod
    def monomial(
        cls,
        dim: int,
        coeff: float,
        exps: Sequence[int] | None = None,
        sin: Mapping[int, int] | None = None,
        cos: Mapping[int, int] | None = None,
        t_exp: int = 0,
    ) -> ScalarField:
        """Single term; ``sin={j: k}`` means sin(x_j)^k."""
        xs = coordinates(dim)
        e = tuple(exps) if exps is not None else (0,) * dim
        if len(e) != dim:
            raise DimensionMismatchError("term arity", len(e), dim)
        trig = {**(sin or {}), **(cos or {})}
        if any(j not in range(dim) for j in trig):
            msg = f"Trig factor on a coordinate outside 0..{dim - 1}: {sorted(trig)}"
            raise ValueError(msg)
        if min((*e, *(sin or {}).values(), *(cos or {}).values(), t_exp), default=0) < 0:
            msg = f"Negative exponent in term {e}, sin={sin}, cos={cos}, t^{t_exp}"
            raise ValueError(msg)
        expr = sp.Float(float(coeff)) * TIME**t_exp
        expr *= sp.Mul(*(x**k for x, k in zip(xs, e, strict=True)))
        expr *= sp.Mul(*(sp.sin(xs[j]) ** k for j, k in (sin or {}).items()))
        expr *= sp.Mul(*(sp.cos(xs[j]) ** k for j, k in (cos or {}).items()))
        return cls(dim, expr)

    @classmethod
    def constant(cls, dim: int, value: float) -> ScalarField:
        return cls.monomial(dim, value)

    @classmethod
    def coordinate(cls, dim: int, j: int) -> ScalarField:
        exps = [0] * dim
        exps[j] = 1
        return cls.monomial(dim, 1.0, exps)

    # -- algebra --------------------------------------------------------------

    def _check(self, other: ScalarField) -> None:
        if self.dim != other.dim:
            raise DimensionMismatchError("field dimension", self.dim, other.dim)

    def __add__(self, other: ScalarField) -> ScalarField:
        self._check(other)
        return ScalarField(self.dim, self.expr + other.expr)

    def __sub__(self, other: ScalarField) -> ScalarField:
        self._check(other)
        return ScalarField(self.dim, self.expr - other.expr)

    def __neg__(self) -> ScalarField:
        return self.scale(-1.0)

    def scale(self, factor: float) -> ScalarField:
        return ScalarField(self.dim, sp.Float(float(factor)) * self.expr)

    def __mul__(self, other: ScalarField | float) -> ScalarField:
        if not isinstance(other, ScalarField):
            return self.scale(float(other))
        self._check(other)
        return ScalarField(self.dim, self.expr * other.expr)

    __rmul__ = __mul__

    def diff(self, j: int) -> ScalarField:
        """Exact partial derivative in x_j."""
        if not 0 <= j < self.dim:
            msg = f"Coordinate {j} outside 0..{self.dim - 1}"
            raise IndexError(msg)
        return ScalarField(self.dim, sp.diff(self.expr, coordinates(self.dim)[j]))

    def diff_t(self) -> ScalarField:
        return ScalarField(self.dim, sp.diff(self.expr, TIME))

    def gradient(self) -> tuple[ScalarField, ...]:
        return tuple(self.diff(j) for j in range(self.dim))

    def freeze(self, time: float) -> ScalarField:
        """Substitute t = time."""
        return ScalarField(self.dim, self.expr.subs(TIME, sp.Float(float(time))))

    # -- inspection -----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.expr == 0

    @property
    def is_time_dependent(self) -> bool:
        return TIME in self.expr.free_symbols

    @cached_property
    def terms(self) -> tuple[tuple[tuple[int, ...], float], ...]:
        """(exponents over ``term_generators``, coefficient) pairs, sorted."""
        if self.is_zero:
            return ()
        try:
            poly = sp.Poly(self.expr, *term_generators(self.dim))
        except sp.PolynomialError as exc:
            msg = f"{self.expr} is not a polynomial in x, sin x, cos x and t"
            raise ValueError(msg) from exc
        return tuple(sorted((tuple(m), float(c)) for m, c in poly.terms() if float(c) != 0.0))

    @cached_property
    def _numeric(self) -> Evaluator:
        return numeric_evaluator(self.dim, [self.expr])

    def evaluate(self, x: Any, t: float = 0.0) -> np.ndarray | float:
        arr = np.asarray(x, dtype=float)
        if arr.shape[-1] != self.dim:
            raise DimensionMismatchError("point dimension", arr.shape[-1], self.dim)
        values = self._numeric(arr, t)[..., 0]
        return float(values) if arr.ndim == 1 else values

    __call__ = evaluate

    def isclose(self, other: ScalarField, tol: float = 1e-12) -> bool:
        return all(abs(c) <= tol for _, c in (self - other).terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self.dim == other.dim and self.expr == other.expr

    def __hash__(self) -> int:
        return hash((self.dim, self.expr))

    def __repr__(self) -> str:
        return f"ScalarField(dim={self.dim}, expr={self.expr})"

    # -- serialization --------------------------------------------------------

    def to_list(self) -> list[dict[str, Any]]:
        d = self.dim
        out = []
        for monom, coeff in self.terms:
            sins, coss = monom[d : 2 * d], monom[2 * d : 3 * d]
            trig = [["sin", j, sins[j]] for j in range(d) if sins[j]]
            trig += [["cos", j, coss[j]] for j in range(d) if coss[j]]
            out.append({"coeff": coeff, "exps": list(monom[:d]), "t_exp": monom[3 * d], "trig": trig})
        return out

    @classmethod
    def from_list(cls, dim: int, items: Sequence[Mapping[str, Any]]) -> ScalarField:
        result = cls(dim)
        for item in items:
            sins: dict[int, int] = {}
            coss: dict[int, int] = {}
            for kind, j, power in item.get("trig", []):
                if kind == "sin":
                    sins[int(j)] = sins.get(int(j), 0) + int(power)
                elif kind == "cos":
                    coss[int(j)] = coss.get(int(j), 0) + int(power)
                else:
                    msg = f"Unknown trig factor {kind!r}"
                    raise ValueError(msg)
            exps = [int(e) for e in item.get("exps", [0] * dim)]
            term = cls.monomial(dim, float(item["coeff"]), exps, sins, coss, int(item.get("t_exp", 0)))
            result = result + term
        return result


# =============================================================================
# VECTOR FIELDS
# =============================================================================

class PolyVectorField:
    """Immutable vector field R^d -> R^d with one ScalarField per coordinate."""

    def __init__(self, components: Sequence[ScalarField]):
        if not components:
            msg = "A vector field needs at least one component"
            raise ValueError(msg)
        dim = components[0].dim
        if len(components) != dim:
            raise DimensionMismatchError("component count", len(components), dim)
        for comp in components:
            if comp.dim != dim:
                raise DimensionMismatchError("component dimension", comp.dim, dim)
        self.dim = dim
        self.components: tuple[ScalarField, ...] = tuple(components)

    @classmethod
    def from_matrix(cls, dim: int, matrix: sp.Matrix) -> PolyVectorField:
        return cls([ScalarField(dim, entry) for entry in matrix])

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zeros(cls, dim: int) -> PolyVectorField:
        return cls([ScalarField(dim) for _ in range(dim)])

    @classmethod
    def identity(cls, dim: int) -> PolyVectorField:
        """Id(x) = x, the seed of V_I Id."""
        return cls([ScalarField.coordinate(dim, j) for j in range(dim)])

    @classmethod
    def constant(cls, values: Sequence[float]) -> PolyVectorField:
        dim = len(values)
        return cls([ScalarField.constant(dim, v) for v in values])

    @classmethod
    def linear(cls, matrix: Any) -> PolyVectorField:
        """x -> A x."""
        a = np.asarray(matrix, dtype=float)
        dim = a.shape[0]
        if a.shape != (dim, dim):
            raise DimensionMismatchError("matrix shape", a.shape, (dim, dim))
        return cls.from_matrix(dim, sp.Matrix(a) * sp.Matrix(coordinates(dim)))

    # -- algebra --------------------------------------------------------------

    def _check(self, other: PolyVectorField) -> None:
        if self.dim != other.dim:
            raise DimensionMismatchError("field dimension", self.dim, other.dim)

    @property
    def matrix(self) -> sp.Matrix:
        """Column of component expressions."""
        return sp.Matrix([c.expr for c in self.components])

    def __add__(self, other: PolyVectorField) -> PolyVectorField:
        self._check(other)
        return PolyVectorField([a + b for a, b in zip(self.components, other.components, strict=True)])

    def __sub__(self, other: PolyVectorField) -> PolyVectorField:
        self._check(other)
        return PolyVectorField([a - b for a, b in zip(self.components, other.components, strict=True)])

    def __neg__(self) -> PolyVectorField:
        return self.scale(-1.0)

    def scale(self, factor: float) -> PolyVectorField:
        return PolyVectorField([c.scale(factor) for c in self.components])

    def __rmul__(self, factor: float) -> PolyVectorField:
        return self.scale(float(factor))

    def apply(self, f: ScalarField | PolyVectorField) -> ScalarField | PolyVectorField:
        """First-order operator f -> (Df)(V); vector-valued f is handled coordinatewise."""
        xs = coordinates(self.dim)
        if isinstance(f, PolyVectorField):
            self._check(f)
            return PolyVectorField.from_matrix(self.dim, f.matrix.jacobian(xs) * self.matrix)
        if f.dim != self.dim:
            raise DimensionMismatchError("field dimension", f.dim, self.dim)
        return ScalarField(self.dim, (sp.Matrix([f.expr]).jacobian(xs) * self.matrix)[0])

    def jacobian(self) -> tuple[tuple[ScalarField, ...], ...]:
        """Entry [i][j] is d V_i / d x_j."""
        jac = self.matrix.jacobian(coordinates(self.dim))
        return tuple(
            tuple(ScalarField(self.dim, jac[i, j]) for j in range(self.dim)) for i in range(self.dim)
        )

    def freeze(self, time: float) -> PolyVectorField:
        return PolyVectorField([c.freeze(time) for c in self.components])

    # -- inspection -----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    @property
    def is_time_dependent(self) -> bool:
        return any(c.is_time_dependent for c in self.components)

    @cached_property
    def _numeric(self) -> Evaluator:
        return numeric_evaluator(self.dim, [c.expr for c in self.components])

    @cached_property
    def _numeric_jacobian(self) -> Evaluator:
        return numeric_evaluator(self.dim, [e.expr for row in self.jacobian() for e in row])

    def evaluate(self, x: Any, t: float = 0.0) -> np.ndarray:
        """Field values, shape (..., d)."""
        arr = np.asarray(x, dtype=float)
        if arr.shape[-1] != self.dim:
            raise DimensionMismatchError("point dimension", arr.shape[-1], self.dim)
        return self._numeric(arr, t)

    __call__ = evaluate

    def evaluate_jacobian(self, x: Any, t: float = 0.0) -> np.ndarray:
        """Jacobian values, shape (..., d, d)."""
        flat = self._numeric_jacobian(np.asarray(x, dtype=float), t)
        return flat.reshape(*flat.shape[:-1], self.dim, self.dim)

    def isclose(self, other: PolyVectorField, tol: float = 1e-12) -> bool:
        self._check(other)
        return all(a.isclose(b, tol) for a, b in zip(self.components, other.components, strict=True))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self) -> int:
        return hash(self.components)

    def __repr__(self) -> str:
        return f"PolyVectorField({[c.expr for c in self.components]})"

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {"dim": self.dim, "coords": [c.to_list() for c in self.components]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PolyVectorField:
        dim = int(data["dim"])
        coords = data["coords"]
        if len(coords) != dim:
            raise DimensionMismatchError("coords length", len(coords), dim)
        return cls([ScalarField.from_list(dim, items) for items in coords])


FieldLike = ScalarField | PolyVectorField


def save_fields(fields: Sequence[PolyVectorField], path: str | Path, v0: PolyVectorField | None = None) -> Path:
    payload: dict[str, Any] = {"fields": [f.to_dict() for f in fields]}
    if v0 is not None:
        payload["v0"] = v0.to_dict()
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def fields_from_payload(payload: Mapping[str, Any] | Sequence[Any]) -> list[PolyVectorField]:
    """Accept a single field object, a list of them, or ``{"fields": [...]}``."""
    if isinstance(payload, Mapping):
        if "fields" in payload:
            return [PolyVectorField.from_dict(item) for item in payload["fields"]]
        return [PolyVectorField.from_dict(payload)]
    return [PolyVectorField.from_dict(item) for item in payload]


def drift_from_payload(payload: Mapping[str, Any] | Sequence[Any]) -> PolyVectorField | None:
    if isinstance(payload, Mapping) and payload.get("v0") is not None:
        return PolyVectorField.from_dict(payload["v0"])
    return None


def load_fields(path: str | Path) -> tuple[list[PolyVectorField], PolyVectorField | None]:
    """Driving fields and optional drift written by ``save_fields``."""
    payload = json.loads(Path(path).read_text())
    return fields_from_payload(payload), drift_from_payload(payload)


# =============================================================================
# BRACKETS AND OPERATORS
# =============================================================================

def lie_bracket(v: PolyVectorField, w: PolyVectorField) -> PolyVectorField:
    """[v, w] = Dw . v - Dv . w."""
    v._check(w)
    xs = coordinates(v.dim)
    bracket = w.matrix.jacobian(xs) * v.matrix - v.matrix.jacobian(xs) * w.matrix
    return PolyVectorField.from_matrix(v.dim, bracket)


def _check_word(fields: Sequence[PolyVectorField], word: Sequence[int]) -> None:
    if not word:
        msg = "Words must have at least one letter"
        raise ValueError(msg)
    for letter in word:
        if not 0 <= letter < len(fields):
            raise WordIndexError(tuple(word), len(fields))


def iterated_bracket(fields: Sequence[PolyVectorField], word: Sequence[int]) -> PolyVectorField:
    """Right-nested bracket [V_i1, [V_i2, ..., [V_i(k-1), V_ik]]]."""
    _check_word(fields, word)
    result = fields[word[-1]]
    for letter in reversed(word[:-1]):
        result = lie_bracket(fields[letter], result)
    return result


def apply_operator(
    fields: Sequence[PolyVectorField], word: Sequence[int], f: FieldLike,
) -> FieldLike:
    """V_I f = V_i1(V_i2(... V_ik f))."""
    _check_word(fields, word)
    result = f
    for letter in reversed(word):
        result = fields[letter].apply(result)
    return result


def word_fields(
    fields: Sequence[PolyVectorField], depth: int, mode: str,
) -> dict[tuple[int, ...], PolyVectorField]:
    """V_I Id (``mode='word'``) or V_[I] (``mode='bracket'``) for all words up to depth."""
    if not fields:
        return {}
    out: dict[tuple[int, ...], PolyVectorField] = {}
    for word in all_words(len(fields), depth):
        if mode == "word":
            # V_I Id = V_i1(V_{i2..ik} Id)
            if len(word) == 1:
                out[word] = fields[word[0]]
            else:
                out[word] = fields[word[0]].apply(out[word[1:]])
        elif mode == "bracket":
            out[word] = fields[word[0]] if len(word) == 1 else lie_bracket(fields[word[0]], out[word[1:]])
        else:
            msg = f"Unknown mode {mode!r}"
            raise ValueError(msg)
    return out


def derivative_scalars(f: FieldLike, order: int) -> list[ScalarField]:
    """All order-th partial derivatives of every component of f."""
    current = list(f.components) if isinstance(f, PolyVectorField) else [f]
    for _ in range(order):
        current = [comp.diff(j) for comp in current for j in range(comp.dim)]
    return current


# =============================================================================
# FIELD FAMILIES
# =============================================================================

class CompiledField:
    """A frozen weighted field sum_b w_b F_b(s, .) ready for batch evaluation."""

    __slots__ = ("family", "time", "weights")

    def __init__(self, family: FieldFamily, weights: np.ndarray, time: float):
        self.family = family
        self.weights = weights
        self.time = time

    @property
    def dim(self) -> int:
        return self.family.dim

    def value(self, y: np.ndarray) -> np.ndarray:
        return np.einsum("b,...bd->...d", self.weights, self.family.values(y, self.time))

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        return np.einsum("b,...bij->...ij", self.weights, self.family.jacobians(y, self.time))

    @property
    def is_zero(self) -> bool:
        return not self.weights.any()


class FieldFamily:
    """Basis fields F_0..F_{B-1} lambdified into one numpy evaluator."""

    def __init__(self, fields: Sequence[PolyVectorField]):
        if not fields:
            msg = "FieldFamily needs at least one field"
            raise ValueError(msg)
        dim = fields[0].dim
        for f in fields:
            if f.dim != dim:
                raise DimensionMismatchError("family field dimension", f.dim, dim)
        self.dim = dim
        self.fields: tuple[PolyVectorField, ...] = tuple(fields)
        self.active = np.array([not f.is_zero for f in fields])
        self._values = numeric_evaluator(dim, [c.expr for f in fields for c in f.components])
        self._jacobians = numeric_evaluator(dim, [e.expr for f in fields for row in f.jacobian() for e in row])

    def __len__(self) -> int:
        return len(self.fields)

    def values(self, y: np.ndarray, time: float) -> np.ndarray:
        """Basis values, shape (..., B, d)."""
        flat = self._values(y, time)
        return flat.reshape(*flat.shape[:-1], len(self.fields), self.dim)

    def jacobians(self, y: np.ndarray, time: float) -> np.ndarray:
        """Basis Jacobians, shape (..., B, d, d)."""
        flat = self._jacobians(y, time)
        return flat.reshape(*flat.shape[:-1], len(self.fields), self.dim, self.dim)

    def combine(self, weights: Sequence[float], time: float) -> CompiledField:
        """sum_b weights[b] F_b with time frozen at ``time``."""
        w = np.asarray(weights, dtype=float)
        if w.size != len(self.fields):
            raise DimensionMismatchError("number of weights", w.size, len(self.fields))
        return CompiledField(self, np.where(self.active, w, 0.0), float(time))

    def symbolic(self, weights: Sequence[float], time: float) -> PolyVectorField:
        """The same combination as a PolyVectorField."""
        result = PolyVectorField.zeros(self.dim)
        for w, f in zip(weights, self.fields, strict=True):
            if w:
                result = result + f.freeze(time).scale(float(w))
        return result


# =============================================================================
# GROWTH
# =============================================================================

@dataclass(frozen=True)
class GrowthReport:
    """Sphere-sampled growth of a field: least alpha with bounded |f| / (1+|x|)^alpha."""

    alpha_fit: float | None
    constant: float
    radii: tuple[float, ...]
    max_norms: tuple[float, ...]
    ratios: tuple[float, ...]
    flags: tuple[str, ...] = ()

    @property
    def bounded(self) -> bool:
        return self.alpha_fit == 0.0

    def summary(self) -> dict[str, Any]:
        return {
            "alpha_fit": self.alpha_fit,
            "constant": self.constant,
            "radii": list(self.radii),
            "max_norms": list(self.max_norms),
            "ratios": list(self.ratios),
            "flags": list(self.flags),
        }


def _norm_evaluator(f: FieldLike | Callable[[np.ndarray], np.ndarray], time: float) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(f, PolyVectorField | ScalarField):
        def evaluate(points: np.ndarray) -> np.ndarray:
            values = np.asarray(f.evaluate(points, time))
            return np.abs(values) if values.ndim == 1 else np.linalg.norm(values, axis=-1)
        return evaluate

    def evaluate_callable(points: np.ndarray) -> np.ndarray:
        values = np.asarray(f(points))
        return np.abs(values) if values.ndim == 1 else np.linalg.norm(values.reshape(values.shape[0], -1), axis=-1)
    return evaluate_callable


def growth_report(
    f: FieldLike | Callable[[np.ndarray], np.ndarray],
    radii: Sequence[float] = DEFAULT_RADII,
    *,
    dim: int | None = None,
    n_directions: int = DEFAULT_DIRECTIONS,
    seed: int = 42,
    time: float = 0.0,
) -> GrowthReport:
    """Fit the least alpha on the 0.1 grid whose max ratio stops growing beyond the smallest radius."""
    radii = tuple(float(r) for r in radii)
    if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in itertools.pairwise(radii)):
        msg = f"Radii must be positive and increasing, got {radii}"
        raise ValueError(msg)
    if dim is None:
        if not isinstance(f, PolyVectorField | ScalarField):
            msg = "dim is required when f is a plain callable"
            raise ValueError(msg)
        dim = f.dim
    evaluate = _norm_evaluator(f, time)
    directions = sphere_sample(dim, n_directions, 1.0, seed)
    max_norms = np.array([float(np.max(evaluate(r * directions))) for r in radii])
    if not np.all(np.isfinite(max_norms)):
        return GrowthReport(None, float("inf"), radii, tuple(max_norms), tuple(max_norms), ("non_finite",))

    first = 1 if len(radii) >= 3 else 0
    alpha_fit = None
    for alpha in ALPHA_GRID:
        ratios = max_norms / (1.0 + np.asarray(radii)) ** alpha
        rising = [
            ratios[k + 1] > GROWTH_SLACK * ratios[k] + RATIO_FLOOR
            for k in range(first, len(radii) - 1)
        ]
        if not any(rising):
            alpha_fit = alpha
            break

    flags: tuple[str, ...] = ()
    used_alpha = alpha_fit
    if alpha_fit is None:
        flags = ("no_alpha_fits",)
        used_alpha = 1.0
    ratios = max_norms / (1.0 + np.asarray(radii)) ** used_alpha
    return GrowthReport(
        alpha_fit=alpha_fit,
        constant=float(ratios.max()),
        radii=radii,
        max_norms=tuple(float(v) for v in max_norms),
        ratios=tuple(float(v) for v in ratios),
        flags=flags,
    )


# =============================================================================
# ASSUMPTION AUDIT
# =============================================================================

@dataclass(frozen=True)
class AuditEntry:
    label: str
    kind: str                 # function, derivative, second_derivative, time
    alpha_fit: float | None
    required_alpha: float
    constant: float
    passed: bool


@dataclass(frozen=True)
class AuditReport:
    """Growth and boundedness checks over all operator chains of a system."""

    entries: tuple[AuditEntry, ...]
    alpha: float
    radii: tuple[float, ...]
    worst_alpha: float | None
    violations: tuple[str, ...]
    passed: bool
    time_entries: tuple[AuditEntry, ...] = field(default=())

    def summary(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "alpha": self.alpha,
            "worst_alpha": self.worst_alpha,
            "violations": list(self.violations),
            "checks": len(self.entries) + len(self.time_entries),
        }

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "label": e.label,
                "kind": e.kind,
                "alpha_fit": e.alpha_fit,
                "required_alpha": e.required_alpha,
                "constant": e.constant,
                "passed": e.passed,
            }
            for e in (*self.entries, *self.time_entries)
        ]
        return pd.DataFrame(rows, columns=["label", "kind", "alpha_fit", "required_alpha", "constant", "passed"])


def _word_label(word: tuple[int, ...]) -> str:
    return "V[" + ",".join(str(i + 1) for i in word) + "]"


def _chains(width: int, budget: int) -> list[tuple[tuple[int, ...], ...]]:
    """All sequences of non-empty words with total length <= budget."""
    out: list[tuple[tuple[int, ...], ...]] = []
    for word in all_words(width, budget):
        out.append((word,))
        out.extend((word, *rest) for rest in _chains(width, budget - len(word)))
    return out


def _scalar_norms(dim: int, scalars: list[ScalarField], time: float) -> Callable[[np.ndarray], np.ndarray]:
    evaluate_all = numeric_evaluator(dim, [s.expr for s in scalars])

    def evaluate(points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(evaluate_all(points, time), axis=-1)
    return evaluate


def _time_ratio(f: PolyVectorField, horizon: float, n_times: int = 5) -> Callable[[np.ndarray], np.ndarray]:
    times = np.linspace(0.0, horizon, n_times)

    def evaluate(points: np.ndarray) -> np.ndarray:
        values = [f.evaluate(points, t) for t in times]
        best = np.zeros(points.shape[0])
        for i, j in itertools.combinations(range(n_times), 2):
            diff = np.linalg.norm(values[j] - values[i], axis=-1) / (times[j] - times[i])
            best = np.maximum(best, diff)
        return best
    return evaluate


def assumption_audit(
    v0: PolyVectorField | None,
    fields: Sequence[PolyVectorField],
    p: float,
    radii: Sequence[float] = DEFAULT_RADII,
    alpha: float = 1.0,
    horizon: float = 1.0,
    *,
    n_directions: int = DEFAULT_DIRECTIONS,
    seed: int = 42,
) -> AuditReport:
    """Growth audit of every chain V_[I_n]...V_[I_1] Id with total length <= [p].

    V0-prefixed chains use total length <= [p] - 1. Each chain must have
    alpha-growth, and its first and second derivatives must be bounded. Time
    dependent fields additionally get a Lipschitz-in-time ratio check.
    """
    if not fields:
        msg = "assumption_audit needs at least one driving field"
        raise ValueError(msg)
    dim = fields[0].dim
    depth = int(p)
    brackets = word_fields(fields, depth, "bracket")
    identity = PolyVectorField.identity(dim)
    targets: list[tuple[str, PolyVectorField]] = []

    def chain_function(chain: tuple[tuple[int, ...], ...]) -> PolyVectorField:
        result: PolyVectorField = identity
        for word in chain:
            result = brackets[word].apply(result)  # type: ignore[assignment]
        return result

    for chain in _chains(len(fields), depth):
        label = "".join(_word_label(w) for w in reversed(chain)) + " Id"
        targets.append((label, chain_function(chain)))
    if v0 is not None:
        targets.append(("V0 Id", v0))
        for chain in _chains(len(fields), depth - 1):
            label = "V0" + "".join(_word_label(w) for w in reversed(chain)) + " Id"
            targets.append((label, v0.apply(chain_function(chain))))  # type: ignore[arg-type]

    kwargs = {"n_directions": n_directions, "seed": seed}
    entries: list[AuditEntry] = []
    for label, func in targets:
        checks = [
            ("function", func, alpha),
            ("derivative", _scalar_norms(dim, derivative_scalars(func, 1), 0.0), 0.0),
            ("second_derivative", _scalar_norms(dim, derivative_scalars(func, 2), 0.0), 0.0),
        ]
        for kind, target, required in checks:
            report = growth_report(target, radii, dim=dim, **kwargs)
            ok = report.alpha_fit is not None and report.alpha_fit <= required + 1e-12
            entries.append(AuditEntry(label, kind, report.alpha_fit, required, report.constant, ok))

    time_entries: list[AuditEntry] = []
    named = [("V0", v0)] if v0 is not None else []
    named += [(_word_label((i,)), f) for i, f in enumerate(fields)]
    for label, f in named:
        if f is None or not f.is_time_dependent:
            continue
        report = growth_report(_time_ratio(f, horizon), radii, dim=dim, **kwargs)
        ok = report.alpha_fit is not None and report.alpha_fit <= alpha + 1e-12
        time_entries.append(AuditEntry(label, "time", report.alpha_fit, alpha, report.constant, ok))

    all_entries = entries + time_entries
    violations = tuple(f"{e.label} ({e.kind})" for e in all_entries if not e.passed)
    function_alphas = [e.alpha_fit for e in entries if e.kind == "function"]
    worst = None if any(a is None for a in function_alphas) else max(function_alphas, default=0.0)
    if violations:
        logger.warning("Assumption audit found %d violations: %s", len(violations), ", ".join(violations[:5]))
    else:
        logger.info("Assumption audit passed %d checks at alpha=%.2f", len(all_entries), alpha)
    return AuditReport(
        entries=tuple(entries),
        alpha=float(alpha),
        radii=tuple(float(r) for r in radii),
        worst_alpha=worst,
        violations=violations,
        passed=not violations,
        time_entries=tuple(time_entries),
    )
