import numpy as np
import pytest
import sympy as sp

from roughflow.errors import DimensionMismatchError, WordIndexError
from roughflow.scenarios import compliant_fields, counterexample_fields
from roughflow.vector_fields import (
    FieldFamily,
    PolyVectorField,
    ScalarField,
    apply_operator,
    assumption_audit,
    coordinates,
    growth_report,
    iterated_bracket,
    lie_bracket,
    load_fields,
    save_fields,
    word_fields,
)


def _x(dim, j):
    return ScalarField.coordinate(dim, j)


def test_scalar_field_algebra_and_evaluation():
    f = _x(2, 0) * _x(2, 1) + ScalarField.monomial(2, 2.0, sin={0: 1})
    assert f.evaluate([1.5, 2.0]) == pytest.approx(3.0 + 2.0 * np.sin(1.5))
    values = f.evaluate(np.array([[0.0, 1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(values, [0.0, 1.0 + 2.0 * np.sin(1.0)])
    assert (f - f).is_zero


def test_scalar_derivatives_are_exact():
    f = ScalarField.monomial(2, 3.0, (2, 1)) + ScalarField.monomial(2, 1.0, cos={1: 2})
    dx = f.diff(0)
    dy = f.diff(1)
    assert dx.isclose(ScalarField.monomial(2, 6.0, (1, 1)))
    point = np.array([0.7, -0.4])
    expected_dy = 3.0 * 0.7**2 - 2.0 * np.cos(-0.4) * np.sin(-0.4)
    assert dy.evaluate(point) == pytest.approx(expected_dy)


def test_time_dependence_and_freeze():
    f = ScalarField.monomial(1, 2.0, (1,), t_exp=2)
    assert f.is_time_dependent
    assert f.diff_t().evaluate([3.0], 0.5) == pytest.approx(2.0 * 2 * 0.5 * 3.0)
    frozen = f.freeze(2.0)
    assert not frozen.is_time_dependent
    assert frozen.evaluate([1.0]) == pytest.approx(8.0)


def test_linear_field_and_jacobian():
    a = np.array([[1.0, 2.0], [-3.0, 0.5]])
    v = PolyVectorField.linear(a)
    x = np.array([[0.3, -1.2], [2.0, 1.0]])
    np.testing.assert_allclose(v.evaluate(x), x @ a.T)
    np.testing.assert_allclose(v.evaluate_jacobian(x), np.broadcast_to(a, (2, 2, 2)))


def test_bracket_of_linear_fields_is_commutator():
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0, 0.0], [1.0, 0.0]])
    bracket = lie_bracket(PolyVectorField.linear(a), PolyVectorField.linear(b))
    # [Ax, Bx] = B A x - A B x
    assert bracket.isclose(PolyVectorField.linear(b @ a - a @ b))


def test_bracket_is_antisymmetric_and_satisfies_jacobi():
    u, v = compliant_fields()
    w = PolyVectorField([_x(2, 1) * _x(2, 1), ScalarField.monomial(2, 1.0, sin={0: 1})])
    assert (lie_bracket(u, v) + lie_bracket(v, u)).is_zero
    jacobi = (
        lie_bracket(u, lie_bracket(v, w))
        + lie_bracket(v, lie_bracket(w, u))
        + lie_bracket(w, lie_bracket(u, v))
    )
    pts = np.random.default_rng(0).normal(size=(20, 2))
    np.testing.assert_allclose(jacobi.evaluate(pts), 0.0, atol=1e-12)


def test_word_fields_match_operator_application():
    fields = compliant_fields()
    by_word = word_fields(fields, 2, "word")
    identity = PolyVectorField.identity(2)
    assert by_word[(0, 1)].isclose(apply_operator(fields, (0, 1), identity))
    by_bracket = word_fields(fields, 2, "bracket")
    assert by_bracket[(0, 1)].isclose(iterated_bracket(fields, (0, 1)))
    assert by_bracket[(0, 0)].is_zero
    with pytest.raises(ValueError):
        word_fields(fields, 2, "hall")
    with pytest.raises(WordIndexError):
        iterated_bracket(fields, (0, 3))


def test_field_family_combination_matches_symbolic():
    fields = [*compliant_fields(), PolyVectorField.identity(2)]
    family = FieldFamily(fields)
    weights = [0.3, -0.7, 0.2]
    compiled = family.combine(weights, 0.0)
    symbolic = family.symbolic(weights, 0.0)
    pts = np.random.default_rng(1).normal(size=(10, 2))
    np.testing.assert_allclose(compiled.value(pts), symbolic.evaluate(pts), atol=1e-14)
    np.testing.assert_allclose(compiled.jacobian(pts), symbolic.evaluate_jacobian(pts), atol=1e-14)
    with pytest.raises(DimensionMismatchError):
        family.combine([1.0], 0.0)


def test_growth_report_recognises_degrees():
    dim = 2
    constant = PolyVectorField.constant([1.0, 2.0])
    linear = PolyVectorField.identity(dim)
    quadratic = PolyVectorField([_x(dim, 0) * _x(dim, 0), _x(dim, 1)])
    assert growth_report(constant).alpha_fit == 0.0
    assert growth_report(constant).bounded
    assert growth_report(linear).alpha_fit == pytest.approx(1.0)
    report = growth_report(quadratic)
    assert report.alpha_fit is None
    assert "no_alpha_fits" in report.flags


def test_growth_report_accepts_callables():
    report = growth_report(lambda pts: np.sqrt(1.0 + np.linalg.norm(pts, axis=-1)), dim=3)
    assert report.alpha_fit == pytest.approx(0.5)
    with pytest.raises(ValueError):
        growth_report(lambda pts: pts)


def test_audit_accepts_compliant_fields():
    report = assumption_audit(None, compliant_fields(), p=2.5)
    assert report.passed
    assert report.violations == ()
    frame = report.to_frame()
    assert set(frame["kind"]) == {"function", "derivative", "second_derivative"}


def test_audit_flags_superlinear_chain():
    report = assumption_audit(None, counterexample_fields(), p=2.5)
    assert not report.passed
    assert any(v.startswith("V[1]V[1] Id") for v in report.violations)


def test_audit_checks_time_dependent_drift():
    v0 = PolyVectorField([ScalarField.monomial(1, 1.0, t_exp=1)])
    report = assumption_audit(v0, [PolyVectorField.constant([1.0])], p=2.5, horizon=2.0)
    assert report.passed
    assert [e.kind for e in report.time_entries] == ["time"]


def test_field_file_round_trip(tmp_path):
    fields = compliant_fields()
    v0 = PolyVectorField.constant([0.5, 0.0])
    path = save_fields(fields, tmp_path / "fields.json", v0=v0)
    loaded, drift = load_fields(path)
    assert tuple(loaded) == fields
    assert drift == v0


def test_scalar_field_from_sympy_expression():
    x0, x1 = coordinates(2)
    f = ScalarField(2, 2 * x0 * sp.sin(x1) ** 2 + x1**3)
    assert f.isclose(ScalarField.monomial(2, 2.0, (1, 0), sin={1: 2}) + ScalarField.monomial(2, 1.0, (0, 3)))
    assert ScalarField.from_list(2, f.to_list()) == f
    assert f.diff(1).evaluate([1.5, 0.4]) == pytest.approx(4.0 * 1.5 * np.sin(0.4) * np.cos(0.4) + 3 * 0.4**2)
    with pytest.raises(ValueError):
        ScalarField(2, sp.Symbol("z"))
    with pytest.raises(ValueError):
        ScalarField(2, sp.exp(x0)).to_list()


def test_derivatives_agree_with_central_differences():
    f = (
        ScalarField.monomial(2, 0.5, (2, 1))
        + ScalarField.monomial(2, 1.0, sin={0: 1}, cos={1: 2})
        + ScalarField.monomial(2, -0.2, (0, 3))
    )
    pts = np.random.default_rng(4).uniform(-5.0, 5.0, size=(30, 2))
    h = 1e-5
    for j in range(2):
        shift = np.zeros(2)
        shift[j] = h
        numeric = (f.evaluate(pts + shift) - f.evaluate(pts - shift)) / (2 * h)
        np.testing.assert_allclose(f.diff(j).evaluate(pts), numeric, rtol=1e-6, atol=1e-6)
        second = (f.diff(j).evaluate(pts + shift) - f.diff(j).evaluate(pts - shift)) / (2 * h)
        np.testing.assert_allclose(f.diff(j).diff(j).evaluate(pts), second, rtol=1e-6, atol=1e-6)


def _numeric_jacobian(v, pts, h=1e-6):
    cols = []
    for j in range(v.dim):
        shift = np.zeros(v.dim)
        shift[j] = h
        cols.append((v.evaluate(pts + shift) - v.evaluate(pts - shift)) / (2 * h))
    return np.stack(cols, axis=-1)


def test_heisenberg_bracket_is_vertical_unit_field():
    v = PolyVectorField.constant([1.0, 0.0, 0.0])
    w = PolyVectorField([ScalarField(3), ScalarField.constant(3, 1.0), ScalarField.coordinate(3, 0)])
    bracket = lie_bracket(v, w)
    assert bracket.isclose(PolyVectorField.constant([0.0, 0.0, 1.0]))

    pts = np.random.default_rng(5).normal(size=(50, 3))
    numeric = np.einsum("nij,nj->ni", _numeric_jacobian(w, pts), v.evaluate(pts)) - np.einsum(
        "nij,nj->ni", _numeric_jacobian(v, pts), w.evaluate(pts),
    )
    np.testing.assert_allclose(bracket.evaluate(pts), numeric, atol=1e-6)


def test_second_order_word_field_away_from_axis():
    fields = counterexample_fields()
    twice = apply_operator(fields, (0, 0), PolyVectorField.identity(2))
    pts = np.random.default_rng(6).uniform(-2.0, 2.0, size=(25, 2))
    x, y = pts[:, 0], pts[:, 1]
    expected = np.column_stack([x * np.sin(y) ** 2 + x**2 * np.cos(y), x * np.sin(y)])
    np.testing.assert_allclose(twice.evaluate(pts), expected, atol=1e-12)
    assert word_fields(fields, 2, "word")[(0, 0)].isclose(twice)


def test_growth_fit_tolerates_twenty_percent_rise_per_radius():
    def rising(factor):
        return lambda pts: factor ** np.maximum(np.log10(np.linalg.norm(pts, axis=-1)) - 1.0, 0.0)

    assert growth_report(rising(1.15), dim=2).alpha_fit == 0.0
    assert growth_report(rising(1.25), dim=2).alpha_fit == pytest.approx(0.1)
