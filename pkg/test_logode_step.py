import numpy as np
import pytest

from roughflow.config import SolverConfig, StepMode
from roughflow.errors import BlowUpError, DimensionMismatchError, InvalidGridError
from roughflow.logode_step import (
    build_step_field,
    mu,
    mu_jacobian,
    mu_with_jacobian,
    step_growth_monitor,
    taylor_remainder,
)
from roughflow.rough_path import YoungPath, pure_area_driver, signature_lift
from roughflow.scenarios import compliant_fields, counterexample_fields
from roughflow.vector_fields import PolyVectorField, ScalarField

PRECISE = SolverConfig(p=2.5, substeps=32, sample_points=16, radius=1.0)


def _line_driver(horizon=1.0, cells=8):
    times = np.linspace(0.0, horizon, cells + 1)
    return signature_lift(times[:, None], times, 2, 2.5)


def test_zero_fields_give_identity_step(zigzag_driver):
    zero = PolyVectorField.zeros(2)
    step = build_step_field(zigzag_driver, [zero, zero], None, 0.0, 0.5, config=PRECISE)
    pts = np.array([[1.0, -2.0], [0.3, 0.4]])
    np.testing.assert_array_equal(mu(step, pts), pts)


def test_constant_drift_step_translates():
    driver = signature_lift(np.zeros((3, 1)), [0.0, 0.5, 1.0], 2, 2.5)
    step = build_step_field(driver, [PolyVectorField.zeros(1)], PolyVectorField.constant([0.5]), 0.2, 0.9, config=PRECISE)
    np.testing.assert_allclose(mu(step, np.array([[1.0], [-3.0]])), [[1.35], [-2.65]], atol=1e-14)


def test_scalar_linear_step_is_exponential():
    step = build_step_field(_line_driver(), [PolyVectorField.identity(1)], None, 0.1, 0.6, config=PRECISE)
    assert mu(step, np.array([2.0]))[0] == pytest.approx(2.0 * np.exp(0.5), rel=1e-9)
    assert mu_jacobian(step, np.array([2.0]))[0, 0] == pytest.approx(np.exp(0.5), rel=1e-9)


def test_word_and_bracket_modes_agree_on_geometric_driver(zigzag_driver):
    fields = compliant_fields()
    word = build_step_field(zigzag_driver, fields, None, 0.1, 0.7, StepMode.WORD, config=PRECISE)
    bracket = build_step_field(zigzag_driver, fields, None, 0.1, 0.7, StepMode.BRACKET, config=PRECISE)
    pts = np.random.default_rng(3).normal(size=(12, 2))
    np.testing.assert_allclose(word.step_field().evaluate(pts), bracket.step_field().evaluate(pts), atol=1e-12)
    assert bracket.warnings == ()


def test_bracket_mode_warns_on_pure_area_driver():
    driver = pure_area_driver(1.0, 4, [[1.0, 0.0], [0.0, 0.0]])
    step = build_step_field(driver, counterexample_fields(), None, 0.0, 0.5, "bracket", config=PRECISE)
    assert step.warnings
    assert "non-geometric" in step.warnings[0]


def test_pure_area_step_field_on_the_axis():
    driver = pure_area_driver(1.0, 4, [[1.0, 0.0], [0.0, 0.0]])
    step = build_step_field(driver, counterexample_fields(), None, 0.0, 0.5, config=PRECISE)
    pts = np.array([[1.0, 0.0], [3.0, 0.0]])
    np.testing.assert_allclose(step.step_field().evaluate(pts), [[0.5, 0.0], [4.5, 0.0]], atol=1e-14)


def test_invalid_step_requests_raise(zigzag_driver):
    fields = compliant_fields()
    with pytest.raises(InvalidGridError):
        build_step_field(zigzag_driver, fields, None, 0.5, 0.5, config=PRECISE)
    with pytest.raises(DimensionMismatchError):
        build_step_field(zigzag_driver, fields[:1], None, 0.0, 0.5, config=PRECISE)
    with pytest.raises(DimensionMismatchError):
        build_step_field(zigzag_driver, fields, None, 0.0, 0.5, config=SolverConfig(p=3.5))


def test_jacobian_matches_finite_differences(zigzag_driver):
    step = build_step_field(zigzag_driver, compliant_fields(), None, 0.0, 0.75, config=PRECISE)
    x = np.array([0.4, -0.8])
    _, jac = mu_with_jacobian(step, x)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        column = (mu(step, x + e) - mu(step, x - e)) / (2 * h)
        np.testing.assert_allclose(jac[:, k], column, rtol=1e-6, atol=1e-8)


def test_blow_up_guard_reports_history():
    driver = pure_area_driver(1.0, 2, [[1.0, 0.0], [0.0, 0.0]])
    step = build_step_field(driver, counterexample_fields(), None, 0.0, 1.0, config=PRECISE)
    with pytest.raises(BlowUpError) as info:
        mu(step, np.array([[0.1, 0.0], [10.0, 0.0]]))
    err = info.value
    assert err.point_index == 1
    assert np.all(np.isfinite(err.last_state))
    assert err.history
    assert all(s <= 1.0 for s, _ in err.history_times())


def test_young_component_adds_increment():
    driver = signature_lift(np.zeros((2, 1)), [0.0, 1.0], 2, 2.5)
    young = YoungPath(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
    step = build_step_field(
        driver, [PolyVectorField.zeros(1)], None, 0.25, 0.75, config=PRECISE,
        young=young, young_fields=[PolyVectorField.constant([1.0])],
    )
    np.testing.assert_allclose(mu(step, np.array([[0.0]])), [[1.0]], atol=1e-14)
    with pytest.raises(ValueError):
        build_step_field(driver, [PolyVectorField.zeros(1)], None, 0.0, 1.0, config=PRECISE, young=young)


def test_time_dependent_drift_is_frozen_at_left_end():
    driver = signature_lift(np.zeros((2, 1)), [0.0, 1.0], 2, 2.5)
    v0 = PolyVectorField([ScalarField.monomial(1, 1.0, t_exp=1)])
    step = build_step_field(driver, [PolyVectorField.zeros(1)], v0, 0.5, 1.0, config=PRECISE)
    np.testing.assert_allclose(mu(step, np.array([0.0])), [0.25], atol=1e-14)


def test_taylor_remainder_order_for_scalar_linear():
    report = taylor_remainder(
        _line_driver(), [PolyVectorField.identity(1)], None, 0.0, [0.5, 0.25, 0.125, 0.0625], config=PRECISE,
    )
    assert report.slope == pytest.approx(3.0, abs=0.1)
    assert report.slope >= report.expected_order
    assert list(report.to_frame().columns) == ["h", "remainder", "slope_so_far"]


def test_taylor_remainder_order_on_smooth_planar_path(planar_driver):
    hs = [2.0**-k for k in range(3, 10)]
    report = taylor_remainder(planar_driver, compliant_fields(), None, 0.0, hs, config=PRECISE)
    assert report.slope == pytest.approx(3.0, abs=0.2)
    assert np.all(np.diff(report.remainders) < 0)
    assert not report.exact


def test_taylor_remainder_is_exact_for_constant_fields(zigzag_driver):
    fields = [PolyVectorField.constant([1.0, 0.0]), PolyVectorField.constant([0.0, 1.0])]
    report = taylor_remainder(zigzag_driver, fields, None, 0.0, [0.5, 0.25], config=PRECISE)
    assert report.exact


def test_step_growth_monitor_constants_are_finite(zigzag_driver):
    report = step_growth_monitor(zigzag_driver, compliant_fields(), None, 0.0, [0.5, 0.25, 0.125], config=PRECISE)
    assert 0.0 < report.k_displacement < np.inf
    assert 0.0 <= report.k_jacobian < np.inf
