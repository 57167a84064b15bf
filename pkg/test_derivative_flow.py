import math

import numpy as np
import pytest

from roughflow.config import SolverConfig
from roughflow.derivative_flow import (
    derivative_growth_check,
    fit_derivative_growth,
    flow_jacobian,
    parameter_sensitivity,
    second_derivative,
)
from roughflow.flow_builder import solve_flow
from roughflow.rough_path import control_table, signature_lift
from roughflow.scenarios import constant_drift_scenario, scalar_linear_scenario
from roughflow.vector_fields import ScalarField

PRECISE = SolverConfig(p=2.5, substeps=32, sample_points=8, radius=1.0)


def _line_driver(horizon=1.0, cells=8):
    times = np.linspace(0.0, horizon, cells + 1)
    return signature_lift(times[:, None], times, 2, 2.5)


def test_constant_drift_has_identity_jacobian():
    scenario = constant_drift_scenario()
    record = flow_jacobian(scenario.solve(), scenario.points)
    np.testing.assert_allclose(record.product, np.broadcast_to(np.eye(1), (4, 1, 1)), atol=1e-14)
    assert record.deviation <= 1e-14


def test_scalar_linear_jacobian_is_exponential():
    scenario = scalar_linear_scenario(horizon=1.0)
    fc = scenario.solve(PRECISE)
    record = flow_jacobian(fc, np.array([1.5]))
    assert record.product[0, 0] == pytest.approx(math.e, abs=1e-8)
    assert record.remultiply_defect() <= 1e-10


def test_jacobian_matches_finite_differences(compliant, fast_config):
    fc = solve_flow(compliant.driver, compliant.fields, None, 0.0, 1.0, fast_config)
    x = np.random.default_rng(7).uniform(-1.0, 1.0, size=(20, 2))
    record = flow_jacobian(fc, x)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        column = (fc(x + e) - fc(x - e)) / (2 * h)
        np.testing.assert_allclose(record.product[:, :, k], column, rtol=1e-4, atol=1e-7)


def test_jacobian_factorizes_at_partition_points(compliant, fast_config):
    fc = solve_flow(compliant.driver, compliant.fields, None, 0.0, 1.0, fast_config)
    x = np.array([0.3, -0.6])
    record = flow_jacobian(fc, x)
    for k in range(1, fc.n_pieces):
        later = np.eye(2)
        for factor in record.factors[k:]:
            later = factor @ later
        np.testing.assert_allclose(later @ record.products[k], record.product, atol=1e-8)


def test_compliant_flow_preserves_orientation(compliant, fast_config):
    fc = solve_flow(compliant.driver, compliant.fields, None, 0.0, 1.0, fast_config)
    record = flow_jacobian(fc, np.random.default_rng(2).normal(size=(10, 2)))
    assert np.all(np.linalg.det(record.product) > 0)
    frame = record.to_frame()
    assert list(frame.columns) == ["interval", "t_start", "t_end", "factor_norm", "accumulated_norm"]
    assert len(frame) == fc.n_pieces


def test_parameter_sensitivity_closed_form():
    driver = _line_driver()
    field = [ScalarField.monomial(2, 1.0, (1, 1))]
    sens = parameter_sensitivity(driver, [field], None, [0.5], 0.0, 1.0, [2.0], PRECISE)
    assert sens.value[0] == pytest.approx(2.0 * math.exp(0.5), rel=1e-8)
    assert sens.d_a[0, 0] == pytest.approx(2.0 * math.exp(0.5), rel=1e-6)
    assert sens.d_x[0, 0] == pytest.approx(math.exp(0.5), rel=1e-6)


def test_parameter_free_fields_have_zero_block():
    driver = _line_driver()
    field = [ScalarField.monomial(2, 1.0, (0, 1))]
    sens = parameter_sensitivity(driver, [field], None, [0.3], 0.0, 1.0, [1.0], PRECISE)
    assert sens.d_a.shape == (1, 1)
    assert sens.d_a[0, 0] == 0.0


def test_parameter_sensitivity_matches_finite_differences():
    driver = _line_driver()
    # V(a, x) = a x + a^2 sin(x)
    field = [ScalarField.monomial(2, 1.0, (1, 1)) + ScalarField.monomial(2, 1.0, (2, 0), sin={1: 1})]
    a0, h = 0.4, 1e-5
    sens = parameter_sensitivity(driver, [field], None, [a0], 0.0, 1.0, [0.8], PRECISE)
    plus = parameter_sensitivity(driver, [field], None, [a0 + h], 0.0, 1.0, [0.8], PRECISE).value
    minus = parameter_sensitivity(driver, [field], None, [a0 - h], 0.0, 1.0, [0.8], PRECISE).value
    assert sens.d_a[0, 0] == pytest.approx((plus[0] - minus[0]) / (2 * h), rel=1e-4)


def test_growth_check_on_empty_interval():
    scenario = scalar_linear_scenario()
    fc = solve_flow(scenario.driver, scenario.fields, None, 0.5, 0.5, scenario.config)
    report = derivative_growth_check(flow_jacobian(fc, np.array([1.0])), 0, 0.0, 2.5)
    assert report.deviation == 0.0
    assert math.isnan(report.excess)


def test_derivative_growth_is_affine_in_n_beta():
    reports = []
    for horizon in [0.5, 1.0, 2.0, 4.0]:
        scenario = scalar_linear_scenario(horizon=horizon)
        fc = scenario.solve()
        record = flow_jacobian(fc, np.array([1.0]))
        table = control_table(scenario.driver)
        reports.append(derivative_growth_check(record, fc.n_beta, table.w(0, table.size - 1), 2.5))
    assert [r.n_beta for r in reports] == [0, 1, 3, 6]
    deviations = [r.deviation for r in reports]
    assert deviations == sorted(deviations)
    fit = fit_derivative_growth(reports)
    assert fit.deviation_fit.r_squared >= 0.9
    assert math.isfinite(fit.c1)


def test_second_derivative_of_linear_flow_vanishes():
    scenario = scalar_linear_scenario()
    hessian = second_derivative(scenario.solve(), np.array([0.7]))
    np.testing.assert_allclose(hessian, 0.0, atol=1e-6)


def test_second_derivative_is_symmetric(compliant, fast_config):
    fc = solve_flow(compliant.driver, compliant.fields, None, 0.0, 1.0, fast_config)
    hessian = second_derivative(fc, np.array([0.2, 0.1]))
    np.testing.assert_allclose(hessian, np.swapaxes(hessian, 1, 2), atol=1e-6)
