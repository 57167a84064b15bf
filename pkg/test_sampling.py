import math

import numpy as np
import pytest

from roughflow.regression import fit_geometric_rate, fit_line, fit_loglog
from roughflow.sampling import ball_sample, sphere_sample, unit_directions


def test_directions_are_unit_and_deterministic():
    dirs = unit_directions(3, 20, seed=7)
    assert dirs.shape == (20, 3)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(dirs, unit_directions(3, 20, seed=7))
    assert not np.array_equal(dirs, unit_directions(3, 20, seed=8))


def test_sphere_and_ball_respect_radius():
    np.testing.assert_allclose(np.linalg.norm(sphere_sample(2, 16, 3.0), axis=1), 3.0)
    ball = ball_sample(2, 30, 2.0)
    assert ball.shape == (30, 2)
    norms = np.linalg.norm(ball, axis=1)
    assert norms.max() == pytest.approx(2.0)
    assert np.all(norms <= 2.0 + 1e-12)
    assert norms.min() < 1.0


def test_sampling_rejects_empty_requests():
    with pytest.raises(ValueError):
        unit_directions(0, 4)
    with pytest.raises(ValueError):
        unit_directions(2, 0)


def test_fit_line_recovers_slope():
    x = np.arange(6.0)
    fit = fit_line(x, 2.0 * x - 1.0)
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(-1.0)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.n_points == 6


def test_fit_line_needs_two_distinct_points():
    fit = fit_line([1.0, 1.0, math.nan], [0.0, 2.0, 3.0])
    assert math.isnan(fit.slope)
    assert fit.n_points == 2


def test_loglog_and_geometric_fits_skip_exact_zeros():
    h = np.array([0.5, 0.25, 0.125, 0.0625])
    assert fit_loglog(h, 3.0 * h**1.5).slope == pytest.approx(1.5)
    rate, fit = fit_geometric_rate([0, 1, 2, 3, 4], [1.0, 0.25, 0.0625, 0.015625, 0.0])
    assert rate == pytest.approx(0.25)
    assert fit.n_points == 4
