import itertools
import math

import numpy as np
import pytest

from roughflow.errors import DimensionMismatchError, InvalidGridError
from roughflow.rough_path import (
    ControlTable,
    RoughDriver,
    YoungPath,
    accumulation,
    control_table,
    holder_domination_defect,
    holder_norm,
    interval_weights,
    load_driver,
    pure_area_driver,
    save_driver,
    signature_lift,
)
from roughflow.tensor_algebra import TruncatedTensorSeries, check_weak_geometric


def test_signature_lift_level_one_is_total_increment(zigzag_driver):
    sig = zigzag_driver.signature(0.0, 1.0)
    np.testing.assert_allclose(sig.levels[1], [0.2, 0.6], atol=1e-14)
    np.testing.assert_allclose(zigzag_driver.increments().sum(axis=0), [0.2, 0.6], atol=1e-14)
    assert check_weak_geometric(sig).passed


def test_chen_identity_on_grid(zigzag_driver):
    for i, j, k in [(0, 1, 4), (0, 2, 3), (1, 3, 4)]:
        assert zigzag_driver.chen_defect(i, j, k) <= 1e-10


def test_signature_between_nodes_is_consistent(zigzag_driver):
    left = zigzag_driver.signature(0.1, 0.37)
    right = zigzag_driver.signature(0.37, 0.9)
    assert (left * right).max_abs_diff(zigzag_driver.signature(0.1, 0.9)) < 1e-12


def test_signature_inside_one_cell_is_scaled_segment(zigzag_driver):
    sig = zigzag_driver.signature(0.0, 0.125)
    expected = TruncatedTensorSeries.from_increment([0.15, 0.05], 2)
    assert sig.max_abs_diff(expected) < 1e-14


def test_signature_outside_horizon_raises(zigzag_driver):
    with pytest.raises(InvalidGridError):
        zigzag_driver.signature(0.5, 1.5)
    with pytest.raises(InvalidGridError):
        zigzag_driver.signature(0.6, 0.5)


def test_invalid_grids_are_rejected():
    seg = TruncatedTensorSeries.from_increment([1.0], 2)
    with pytest.raises(InvalidGridError):
        RoughDriver(1, 2.5, [0.0, 0.0], [seg])
    with pytest.raises(InvalidGridError):
        RoughDriver(1, 2.5, [0.0, 1.0, 2.0], [seg])
    with pytest.raises(DimensionMismatchError):
        signature_lift([[0.0], [1.0]], [0.0, 1.0], depth=3, p=2.5)


def test_restrict_keeps_signatures(zigzag_driver):
    local = zigzag_driver.restrict(0.1, 0.8)
    assert local.start == pytest.approx(0.1)
    assert local.end == pytest.approx(0.8)
    assert local.signature(0.1, 0.8).max_abs_diff(zigzag_driver.signature(0.1, 0.8)) < 1e-12
    assert local.times.size == 5


def test_pure_area_driver_has_only_area():
    driver = pure_area_driver(1.0, 4, [[1.0, 0.0], [0.0, 0.0]])
    sig = driver.signature(0.0, 1.0)
    np.testing.assert_allclose(sig.levels[1], 0.0)
    assert sig.coefficient((0, 0)) == pytest.approx(1.0)
    assert not check_weak_geometric(sig).passed


def test_holder_norm_of_straight_line():
    times = np.linspace(0.0, 1.0, 5)
    driver = signature_lift(times[:, None], times, 2, 2.5)
    # |X^1| / h^(1/p) = h^(1 - 1/p) is largest on the whole interval
    assert holder_norm(driver) == pytest.approx(1.0)


def test_control_table_is_superadditive_and_dominated(zigzag_driver):
    table = control_table(zigzag_driver)
    assert table.superadditivity_defect() <= 1e-12
    assert holder_domination_defect(zigzag_driver, table) <= 1e-12
    assert np.all(np.diag(table.values) == 0.0)


def test_control_table_frame_columns(zigzag_driver):
    frame = control_table(zigzag_driver).to_frame()
    assert list(frame.columns) == ["i", "j", "t_i", "t_j", "w"]
    assert len(frame) == 15


def test_accumulation_of_unit_rate_control():
    table = ControlTable.from_function(np.round(np.linspace(0.0, 1.0, 11), 12), lambda s, t: t - s)
    report = accumulation(table, 0.3)
    assert report.stopping_times == pytest.approx((0.0, 0.3, 0.6, 0.9, 1.0))
    assert report.n_beta == 3


def test_accumulation_with_large_beta_has_no_stops():
    table = ControlTable.from_function(np.linspace(0.0, 1.0, 5), lambda s, t: t - s)
    report = accumulation(table, 5.0)
    assert report.n_beta == 0
    assert report.stopping_times == (0.0, 1.0)


def test_accumulation_rejects_non_positive_beta():
    table = ControlTable.from_function([0.0, 1.0], lambda s, t: t - s)
    with pytest.raises(ValueError):
        accumulation(table, 0.0)


def test_driver_file_round_trip(tmp_path, zigzag_driver):
    path = save_driver(zigzag_driver, tmp_path / "driver.json")
    again = load_driver(path)
    assert again.n_cells == zigzag_driver.n_cells
    assert again.signature(0.0, 1.0).max_abs_diff(zigzag_driver.signature(0.0, 1.0)) == 0.0


def test_young_path_interpolation_and_norm():
    young = YoungPath(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0, 1.0]))
    assert young.dim == 1
    np.testing.assert_allclose(young.increment(0.0, 0.25), [0.5])
    assert young.holder_norm(1.0) == pytest.approx(2.0)
    assert young.holder_norm(2.0) == pytest.approx(1.0 / math.sqrt(0.5))
    with pytest.raises(InvalidGridError):
        YoungPath(np.array([0.0, 0.0]), np.array([0.0, 1.0]))


def test_pure_area_driver_rejects_non_square_matrix():
    with pytest.raises(DimensionMismatchError):
        pure_area_driver(1.0, 4, [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def test_two_segment_levy_area():
    v, w = np.array([0.4, -0.1]), np.array([0.2, 0.5])
    driver = signature_lift([[0.0, 0.0], v, v + w], [0.0, 0.5, 1.0], 2, 2.5)
    level2 = driver.signature(0.0, 1.0).levels[2].reshape(2, 2)
    area = 0.5 * (level2 - level2.T)
    expected = 0.5 * (v[0] * w[1] - v[1] * w[0])
    np.testing.assert_allclose(area, [[0.0, expected], [-expected, 0.0]], atol=1e-14)


def _best_partition_sum(weights, i, j):
    interior = range(i + 1, j)
    best = 0.0
    for size in range(len(interior) + 1):
        for cut in itertools.combinations(interior, size):
            nodes = (i, *cut, j)
            best = max(best, sum(weights[a, b] for a, b in itertools.pairwise(nodes)))
    return best


def test_control_table_matches_exhaustive_partitions():
    rng = np.random.default_rng(11)
    times = np.linspace(0.0, 1.0, 12)
    driver = signature_lift(np.cumsum(rng.normal(scale=0.2, size=(12, 2)), axis=0), times, 2, 2.5)
    table = control_table(driver)
    weights = interval_weights(driver)
    for i in range(12):
        for j in range(i + 1, 12):
            assert table.w(i, j) == pytest.approx(_best_partition_sum(weights, i, j), rel=1e-12)


def test_control_of_straight_line_is_single_interval():
    times = np.linspace(0.0, 1.0, 12)
    v = np.array([0.3, 0.4])
    driver = signature_lift(times[:, None] * v, times, 2, 2.5)
    table = control_table(driver)
    assert table.w(0, 11) == pytest.approx(0.5**2.5, rel=1e-12)
    assert table.w(2, 7) == pytest.approx((0.5 * (times[7] - times[2])) ** 2.5, rel=1e-12)


def test_n_beta_is_non_increasing_in_beta():
    rng = np.random.default_rng(12)
    times = np.linspace(0.0, 1.0, 12)
    betas = np.geomspace(1e-3, 2.0, 40)
    for _ in range(5):
        driver = signature_lift(np.cumsum(rng.normal(scale=0.3, size=(12, 2)), axis=0), times, 2, 2.5)
        table = control_table(driver)
        counts = [accumulation(table, beta).n_beta for beta in betas]
        assert all(b <= a for a, b in itertools.pairwise(counts))
