import numpy as np
import pytest

from roughflow.config import SolverConfig
from roughflow.rough_path import signature_lift
from roughflow.scenarios import compliant_scenario, smooth_path_driver


@pytest.fixture
def fast_config():
    return SolverConfig(p=2.5, substeps=8, sample_points=16, radius=1.0, dyadic_tolerance=1e-7)


@pytest.fixture
def planar_driver():
    return smooth_path_driver(1.0, 8)


@pytest.fixture
def zigzag_driver():
    times = np.linspace(0.0, 1.0, 5)
    points = [[0.0, 0.0], [0.3, 0.1], [0.1, 0.4], [0.5, 0.3], [0.2, 0.6]]
    return signature_lift(points, times, 2, 2.5)


@pytest.fixture
def compliant():
    return compliant_scenario(n_cells=8)
