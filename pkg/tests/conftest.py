import math

import numpy as np
import pytest

from whitham_lab.field_core import Grid1D, RealField
from whitham_lab.harness import default_config, initial_data, run_base
from whitham_lab.hierarchy import build_hierarchy


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def data(cfg):
    return initial_data(cfg)


@pytest.fixture(scope="session")
def base(cfg, data):
    return run_base(cfg, data)


@pytest.fixture(scope="session")
def hier1(base):
    return build_hierarchy(base, 1)


@pytest.fixture(scope="session")
def hier2(base):
    return build_hierarchy(base, 2)


@pytest.fixture
def circle():
    return Grid1D(2 * math.pi, 64)


def smooth_field(grid, seed, modes=5, scale=1.0):
    """Random trigonometric polynomial with a handful of low modes."""
    rng = np.random.default_rng(seed)
    x = 2 * np.pi * (grid.x - grid.origin) / grid.length
    v = np.zeros(grid.points)
    for m in range(1, modes + 1):
        a, b = rng.normal(size=2) / m**2
        v += a * np.cos(m * x) + b * np.sin(m * x)
    return RealField(grid, scale * v)


@pytest.fixture(scope="session")
def table1(cfg, data, base, hier1):
    from whitham_lab.harness import run_convergence

    return run_convergence(cfg, study=(data, base, hier1))
