"""Shared fixtures.

Session scope is used for anything that costs more than ~a second to build
(fine Brownian grids, the oscillatory counterexample, the spiral blow-up
driver); all of them are pure values, so sharing is safe.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from roughstep.core import Partition, VectorField
from roughstep.drivers import (
    BrownianConfig,
    CounterexampleConfig,
    PolynomialPath,
    analytic_area,
    brownian_path,
    build_chain_curve,
    example1_driver,
    explosion_driver,
    ito_area,
    power_law_envelope,
    stratonovich_area,
)


@pytest.fixture(scope="session")
def gbm_field():
    return VectorField.scalar_linear()


@pytest.fixture(scope="session")
def bm1():
    """Scalar Brownian driver on 2^12 cells, the main convergence testbed."""
    cfg = BrownianConfig(d=1, level=12, seed=42)
    path = brownian_path(cfg)
    area = ito_area(path, cfg)
    return cfg, path, area


@pytest.fixture(scope="session")
def bm2():
    """Planar Brownian driver with bridge off-diagonal areas."""
    cfg = BrownianConfig(d=2, level=12, seed=42)
    path = brownian_path(cfg)
    area = ito_area(path, cfg)
    return cfg, path, area, stratonovich_area(area)


@pytest.fixture(scope="session")
def poly_pair():
    """The (t, t^2) curve with closed-form areas on 512 cells."""
    poly = PolynomialPath([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    path = poly.sample(np.linspace(0.0, 1.0, 513))
    return poly, path, analytic_area(poly, path)


@pytest.fixture(scope="session")
def smooth22():
    """A dense 2x2 field with hand-written first and second derivatives."""

    def func(y):
        u, v = float(y[0]), float(y[1])
        return np.array([[math.sin(v), math.cos(u)], [0.25 * u * v, 1.0]])

    def d1(y):
        u, v = float(y[0]), float(y[1])
        out = np.zeros((2, 2, 2))
        out[0] = [[0.0, -math.sin(u)], [0.25 * v, 0.0]]
        out[1] = [[math.cos(v), 0.0], [0.25 * u, 0.0]]
        return out

    def d2(y):
        u, v = float(y[0]), float(y[1])
        out = np.zeros((2, 2, 2, 2))
        out[0, 0] = [[0.0, -math.cos(u)], [0.0, 0.0]]
        out[0, 1] = [[0.0, 0.0], [0.25, 0.0]]
        out[1, 0] = [[0.0, 0.0], [0.25, 0.0]]
        out[1, 1] = [[-math.sin(v), 0.0], [0.0, 0.0]]
        return out

    return VectorField(2, 2, func, deriv1=d1, deriv2=d2, smoothness=math.inf)


@pytest.fixture(scope="session")
def example1():
    cfg = CounterexampleConfig()
    path, field = example1_driver(cfg)
    return cfg, path, field


@pytest.fixture(scope="session")
def spiral_driver():
    """Blow-up driver for the envelope family D = R^beta A with A = R^0.4."""
    return explosion_driver(power_law_envelope(1.2, 0.4, 0.8), 1.5)


@pytest.fixture(scope="session")
def chain6():
    return build_chain_curve(0.7, 6)


@pytest.fixture
def uniform_partition():
    def make(n, t_end=1.0):
        return Partition.uniform(0.0, t_end, n)

    return make
