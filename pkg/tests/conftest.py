"""Shared fixtures: small handmade datasets and one mid-size simulated field."""

import numpy as np
import pytest

from krigeband import (
    Curve,
    ScenarioConfig,
    Site,
    SpatialFunctionalDataset,
    TimeGrid,
    VariogramModel,
    sample_dataset,
)


@pytest.fixture
def unit_grid():
    return TimeGrid.uniform(0.0, 1.0, 101)


@pytest.fixture
def coarse_grid():
    return TimeGrid.uniform(0.0, 1.0, 5)


def make_dataset(grid, sites, curve_fn):
    """Dataset with one curve per (u, v) pair, values from curve_fn(k, t)."""
    site_objs = [Site(u, v, f"p{k}") for k, (u, v) in enumerate(sites)]
    curves = [Curve(grid, curve_fn(k, grid.points)) for k in range(len(sites))]
    return SpatialFunctionalDataset(site_objs, curves, grid)


@pytest.fixture
def line_dataset(coarse_grid):
    """Five sites on a line with affine curves: easy to reason about by hand."""
    sites = [(float(k), 0.0) for k in range(5)]
    return make_dataset(coarse_grid, sites, lambda k, t: k + 0.5 * t)


@pytest.fixture
def plateau_model():
    """A variogram that is effectively flat beyond tiny lags."""
    return VariogramModel("exponential", 0.0, 1.0, 1e-6)


@pytest.fixture(scope="session")
def sim_dataset():
    """100-site scenario-1 field shared by the slower conformal/runner tests."""
    return sample_dataset(ScenarioConfig(scenario=1, eta=0.1, c=0.9, n_sites=100, seed=3))


@pytest.fixture(scope="session")
def small_sim_dataset():
    return sample_dataset(ScenarioConfig(scenario=1, eta=0.1, c=0.5, n_sites=25, seed=11))


@pytest.fixture(scope="session")
def scattered_dataset():
    """Irregular 24-site layout: every leave-one-out proximity split, down to
    the 25th-percentile one, leaves enough distinct pair distances to fit a
    variogram (regular grids do not at this size)."""
    gen = np.random.default_rng(0)
    grid = TimeGrid.uniform(0.0, 1.0, 41)
    coords = gen.uniform(0.0, 2.0, size=(24, 2))
    sites = [Site(float(u), float(v), f"r{i:02d}") for i, (u, v) in enumerate(coords)]
    curves = [
        Curve(grid, (u + v) * grid.points + np.sin(2.0 * np.pi * grid.points + u))
        for u, v in coords
    ]
    return SpatialFunctionalDataset(sites, curves)


def rng(seed=0):
    return np.random.default_rng(seed)
