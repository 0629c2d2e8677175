"""Synthetic spatial functional data: deterministic mean plus a correlated field.

Sites sit on a regular grid in [-1, 1] x [0, 1]. Each curve is the scenario
mean (scenario 2 cubes it) plus noise built from i.i.d. B-spline coefficients
that are correlated across sites by C(h) = (1 - eta) * exp(-c*h) + eta. The
basis design matrix is row-normalized so that, at any fixed time point, the
covariance between two sites is exactly C of their distance.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError
from .fdata import (
    BasisSystem,
    Curve,
    Site,
    SpatialFunctionalDataset,
    TimeGrid,
    pairwise_distances,
)

__all__ = [
    "ScenarioConfig",
    "mean_function",
    "gp_covariance",
    "grid_sites",
    "scenario_mean",
    "sample_noise",
    "sample_dataset",
    "write_scenario_sidecar",
    "read_scenario_sidecar",
]

REGION = ((-1.0, 1.0), (0.0, 1.0))


@dataclass(frozen=True)
class ScenarioConfig:
    """Settings for one synthetic draw.

    ``eta`` is the long-range correlation floor (1 gives a perfectly
    correlated field), ``c`` the decay rate, ``scenario`` 1 for the plain
    mean and 2 for its cube.
    """

    scenario: int = 1
    eta: float = 0.1
    c: float = 0.1
    n_sites: int = 100
    seed: int = 0
    n_basis: int = 30
    grid: TimeGrid = field(default_factory=lambda: TimeGrid.uniform(0.0, 1.0, 101))

    def __post_init__(self):
        if self.scenario not in (1, 2):
            raise ValueError("scenario must be 1 or 2")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not self.c > 0.0:
            raise ValueError("c must be > 0")
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        if self.n_basis < 4:
            raise ValueError("need at least 4 basis functions for a cubic basis")

    def basis(self):
        a, b = self.grid.points[0], self.grid.points[-1]
        return BasisSystem("bspline", self.n_basis, (float(a), float(b)))


def mean_function(t):
    """Smooth reference mean on [0, 1]; scalar or array argument."""
    t = np.asarray(t, dtype=float)
    arg = 2.0 * np.pi * t + 0.5
    if np.any(arg <= 0.0):
        raise ValueError("mean function undefined where 2*pi*t + 1/2 <= 0")
    out = 0.5 * t + np.sin(2.0 * np.pi * t) - 2.0 * np.sin(2.0 * np.pi * t - 1.0) * np.log(arg)
    return float(out) if out.ndim == 0 else out


def gp_covariance(h, eta, c):
    """Site covariance (1 - eta) * exp(-c*h) + eta; equals 1 at h = 0."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if not c > 0.0:
        raise ValueError("c must be > 0")
    h = np.asarray(h, dtype=float)
    if np.any(h < 0.0):
        raise ValueError("distances must be >= 0")
    out = (1.0 - eta) * np.exp(-c * h) + eta
    return float(out) if out.ndim == 0 else out


def grid_sites(n):
    """First n sites of the smallest square grid covering [-1,1] x [0,1], row-major."""
    if n < 1:
        raise ValueError("need at least one site")
    side = math.ceil(math.sqrt(n))
    us = np.linspace(-1.0, 1.0, side) if side > 1 else np.array([0.0])
    vs = np.linspace(0.0, 1.0, side) if side > 1 else np.array([0.5])
    sites = []
    for i, v in enumerate(vs):
        for j, u in enumerate(us):
            k = i * side + j
            if k >= n:
                return sites
            sites.append(Site(float(u), float(v), f"s{k:03d}"))
    return sites


def scenario_mean(cfg):
    """Mean curve on the configured grid: the reference mean, cubed in scenario 2."""
    mu = mean_function(cfg.grid.points)
    if cfg.scenario == 2:
        mu = mu**3
    return Curve(cfg.grid, mu)


def _site_cov_sqrt(sites, eta, c):
    """Symmetric square root of the site covariance matrix (with 1e-10 jitter)."""
    sigma = gp_covariance(pairwise_distances(sites), eta, c)
    sigma = sigma + 1e-10 * np.eye(len(sites))
    w, v = np.linalg.eigh(sigma)
    if w[-1] <= 0.0 or w[0] < -1e-8 * w[-1]:
        raise GenerationError(
            "site covariance matrix is not positive semidefinite after jitter"
        )
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_noise(cfg, sites=None, rng=None):
    """Noise matrix (n_sites, n_grid) with fixed-time site covariance C(h).

    Coefficients on the cubic B-spline basis are standard normal in each
    basis direction and correlated across sites by C(h); the design matrix
    rows are scaled to unit Euclidean norm so the site covariance carries
    over to every time point unchanged.
    """
    if sites is None:
        sites = grid_sites(cfg.n_sites)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    root = _site_cov_sqrt(sites, cfg.eta, cfg.c)
    design = cfg.basis().design_matrix(cfg.grid.points)
    norms = np.sqrt((design * design).sum(axis=1))
    if np.any(norms <= 0.0):
        raise GenerationError("basis design matrix has a zero row")
    design = design / norms[:, None]
    coeffs = root @ rng.standard_normal((len(sites), cfg.n_basis))
    return coeffs @ design.T


def sample_dataset(cfg):
    """One scenario draw as a dataset; bit-identical for a fixed config."""
    sites = grid_sites(cfg.n_sites)
    mu = scenario_mean(cfg).values
    noise = sample_noise(cfg, sites=sites)
    curves = [Curve(cfg.grid, mu + noise[i]) for i in range(len(sites))]
    return SpatialFunctionalDataset(sites, curves)


def write_scenario_sidecar(path, cfg):
    """Record the generating settings next to an exported dataset."""
    payload = {
        "scenario": cfg.scenario,
        "eta": cfg.eta,
        "c": cfg.c,
        "n_sites": cfg.n_sites,
        "seed": cfg.seed,
        "n_basis": cfg.n_basis,
        "grid": [float(cfg.grid.points[0]), float(cfg.grid.points[-1]), cfg.grid.n],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_scenario_sidecar(path):
    with open(path) as fh:
        payload = json.load(fh)
    a, b, n = payload.pop("grid")
    return ScenarioConfig(grid=TimeGrid.uniform(a, b, int(n)), **payload)
