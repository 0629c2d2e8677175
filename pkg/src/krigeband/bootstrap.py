"""Pointwise bootstrap band around the kriging prediction.

Resamples whole (site, curve) pairs with replacement, refits the variogram
and re-kriges each resample at the target, then takes pointwise empirical
quantiles of the resampled predictions as envelopes. Honest about its cost:
every resample pays a full variogram fit plus a kriging solve.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BaselineFailureError, KrigebandError
from .fdata import Curve, Site, SpatialFunctionalDataset, envelope_contains
from .kriging import krige

__all__ = ["BootstrapConfig", "BootstrapBand", "bootstrap_band"]


@dataclass(frozen=True)
class BootstrapConfig:
    """Resampling settings; duplicates in a resample get their coordinates
    nudged by multiples of ``coordinate_jitter`` to keep kriging systems
    nonsingular."""

    B: int = 1000
    alpha: float = 0.25
    seed: int = 0
    max_failure_fraction: float = 0.2
    coordinate_jitter: float = 1e-9

    def __post_init__(self):
        if self.B < 2:
            raise ValueError("need at least 2 resamples")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0.0 <= self.max_failure_fraction < 1.0:
            raise ValueError("max_failure_fraction must lie in [0, 1)")
        if not self.coordinate_jitter > 0.0:
            raise ValueError("coordinate_jitter must be > 0")


class BootstrapBand:
    """Quantile envelopes around the full-data prediction (no modulation/radius)."""

    __slots__ = ("center", "lower", "upper", "n_resamples", "n_failures")

    method = "bootstrap"

    def __init__(self, center, lower, upper, n_resamples, n_failures):
        if not (lower.grid.same_as(center.grid) and upper.grid.same_as(center.grid)):
            raise ValueError("envelopes must share the center grid")
        if np.any(lower.values > upper.values):
            raise ValueError("lower envelope exceeds upper envelope")
        self.center = center
        self.lower = lower
        self.upper = upper
        self.n_resamples = int(n_resamples)
        self.n_failures = int(n_failures)

    @property
    def grid(self):
        return self.center.grid

    def contains(self, curve):
        return bool(
            np.all(envelope_contains(self.lower.values, self.upper.values, curve.values))
        )

    def metadata(self):
        return {
            "method": self.method,
            "n_resamples": self.n_resamples,
            "n_failures": self.n_failures,
        }


def _resample(data, idx, jitter):
    """Dataset at the sampled indices; repeated sites are nudged apart."""
    seen = {}
    sites = []
    for i in idx:
        site = data.sites[i]
        m = seen.get(i, 0)
        seen[i] = m + 1
        if m:
            site = Site(site.u + jitter * m, site.v + jitter * m, f"{site.id}#{m}")
        sites.append(site)
    return SpatialFunctionalDataset(sites, [data.curves[i] for i in idx])


def bootstrap_band(data, target, model_fitter, cfg, solver=None):
    """Pointwise alpha/2 and 1-alpha/2 quantile band; deterministic per seed."""
    if data.n < 3:
        raise BaselineFailureError("need at least 3 sites")
    center = krige(data, model_fitter(data), target, solver=solver)

    children = np.random.SeedSequence(cfg.seed).spawn(cfg.B)
    predictions, failures = [], []
    for b, child in enumerate(children):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, data.n, size=data.n)
        try:
            sample = _resample(data, idx, cfg.coordinate_jitter)
            model = model_fitter(sample)
            predictions.append(krige(sample, model, target, solver=solver).values)
        except KrigebandError as exc:
            failures.append((b, str(exc)))
    if len(failures) > cfg.max_failure_fraction * cfg.B:
        raise BaselineFailureError(
            f"{len(failures)} of {cfg.B} bootstrap resamples failed "
            f"(limit {cfg.max_failure_fraction:.0%}); first: {failures[0][1]}"
        )

    stacked = np.vstack(predictions)
    lower = np.quantile(stacked, cfg.alpha / 2.0, axis=0)
    upper = np.quantile(stacked, 1.0 - cfg.alpha / 2.0, axis=0)
    return BootstrapBand(
        center,
        Curve(data.grid, lower),
        Curve(data.grid, upper),
        n_resamples=len(predictions),
        n_failures=len(failures),
    )
