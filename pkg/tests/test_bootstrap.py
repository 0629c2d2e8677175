"""Tests for the resampling baseline band."""

import numpy as np
import pytest

from krigeband import (
    BaselineFailureError,
    BootstrapConfig,
    Curve,
    Site,
    VariogramModel,
    bootstrap_band,
)
from krigeband.errors import SolverFailureError

from conftest import make_dataset

FIXED_MODEL = VariogramModel("exponential", 0.05, 1.0, 0.7)


def fixed_fitter(data):
    return FIXED_MODEL


@pytest.fixture
def six_sites(coarse_grid):
    gen = np.random.default_rng(23)
    sites = [(float(u), float(v)) for u, v in gen.uniform(0, 2, size=(6, 2))]
    curves = gen.normal(size=(6, 5))
    return make_dataset(coarse_grid, sites, lambda k, t: curves[k])


TARGET = Site(1.0, 1.0, "q")


class TestConfig:
    def test_needs_two_resamples(self):
        with pytest.raises(ValueError):
            BootstrapConfig(B=1)

    def test_alpha_bounds(self):
        with pytest.raises(ValueError):
            BootstrapConfig(alpha=0.0)

    def test_jitter_positive(self):
        with pytest.raises(ValueError):
            BootstrapConfig(coordinate_jitter=0.0)


class TestBand:
    def test_identical_curves_zero_width(self, coarse_grid):
        data = make_dataset(
            coarse_grid, [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], lambda k, t: 2.0 + 0.0 * t
        )
        band = bootstrap_band(data, TARGET, fixed_fitter, BootstrapConfig(B=50, seed=1))
        assert np.allclose(band.upper.values - band.lower.values, 0.0, atol=1e-12)
        assert np.allclose(band.center.values, 2.0)

    def test_seed_reproducibility(self, six_sites):
        cfg = BootstrapConfig(B=60, seed=9)
        a = bootstrap_band(six_sites, TARGET, fixed_fitter, cfg)
        b = bootstrap_band(six_sites, TARGET, fixed_fitter, cfg)
        assert np.array_equal(a.lower.values, b.lower.values)
        assert np.array_equal(a.upper.values, b.upper.values)

    def test_different_seed_moves_envelopes(self, six_sites):
        a = bootstrap_band(six_sites, TARGET, fixed_fitter, BootstrapConfig(B=60, seed=9))
        b = bootstrap_band(six_sites, TARGET, fixed_fitter, BootstrapConfig(B=60, seed=10))
        assert not np.array_equal(a.lower.values, b.lower.values)

    def test_quantiles_match_replayed_resamples(self, six_sites):
        """Replaying the per-resample RNG stream reproduces the envelopes."""
        from krigeband.bootstrap import _resample
        from krigeband.kriging import krige

        cfg = BootstrapConfig(B=40, seed=4)
        band = bootstrap_band(six_sites, TARGET, fixed_fitter, cfg)

        preds = []
        for child in np.random.SeedSequence(cfg.seed).spawn(cfg.B):
            rng = np.random.default_rng(child)
            idx = rng.integers(0, six_sites.n, size=six_sites.n)
            sample = _resample(six_sites, idx, cfg.coordinate_jitter)
            preds.append(krige(sample, FIXED_MODEL, TARGET).values)
        stacked = np.vstack(preds)
        assert np.array_equal(band.lower.values, np.quantile(stacked, cfg.alpha / 2, axis=0))
        assert np.array_equal(
            band.upper.values, np.quantile(stacked, 1 - cfg.alpha / 2, axis=0)
        )

    def test_alpha_monotonicity(self, six_sites):
        wide = bootstrap_band(six_sites, TARGET, fixed_fitter, BootstrapConfig(B=80, seed=2, alpha=0.1))
        narrow = bootstrap_band(six_sites, TARGET, fixed_fitter, BootstrapConfig(B=80, seed=2, alpha=0.5))
        assert np.all(wide.lower.values <= narrow.lower.values + 1e-12)
        assert np.all(narrow.upper.values <= wide.upper.values + 1e-12)

    def test_center_is_full_data_prediction(self, six_sites):
        from krigeband.kriging import krige

        band = bootstrap_band(six_sites, TARGET, fixed_fitter, BootstrapConfig(B=20, seed=0))
        assert np.array_equal(band.center.values, krige(six_sites, FIXED_MODEL, TARGET).values)

    def test_duplicate_resamples_survive_via_jitter(self, coarse_grid):
        # with 3 sites most resamples contain duplicates; none may fail
        data = make_dataset(
            coarse_grid, [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], lambda k, t: t + k
        )
        band = bootstrap_band(data, TARGET, fixed_fitter, BootstrapConfig(B=100, seed=3))
        assert band.n_failures == 0
        assert band.n_resamples == 100

    def test_failure_fraction_aborts(self, six_sites):
        calls = {"n": 0}

        def flaky_fitter(data):
            calls["n"] += 1
            if calls["n"] > 1:  # let the center fit through, fail all resamples
                raise SolverFailureError("synthetic failure")
            return FIXED_MODEL

        with pytest.raises(BaselineFailureError):
            bootstrap_band(six_sites, TARGET, flaky_fitter, BootstrapConfig(B=20, seed=0))

    def test_metadata(self, six_sites):
        band = bootstrap_band(six_sites, TARGET, fixed_fitter, BootstrapConfig(B=25, seed=0))
        meta = band.metadata()
        assert meta["method"] == "bootstrap"
        assert meta["n_resamples"] == 25

    def test_needs_three_sites(self, coarse_grid):
        data = make_dataset(coarse_grid, [(0.0, 0.0), (1.0, 0.0)], lambda k, t: t + k)
        with pytest.raises(BaselineFailureError):
            bootstrap_band(data, TARGET, fixed_fitter, BootstrapConfig(B=10))

    def test_boundary_containment(self, six_sites):
        band = bootstrap_band(six_sites, TARGET, fixed_fitter, BootstrapConfig(B=30, seed=6))
        assert band.contains(Curve(six_sites.grid, band.upper.values.copy()))
        assert band.contains(Curve(six_sites.grid, band.lower.values.copy()))
