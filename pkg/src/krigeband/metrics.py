"""Band quality metrics: width, interval score, coverage, and timing tallies."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError
from .fdata import Curve, envelope_contains

__all__ = [
    "band_width",
    "band_score",
    "global_coverage",
    "local_coverage",
    "CaseMetrics",
    "TimingAccumulator",
    "METRICS_HEADER",
    "write_metrics_csv",
]

METRICS_HEADER = (
    "delta",
    "S",
    "D",
    "eta",
    "c",
    "cov_l",
    "cov_g",
    "width",
    "s_alpha",
    "tt",
    "mt",
)


def _check_grid(band, curve):
    if not curve.grid.same_as(band.grid):
        raise GridMismatchError("curve and band live on different grids")


def band_width(band):
    """Integrated envelope separation over the domain."""
    return float(band.grid.integrate(band.upper.values - band.lower.values))


def band_score(band, truth, alpha):
    """Interval score: width plus 2/alpha times the integrated exceedances.

    Equals the width exactly when the truth stays inside the band, and
    penalises every excursion proportionally to its depth.
    """
    _check_grid(band, truth)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    lo, up, x = band.lower.values, band.upper.values, truth.values
    integrand = (up - lo) + (2.0 / alpha) * (
        np.maximum(lo - x, 0.0) + np.maximum(x - up, 0.0)
    )
    return float(band.grid.integrate(integrand))


def global_coverage(bands, truths):
    """Percentage of curves contained in their band at every grid point (inclusive)."""
    if len(bands) != len(truths) or not bands:
        raise ValueError("need equally many bands and truth curves, at least one")
    hits = 0
    for band, truth in zip(bands, truths):
        _check_grid(band, truth)
        hits += band.contains(truth)
    return 100.0 * hits / len(bands)


def local_coverage(bands, truths):
    """Pointwise containment frequency as a curve on the shared grid."""
    if len(bands) != len(truths) or not bands:
        raise ValueError("need equally many bands and truth curves, at least one")
    grid = bands[0].grid
    inside = np.zeros(grid.n, dtype=float)
    for band, truth in zip(bands, truths):
        _check_grid(band, truth)
        if not truth.grid.same_as(grid):
            raise GridMismatchError("all bands must share one grid")
        inside += envelope_contains(band.lower.values, band.upper.values, truth.values)
    return Curve(grid, inside / len(bands))


class TimingAccumulator:
    """Collects per-target wall times; exposes the total and the mean."""

    __slots__ = ("_times",)

    def __init__(self):
        self._times = []

    def add(self, seconds):
        if seconds < 0:
            raise ValueError("negative duration")
        self._times.append(float(seconds))

    @property
    def count(self):
        return len(self._times)

    @property
    def total(self):
        return float(sum(self._times))

    @property
    def mean(self):
        if not self._times:
            raise ValueError("no timings recorded")
        return self.total / len(self._times)


@dataclass(frozen=True)
class CaseMetrics:
    """One summary row: case labels, coverages, width, interval score, timings.

    ``cov_l`` is the mean of the pointwise coverage curve and ``cov_g`` the
    share of fully contained curves, both in percent. ``width`` and
    ``s_alpha`` are averages over the evaluation targets; ``tt``/``mt`` are
    total and mean seconds per target.
    """

    delta: int
    modulation: str
    score: str
    eta: float
    c: float
    cov_l: float
    cov_g: float
    width: float
    s_alpha: float
    tt: float
    mt: float

    def to_row(self):
        return (
            str(self.delta),
            self.modulation,
            self.score,
            "" if self.eta is None else repr(float(self.eta)),
            "" if self.c is None else repr(float(self.c)),
            repr(round(float(self.cov_l), 2)),
            repr(round(float(self.cov_g), 2)),
            repr(float(self.width)),
            repr(float(self.s_alpha)),
            repr(float(self.tt)),
            repr(float(self.mt)),
        )


def write_metrics_csv(path, rows):
    """Write summary rows under the fixed header; accepts CaseMetrics or tuples."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for row in rows:
            writer.writerow(row.to_row() if isinstance(row, CaseMetrics) else row)
