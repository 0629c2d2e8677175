"""Functional-data substrate: time grids, curves, sites, basis smoothing, L2 geometry.

Curves are stored as samples on a shared time grid; basis smoothing is a
preprocessing step, not the storage format. All integrals use composite
trapezoid quadrature on the grid, which is exact for the piecewise-linear
interpretation of sampled curves.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import GridMismatchError, IngestError, UnderdeterminedFitError

__all__ = [
    "TimeGrid",
    "Curve",
    "Site",
    "SpatialFunctionalDataset",
    "BasisSystem",
    "smooth_to_basis",
    "smooth_dataset",
    "l2_inner",
    "l2_dist_sq",
    "spatial_dist",
    "pairwise_distances",
    "distances_to",
    "read_long_csv",
    "write_long_csv",
]


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


class TimeGrid:
    """Strictly increasing time points spanning [a, b], with trapezoid weights."""

    __slots__ = ("points", "weights")

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("time grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("time grid points must be finite")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("time grid points must be strictly increasing")
        w = np.zeros_like(pts)
        d = np.diff(pts)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        self.points = _readonly(pts)
        self.weights = _readonly(w)

    @classmethod
    def uniform(cls, a, b, n):
        return cls(np.linspace(a, b, n))

    @property
    def a(self):
        return float(self.points[0])

    @property
    def b(self):
        return float(self.points[-1])

    @property
    def span(self):
        return self.b - self.a

    @property
    def n(self):
        return self.points.size

    def __len__(self):
        return self.points.size

    def same_as(self, other):
        return self.points.size == other.points.size and np.array_equal(
            self.points, other.points
        )

    def integrate(self, values):
        """Trapezoid integral of sampled values over [a, b]."""
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.points.size:
            raise GridMismatchError("values length does not match grid length")
        return float(values @ self.weights) if values.ndim == 1 else values @ self.weights

    def __repr__(self):
        return f"TimeGrid([{self.a}, {self.b}], n={len(self)})"


class Curve:
    """One functional observation: samples on a :class:`TimeGrid`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or vals.size != len(grid):
            raise ValueError("curve values must match grid length")
        if not np.all(np.isfinite(vals)):
            raise ValueError("curve values must be finite")
        self.grid = grid
        self.values = _readonly(vals)

    def __repr__(self):
        return f"Curve(n={self.values.size}, range=[{self.values.min():.4g}, {self.values.max():.4g}])"


@dataclass(frozen=True)
class Site:
    """Spatial location: u (latitude or x), v (longitude or y)."""

    u: float
    v: float
    id: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.u) and np.isfinite(self.v)):
            raise ValueError("site coordinates must be finite")


class SpatialFunctionalDataset:
    """Sites paired with curves sampled on one shared time grid."""

    __slots__ = ("sites", "curves", "grid")

    def __init__(self, sites, curves, grid=None):
        sites = list(sites)
        curves = list(curves)
        if not sites or len(sites) != len(curves):
            raise ValueError("need equal, nonzero numbers of sites and curves")
        if grid is None:
            grid = curves[0].grid
        for c in curves:
            if not c.grid.same_as(grid):
                raise GridMismatchError("all curves must share the dataset grid")
        coords = {(s.u, s.v) for s in sites}
        if len(coords) != len(sites):
            raise ValueError("duplicate site coordinates are not allowed")
        ids = [s.id for s in sites]
        if len(set(ids)) != len(ids):
            raise ValueError("site ids must be unique")
        self.sites = tuple(sites)
        self.curves = tuple(curves)
        self.grid = grid

    @property
    def n(self):
        return len(self.sites)

    def __len__(self):
        return len(self.sites)

    def value_matrix(self):
        """Curve samples stacked as an (n_sites, n_grid) array."""
        return np.vstack([c.values for c in self.curves])

    def coords(self):
        """Site coordinates as an (n_sites, 2) array."""
        return np.array([[s.u, s.v] for s in self.sites], dtype=float)

    def value_range(self):
        m = self.value_matrix()
        return float(m.max() - m.min())

    def subset(self, indices):
        idx = list(indices)
        return SpatialFunctionalDataset(
            [self.sites[i] for i in idx], [self.curves[i] for i in idx], self.grid
        )

    def with_site(self, site, curve):
        """New dataset with one extra (site, curve) pair appended."""
        return SpatialFunctionalDataset(
            list(self.sites) + [site], list(self.curves) + [curve], self.grid
        )

    def __repr__(self):
        return f"SpatialFunctionalDataset(n_sites={self.n}, grid={self.grid!r})"


@dataclass(frozen=True)
class BasisSystem:
    """A finite basis on [a, b]: cubic B-splines or a Fourier system.

    For B-splines, ``n_basis`` must be at least ``order`` (default 4, i.e.
    cubic) and knots are equally spaced on the domain. For Fourier,
    ``n_basis`` must be odd (constant plus sine/cosine pairs) and the period
    defaults to the domain length.
    """

    family: str
    n_basis: int
    domain: tuple
    order: int = 4
    period: float = None

    def __post_init__(self):
        a, b = self.domain
        if not b > a:
            raise ValueError("basis domain must have positive length")
        if self.family == "bspline":
            if self.n_basis < self.order:
                raise ValueError("bspline basis needs n_basis >= order")
        elif self.family == "fourier":
            if self.n_basis < 1 or self.n_basis % 2 == 0:
                raise ValueError("fourier basis needs odd n_basis")
            if self.period is None:
                object.__setattr__(self, "period", b - a)
        else:
            raise ValueError(f"unknown basis family: {self.family!r}")

    def design_matrix(self, x):
        """Evaluate all basis functions at points x; shape (len(x), n_basis)."""
        x = np.asarray(x, dtype=float)
        a, b = self.domain
        if self.family == "bspline":
            k = self.order - 1
            interior = np.linspace(a, b, self.n_basis - k + 1)[1:-1]
            knots = np.concatenate(([a] * (k + 1), interior, [b] * (k + 1)))
            return BSpline.design_matrix(x, knots, k).toarray()
        cols = [np.ones_like(x)]
        for j in range(1, (self.n_basis - 1) // 2 + 1):
            arg = 2.0 * np.pi * j * (x - a) / self.period
            cols.append(np.sin(arg))
            cols.append(np.cos(arg))
        return np.column_stack(cols)


def smooth_to_basis(raw, basis):
    """Least-squares projection of a curve onto a basis, re-sampled on its grid.

    The result lies in the span of the basis, so projecting twice returns the
    same curve (up to solver roundoff).
    """
    if len(raw.values) < basis.n_basis:
        raise UnderdeterminedFitError(
            f"{len(raw.values)} samples cannot determine {basis.n_basis} basis coefficients"
        )
    design = basis.design_matrix(raw.grid.points)
    coef, *_ = np.linalg.lstsq(design, raw.values, rcond=None)
    return Curve(raw.grid, design @ coef)


def smooth_dataset(data, basis):
    """Apply :func:`smooth_to_basis` to every curve of a dataset."""
    if basis is None:
        return data
    design = basis.design_matrix(data.grid.points)
    if len(data.grid) < basis.n_basis:
        raise UnderdeterminedFitError(
            f"{len(data.grid)} samples cannot determine {basis.n_basis} basis coefficients"
        )
    coefs, *_ = np.linalg.lstsq(design, data.value_matrix().T, rcond=None)
    smooth = (design @ coefs).T
    curves = [Curve(data.grid, row) for row in smooth]
    return SpatialFunctionalDataset(data.sites, curves, data.grid)


def _check_shared_grid(a, b):
    if a.grid is not b.grid and not a.grid.same_as(b.grid):
        raise GridMismatchError("curves are sampled on different grids")


def l2_inner(a, b):
    """L2 inner product of two curves by trapezoid quadrature."""
    _check_shared_grid(a, b)
    return float((a.values * b.values) @ a.grid.weights)


def l2_dist_sq(a, b):
    """Squared L2 distance between two curves on their shared grid."""
    _check_shared_grid(a, b)
    d = a.values - b.values
    return float((d * d) @ a.grid.weights)


def envelope_contains(lower_values, upper_values, values):
    """Pointwise containment mask with boundary values counting as inside.

    Reconstructing ``center ± rho * S`` from stored floats carries rounding
    error at the scale of ``|center| + rho * S``, which can be many ulps of
    the envelope value itself wherever an envelope lands near zero. The
    comparison therefore widens the envelopes by four ulps of the larger
    envelope magnitude at each point, keeping the finite-sample calibration
    guarantee exact in floating point; the padding is far below any reported
    tolerance.
    """
    pad = 4.0 * np.spacing(np.maximum(np.abs(lower_values), np.abs(upper_values)))
    return (values >= lower_values - pad) & (values <= upper_values + pad)


def spatial_dist(p, q):
    """Euclidean distance between two sites in the (u, v) plane."""
    return float(np.hypot(p.u - q.u, p.v - q.v))


def pairwise_distances(sites):
    """Symmetric matrix of Euclidean distances between sites."""
    xy = np.array([[s.u, s.v] for s in sites], dtype=float)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def distances_to(sites, target):
    """Euclidean distances from each site to a target site."""
    xy = np.array([[s.u, s.v] for s in sites], dtype=float)
    return np.hypot(xy[:, 0] - target.u, xy[:, 1] - target.v)


LONG_CSV_HEADER = ["site_id", "u", "v", "t", "value"]


def read_long_csv(path):
    """Ingest a long-format CSV with header ``site_id,u,v,t,value``.

    Rows must be grouped by site and every site must provide values at the
    identical sorted set of times. Parse errors report the offending row.
    """
    order = []
    coords = {}
    times = {}
    values = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file") from None
        if [h.strip() for h in header] != LONG_CSV_HEADER:
            raise IngestError(
                f"expected header {','.join(LONG_CSV_HEADER)}, got {','.join(header)}", row=1
            )
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != 5:
                raise IngestError(f"expected 5 fields, got {len(row)}", row=rownum)
            sid = row[0].strip()
            try:
                u, v, t, val = (float(f) for f in row[1:])
            except ValueError as exc:
                raise IngestError(f"non-numeric field ({exc})", row=rownum) from None
            if sid not in coords:
                if order and order[-1] != sid and sid in times:
                    raise IngestError(f"rows for site {sid!r} are not contiguous", row=rownum)
                order.append(sid)
                coords[sid] = (u, v)
                times[sid] = []
                values[sid] = []
            elif coords[sid] != (u, v):
                raise IngestError(f"site {sid!r} has inconsistent coordinates", row=rownum)
            elif order[-1] != sid:
                raise IngestError(f"rows for site {sid!r} are not contiguous", row=rownum)
            times[sid].append(t)
            values[sid].append(val)
    if not order:
        raise IngestError("no data rows")
    ref = np.array(sorted(times[order[0]]))
    grid = TimeGrid(ref)
    sites, curves = [], []
    for sid in order:
        t = np.array(times[sid])
        if t.size != ref.size or not np.array_equal(np.sort(t), ref):
            raise IngestError(f"site {sid!r} does not cover the shared time set")
        idx = np.argsort(t, kind="stable")
        sites.append(Site(coords[sid][0], coords[sid][1], sid))
        curves.append(Curve(grid, np.array(values[sid])[idx]))
    try:
        return SpatialFunctionalDataset(sites, curves, grid)
    except ValueError as exc:
        raise IngestError(str(exc)) from None


def write_long_csv(data, path):
    """Write a dataset in the long format accepted by :func:`read_long_csv`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LONG_CSV_HEADER)
        for site, curve in zip(data.sites, data.curves):
            for t, val in zip(data.grid.points, curve.values):
                writer.writerow([site.id, repr(site.u), repr(site.v), repr(float(t)), repr(float(val))])
