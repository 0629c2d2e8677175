"""Empirical trace-variogram estimation and parametric model fitting.

The trace-variogram summarizes spatial dependence of functional data through
L2 curve distances: each bin averages half the squared curve distance over
the site pairs falling in that lag class.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateFitError, EmptyVariogramError
from .fdata import pairwise_distances

__all__ = [
    "EmpiricalVariogram",
    "VariogramModel",
    "empirical_trace_variogram",
    "eval_model",
    "fit_model",
    "write_empirical_csv",
    "model_to_json",
    "model_from_json",
]

VALID_FAMILIES = ("exponential", "spherical")


@dataclass(frozen=True)
class VariogramModel:
    """Parametric semivariogram gamma(h) = nugget + partial_sill * g(h / range).

    ``g`` rises from 0 at the origin toward 1 at large lags, so the model
    tends to nugget + partial_sill as h grows. The strict h = 0 diagonal of a
    kriging system is set to 0 at assembly time regardless of the nugget
    (stationarity convention); ``eval_model`` itself returns the nugget at 0.
    """

    family: str
    nugget: float
    partial_sill: float
    range_: float

    def __post_init__(self):
        if self.family not in VALID_FAMILIES:
            raise ValueError(f"unknown variogram family: {self.family!r}")
        if not (self.nugget >= 0 and np.isfinite(self.nugget)):
            raise ValueError("nugget must be finite and >= 0")
        if not (self.partial_sill > 0 and np.isfinite(self.partial_sill)):
            raise ValueError("partial_sill must be finite and > 0")
        if not (self.range_ > 0 and np.isfinite(self.range_)):
            raise ValueError("range must be finite and > 0")

    @property
    def sill(self):
        return self.nugget + self.partial_sill


class EmpiricalVariogram:
    """Binned trace-variogram estimates: (lag center, gamma_hat, pair count)."""

    __slots__ = ("lags", "gammas", "counts", "max_lag")

    def __init__(self, lags, gammas, counts, max_lag):
        lags = np.asarray(lags, dtype=float)
        gammas = np.asarray(gammas, dtype=float)
        counts = np.asarray(counts, dtype=int)
        if not (lags.size == gammas.size == counts.size):
            raise ValueError("bin arrays must have equal length")
        if lags.size == 0:
            raise EmptyVariogramError("no bins with pairs")
        if not np.all(np.diff(lags) > 0):
            raise ValueError("lag centers must be strictly increasing")
        if not np.all(np.isfinite(gammas)) or np.any(gammas < 0):
            raise ValueError("gamma estimates must be finite and >= 0")
        if np.any(counts < 1):
            raise ValueError("bins with zero pairs must be omitted")
        self.lags = lags
        self.gammas = gammas
        self.counts = counts
        self.max_lag = float(max_lag)

    def __len__(self):
        return self.lags.size

    def bins(self):
        return list(zip(self.lags, self.gammas, self.counts))

    def __repr__(self):
        return f"EmpiricalVariogram(n_bins={len(self)}, max_lag={self.max_lag:.4g})"


def empirical_trace_variogram(data, n_bins=15, max_lag=None):
    """Estimate the trace-variogram of a dataset on equal-width lag bins.

    Each bin's estimate is the sum of squared L2 curve distances over its
    pairs divided by twice the pair count. Pairs farther apart than
    ``max_lag`` (default: half the maximum pairwise distance) are discarded;
    empty bins are omitted.
    """
    if data.n < 2:
        raise ValueError("need at least 2 sites")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    dmat = pairwise_distances(data.sites)
    if max_lag is None:
        max_lag = 0.5 * float(dmat.max())
    if not max_lag > 0:
        raise ValueError("max_lag must be > 0")

    values = data.value_matrix()
    w = data.grid.weights
    iu, ju = np.triu_indices(data.n, k=1)
    h = dmat[iu, ju]
    keep = h <= max_lag
    if not np.any(keep):
        raise EmptyVariogramError(f"no site pair within max_lag={max_lag:.6g}")
    iu, ju, h = iu[keep], ju[keep], h[keep]
    diff = values[iu] - values[ju]
    dsq = (diff * diff) @ w

    edges = np.linspace(0.0, max_lag, n_bins + 1)
    # right-closed bins; the h == 0 edge case cannot occur (duplicate coords rejected)
    which = np.clip(np.searchsorted(edges, h, side="left") - 1, 0, n_bins - 1)
    lags, gammas, counts = [], [], []
    for b in range(n_bins):
        mask = which == b
        cnt = int(mask.sum())
        if cnt == 0:
            continue
        lags.append(0.5 * (edges[b] + edges[b + 1]))
        gammas.append(float(dsq[mask].sum()) / (2.0 * cnt))
        counts.append(cnt)
    return EmpiricalVariogram(lags, gammas, counts, max_lag)


def _shape(family, s):
    """Unit-sill variogram shape g(h / range) for s = h / range >= 0."""
    s = np.asarray(s, dtype=float)
    if family == "exponential":
        return 1.0 - np.exp(-s)
    # spherical
    return np.where(s >= 1.0, 1.0, 1.5 * s - 0.5 * s**3)


def eval_model(model, h):
    """Evaluate gamma(h) for h >= 0 (scalar or array)."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("lag h must be >= 0")
    out = model.nugget + model.partial_sill * _shape(model.family, h / model.range_)
    return float(out) if out.ndim == 0 else out


def _wls_objective(log_theta, family, lags, gammas, counts, lo, hi):
    theta = np.exp(np.clip(log_theta, lo, hi))
    fit = theta[0] + theta[1] * _shape(family, lags / theta[2])
    denom = np.maximum(fit, 1e-12 * max(gammas.mean(), 1.0))
    r = (gammas - fit) / denom
    return float(counts @ (r * r))


def fit_model(emp, family="exponential", starts=None):
    """Fit a variogram model to empirical bins by weighted least squares.

    Weights are pair counts over the squared model value, minimized with a
    deterministic multi-start Nelder-Mead search on log-parameters (which
    keeps nugget, partial sill and range positive). The returned objective
    never exceeds the objective at any starting point; ties break toward the
    lexicographically smallest (nugget, partial_sill, range).

    ``starts`` overrides the default grid of starting points with explicit
    (nugget, partial_sill, range) tuples — useful to warm-start repeated
    refits of nearby datasets from an already-fitted model.
    """
    if family not in VALID_FAMILIES:
        raise ValueError(f"unknown variogram family: {family!r}")
    if len(emp) < 3:
        raise ValueError("need at least 3 bins to fit a variogram model")
    gammas = emp.gammas
    if np.all(gammas == 0.0):
        raise DegenerateFitError(
            "all empirical variogram values are zero (identical curves?)"
        )
    lags = emp.lags
    counts = emp.counts.astype(float)

    gmean = float(gammas.mean())
    gmax = float(gammas.max())
    scale = max(gmean, 1e-300)
    tau_floor = 1e-12 * scale
    sill_floor = 1e-8 * scale
    lo = np.log([tau_floor, sill_floor, 1e-3 * emp.max_lag])
    hi = np.log([10.0 * max(gmax, scale), 10.0 * max(gmax, scale), 1e3 * emp.max_lag])

    if starts is None:
        starts = [
            (tau, sill, rng)
            for tau in (tau_floor, 0.5 * gmean)
            for sill in (gmean, gmax)
            for rng in (0.25 * emp.max_lag, 0.5 * emp.max_lag, emp.max_lag)
            if sill > 0
        ]
    elif not starts:
        raise ValueError("starts must be a nonempty list of (nugget, sill, range)")

    args = (family, lags, gammas, counts, lo, hi)
    candidates = []
    for start in starts:
        x0 = np.clip(np.log(np.maximum(start, 1e-300)), lo, hi)
        # absolute-step initial simplex: behaves identically under data rescaling
        simplex = np.vstack([x0] + [x0 + 0.25 * np.eye(3)[i] for i in range(3)])
        candidates.append((x0, _wls_objective(x0, *args)))
        res = minimize(
            _wls_objective,
            x0,
            args=args,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": 1e-12,
                "fatol": 1e-14,
                "maxiter": 4000,
                "maxfev": 4000,
            },
        )
        candidates.append((res.x, _wls_objective(res.x, *args)))

    best_obj = min(obj for _, obj in candidates)
    best_thetas = [
        tuple(np.exp(np.clip(x, lo, hi))) for x, obj in candidates if obj == best_obj
    ]
    tau, sill, rng = min(best_thetas)
    return VariogramModel(family, float(tau), float(sill), float(rng))


def write_empirical_csv(emp, path):
    """Export empirical bins as ``lag,gamma,count``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag", "gamma", "count"])
        for lag, gamma, count in emp.bins():
            writer.writerow([repr(float(lag)), repr(float(gamma)), int(count)])


def model_to_json(model, path=None):
    """Serialize a fitted model; returns the JSON string, optionally writing it."""
    doc = json.dumps(
        {
            "family": model.family,
            "nugget": model.nugget,
            "partial_sill": model.partial_sill,
            "range": model.range_,
        },
        indent=2,
        sort_keys=True,
    )
    if path is not None:
        with open(path, "w") as fh:
            fh.write(doc + "\n")
    return doc


def model_from_json(text):
    obj = json.loads(text)
    return VariogramModel(
        obj["family"], float(obj["nugget"]), float(obj["partial_sill"]), float(obj["range"])
    )
