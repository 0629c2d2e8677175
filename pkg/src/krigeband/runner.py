"""Leave-one-out experiment drivers: per-case evaluation, the 12-case sweep,
and the bootstrap comparator, aggregated into summary metric rows."""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bootstrap import bootstrap_band
from .conformal import (
    DELTA_CHOICES,
    case_configs,
    conformal_predict_detailed,
    default_model_fitter,
    proximity_split,
    resolve_epsilon,
    score_and_band,
    surrogate_predictions,
)
from .metrics import CaseMetrics, TimingAccumulator, band_score, band_width, global_coverage, local_coverage
from .variogram import empirical_trace_variogram, fit_model

__all__ = [
    "TargetOutcome",
    "CaseEvaluation",
    "parallel_map",
    "loo_rest",
    "run_case_loocv",
    "run_sweep",
    "run_bootstrap_loocv",
]


def parallel_map(fn, items, threads=1):
    """Ordered map, optionally over a thread pool (results in input order)."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def loo_rest(data, i):
    """(remaining dataset, held-out site, held-out curve) for target index i."""
    rest = data.subset([j for j in range(data.n) if j != i])
    return rest, data.sites[i], data.curves[i]


@dataclass(frozen=True)
class TargetOutcome:
    """One held-out target: its band, the observed truth, and calibration facts."""

    site_id: str
    band: object
    truth: object
    seconds: float
    rho: float = None
    n_scores: int = 0
    k: int = 0
    inside_calibration: int = 0


@dataclass(frozen=True)
class CaseEvaluation:
    """A case's outcomes across all targets plus the aggregated metrics row."""

    label: str
    config: object
    metrics: CaseMetrics
    outcomes: tuple


def _calibration_k(n_scores, alpha):
    return min(int(math.ceil((n_scores + 1) * (1.0 - alpha))), n_scores)


def _aggregate(label, config, outcomes, eta, c, alpha, delta, modulation, score):
    bands = [o.band for o in outcomes]
    truths = [o.truth for o in outcomes]
    timer = TimingAccumulator()
    for o in outcomes:
        timer.add(o.seconds)
    local = local_coverage(bands, truths)
    metrics = CaseMetrics(
        delta=delta,
        modulation=modulation,
        score=score,
        eta=eta,
        c=c,
        cov_l=100.0 * float(local.values.mean()),
        cov_g=global_coverage(bands, truths),
        width=float(np.mean([band_width(b) for b in bands])),
        s_alpha=float(np.mean([band_score(b, t, alpha) for b, t in zip(bands, truths)])),
        tt=timer.total,
        mt=timer.mean,
    )
    return CaseEvaluation(label, config, metrics, tuple(outcomes))


def _conformal_outcome(site_id, result, truth, seconds):
    l = len(result.scores)
    inside = sum(result.band.contains(p) for p in result.surrogates.predictions)
    return TargetOutcome(
        site_id=site_id,
        band=result.band,
        truth=truth,
        seconds=seconds,
        rho=result.rho,
        n_scores=l,
        k=_calibration_k(l, result.config.alpha),
        inside_calibration=int(inside),
    )


def run_case_loocv(data, config, eta=None, c=None, threads=1):
    """Leave-one-site-out evaluation of a single case over every site."""

    def work(i):
        rest, target, truth = loo_rest(data, i)
        t0 = time.perf_counter()
        result = conformal_predict_detailed(rest, target, config)
        seconds = time.perf_counter() - t0
        return _conformal_outcome(target.id or f"site{i}", result, truth, seconds)

    outcomes = parallel_map(work, range(data.n), threads)
    return _aggregate(
        config.label, config, outcomes, eta, c,
        config.alpha, config.delta_percentile, config.modulation, config.score,
    )


def run_sweep(data, alpha=0.25, eta=None, c=None, threads=1, variogram_family="exponential", variogram_bins=15):
    """All 12 cases over every leave-one-out target.

    The proximity split, variogram fit and surrogate kriging depend only on
    the threshold, so they are computed once per (target, threshold) and
    shared by the four modulation/score variants; each variant's reported
    time includes that shared stage, i.e. what a standalone run would cost.
    Results equal per-case ``run_case_loocv`` outputs exactly (same inputs,
    same arithmetic), only faster.
    """
    configs = {
        (cfg.delta_percentile, cfg.modulation, cfg.score): cfg
        for cfg in case_configs(
            alpha, variogram_family=variogram_family, variogram_bins=variogram_bins
        )
    }
    variants = [(m, s) for m in ("sup", "sqrt") for s in ("sup", "sqrt")]
    fitter = default_model_fitter(variogram_family, variogram_bins)

    def work(i):
        rest, target, truth = loo_rest(data, i)
        out = {}
        for d in DELTA_CHOICES:
            t0 = time.perf_counter()
            split = proximity_split(rest, target, d)
            center, model, surr = surrogate_predictions(
                split, rest, fitter, target, solver=configs[(d, "sup", "sup")].solver
            )
            shared = time.perf_counter() - t0
            for m, s in variants:
                cfg = configs[(d, m, s)]
                t1 = time.perf_counter()
                band, scores = score_and_band(center, surr, cfg, resolve_epsilon(cfg, rest))
                seconds = shared + (time.perf_counter() - t1)
                l = len(scores)
                inside = sum(band.contains(p) for p in surr.predictions)
                out[(d, m, s)] = TargetOutcome(
                    site_id=target.id or f"site{i}",
                    band=band,
                    truth=truth,
                    seconds=seconds,
                    rho=band.rho,
                    n_scores=l,
                    k=_calibration_k(l, alpha),
                    inside_calibration=int(inside),
                )
        return out

    per_target = parallel_map(work, range(data.n), threads)
    evaluations = []
    for key, cfg in configs.items():
        d, m, s = key
        outcomes = [row[key] for row in per_target]
        evaluations.append(
            _aggregate(cfg.label, cfg, outcomes, eta, c, alpha, d, m, s)
        )
    return evaluations


def warm_start_fitter(base_model, family="exponential", n_bins=15):
    """Single-start refitter seeded at an existing model's parameters.

    Used for bootstrap resamples, where thousands of nearby datasets get
    refitted: one Nelder-Mead start at the full-data optimum replaces the
    default multi-start grid. Each resample still pays a full empirical
    estimate and optimization, which is the cost the comparison measures.
    """
    starts = [(base_model.nugget, base_model.partial_sill, base_model.range_)]

    def fit(sample):
        emp = empirical_trace_variogram(sample, n_bins=n_bins)
        return fit_model(emp, family=family, starts=starts)

    return fit


def run_bootstrap_loocv(data, cfg, threads=1, variogram_family="exponential", variogram_bins=15, warm_start=True):
    """Leave-one-site-out bootstrap bands with per-target derived seeds."""
    seeds = np.random.SeedSequence(cfg.seed).generate_state(data.n)
    base_fitter = default_model_fitter(variogram_family, variogram_bins)

    def work(i):
        rest, target, truth = loo_rest(data, i)
        if warm_start:
            fitter = warm_start_fitter(
                base_fitter(rest), family=variogram_family, n_bins=variogram_bins
            )
        else:
            fitter = base_fitter
        t0 = time.perf_counter()
        band = bootstrap_band(rest, target, fitter, replace(cfg, seed=int(seeds[i])))
        seconds = time.perf_counter() - t0
        return TargetOutcome(
            site_id=target.id or f"site{i}", band=band, truth=truth, seconds=seconds
        )

    outcomes = parallel_map(work, range(data.n), threads)
    return _aggregate(
        "bootstrap", None, outcomes, None, None, cfg.alpha, "bootstrap", "", ""
    )
