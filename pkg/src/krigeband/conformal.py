"""Distribution-free prediction bands around a kriged curve.

Pipeline: split the sites by proximity to the target, fit a trace-variogram
on the near (training) side, krige the center curve, then re-predict the
target once per held-out curve from the rest of the held-out set. The spread
of those surrogate predictions defines a modulation function (band shape) and
nonconformity scores whose empirical quantile sets the band radius.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConformalStageError,
    KrigebandError,
    SplitDegenerateError,
    SurrogateFailureError,
)
from .fdata import Curve, distances_to, envelope_contains
from .kriging import SolverSettings, krige
from .variogram import empirical_trace_variogram, fit_model

__all__ = [
    "CaseConfig",
    "ProximitySplit",
    "SurrogateSet",
    "PredictionBand",
    "ConformalResult",
    "default_model_fitter",
    "resolve_epsilon",
    "proximity_split",
    "surrogate_predictions",
    "modulation_sup",
    "modulation_sqrt",
    "score_sup",
    "score_sqrt",
    "conformal_radius",
    "conformal_predict",
    "conformal_predict_detailed",
    "case_configs",
    "write_band_csv",
]

DELTA_CHOICES = (25, 50, 75)
MAX_SURROGATE_FAILURE_FRACTION = 0.1


@dataclass(frozen=True)
class CaseConfig:
    """One experimental case: proximity threshold x modulation x score, plus alpha.

    ``epsilon_floor`` guards the modulation against vanishing where surrogates
    coincide with the center; ``None`` floors at 1e-8 times the dataset value
    range. ``score_sqrt_squared_denominator`` switches the integral score to
    divide by the squared modulation instead of its first power.
    """

    alpha: float = 0.25
    delta_percentile: int = 50
    modulation: str = "sup"
    score: str = "sup"
    epsilon_floor: float = None
    score_sqrt_squared_denominator: bool = False
    variogram_family: str = "exponential"
    variogram_bins: int = 15
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.delta_percentile not in DELTA_CHOICES:
            raise ValueError(f"delta_percentile must be one of {DELTA_CHOICES}")
        if self.modulation not in ("sup", "sqrt"):
            raise ValueError("modulation must be 'sup' or 'sqrt'")
        if self.score not in ("sup", "sqrt"):
            raise ValueError("score must be 'sup' or 'sqrt'")
        if self.epsilon_floor is not None and not self.epsilon_floor > 0:
            raise ValueError("epsilon_floor must be > 0")

    @property
    def label(self):
        return f"d{self.delta_percentile},S{self.modulation},D{self.score}"

    @classmethod
    def from_label(cls, label, **kwargs):
        """Parse labels like ``d50,Ssqrt,Dsup`` (case-insensitive, Δ accepted)."""
        parts = [p.strip() for p in label.split(",")]
        if len(parts) != 3:
            raise ValueError(f"bad case label {label!r}; expected e.g. 'd50,Ssqrt,Dsup'")

        def strip_tag(text, tags, valid):
            if text in valid:
                return text
            return text[1:] if text and text[0] in tags else text

        kinds = ("sup", "sqrt")
        delta = strip_tag(parts[0].lower(), "dδ", ("25", "50", "75"))
        mod = strip_tag(parts[1].lower(), "s", kinds)
        score = strip_tag(parts[2].lower(), "d", kinds)
        try:
            delta = int(delta)
        except ValueError:
            raise ValueError(f"bad proximity threshold in case label {label!r}") from None
        return cls(delta_percentile=delta, modulation=mod, score=score, **kwargs)


def case_configs(alpha=0.25, **kwargs):
    """All 12 cases: 3 proximity thresholds x 2 modulations x 2 scores."""
    return [
        CaseConfig(alpha=alpha, delta_percentile=d, modulation=s, score=sc, **kwargs)
        for d in DELTA_CHOICES
        for s in ("sup", "sqrt")
        for sc in ("sup", "sqrt")
    ]


@dataclass(frozen=True)
class ProximitySplit:
    """Index split around a distance threshold: near sites train, the rest calibrate."""

    train_idx: tuple
    test_idx: tuple
    delta_k: float


class SurrogateSet:
    """Per-calibration-site kriging predictions at the target, plus any failures."""

    __slots__ = ("predictions", "test_idx", "failures")

    def __init__(self, predictions, test_idx, failures=()):
        self.predictions = tuple(predictions)
        self.test_idx = tuple(test_idx)
        self.failures = tuple(failures)

    def __len__(self):
        return len(self.predictions)

    def deviations(self, center):
        """Absolute deviations |center - surrogate| stacked as (l, n_grid)."""
        c = center.values
        return np.abs(np.vstack([p.values for p in self.predictions]) - c)


class PredictionBand:
    """Center curve with symmetric envelopes center +/- radius * modulation."""

    __slots__ = ("center", "modulation", "rho", "lower", "upper")

    def __init__(self, center, modulation, rho):
        if not modulation.grid.same_as(center.grid):
            raise ValueError("modulation must share the center grid")
        if np.any(modulation.values <= 0.0):
            raise ValueError("modulation must be positive everywhere")
        if not rho >= 0.0:
            raise ValueError("radius must be >= 0")
        margin = rho * modulation.values
        self.center = center
        self.modulation = modulation
        self.rho = float(rho)
        self.lower = Curve(center.grid, center.values - margin)
        self.upper = Curve(center.grid, center.values + margin)

    @property
    def grid(self):
        return self.center.grid

    def contains(self, curve):
        """True when the curve stays inside the envelopes at every grid point.

        Boundary values count as inside (see ``envelope_contains``).
        """
        return bool(
            np.all(envelope_contains(self.lower.values, self.upper.values, curve.values))
        )


@dataclass
class ConformalResult:
    """Everything produced by one band construction, for reporting and checks."""

    band: PredictionBand
    split: ProximitySplit
    surrogates: SurrogateSet
    scores: tuple
    model: object
    config: CaseConfig
    timings: dict

    @property
    def rho(self):
        return self.band.rho

    def metadata(self):
        return {
            "alpha": self.config.alpha,
            "delta_percentile": self.config.delta_percentile,
            "modulation": self.config.modulation,
            "score": self.config.score,
            "delta_k": self.split.delta_k,
            "rho": self.rho,
            "n_train": len(self.split.train_idx),
            "n_test": len(self.split.test_idx),
            "timings": self.timings,
        }


def default_model_fitter(family="exponential", n_bins=15):
    """Fitter callable: dataset -> variogram model (empirical bins + WLS fit)."""

    def fit(train):
        return fit_model(empirical_trace_variogram(train, n_bins=n_bins), family=family)

    return fit


def proximity_split(data, target, p):
    """Split site indices by the p-th percentile of distances to the target.

    Sites strictly closer than the threshold train the predictor; ties and
    farther sites calibrate. Raises when either side comes out empty.
    """
    if p not in DELTA_CHOICES:
        raise ValueError(f"percentile must be one of {DELTA_CHOICES}")
    if data.n < 3:
        raise SplitDegenerateError("need at least 3 sites to split")
    d0 = distances_to(data.sites, target)
    delta_k = float(np.percentile(d0, p))
    train = tuple(int(i) for i in np.flatnonzero(d0 < delta_k))
    test = tuple(int(i) for i in np.flatnonzero(d0 >= delta_k))
    if not train or not test:
        raise SplitDegenerateError(
            f"proximity split at the {p}-th percentile left an empty side; "
            "try a different percentile"
        )
    return ProximitySplit(train, test, delta_k)


def surrogate_predictions(split, data, model_fitter, target, solver=None):
    """Kriging center plus one surrogate prediction per calibration curve.

    The variogram is fitted once on the training subset and reused throughout,
    keeping the center and surrogates comparable.  Each surrogate re-predicts
    the target location from the calibration curves with one of them held out,
    so the spread of the surrogates around the center measures how much the
    prediction moves when it has to rely on the more distant sites.  Individual
    surrogate failures are recorded; more than 10% failing aborts the run.
    """
    test_idx = list(split.test_idx)
    if len(test_idx) < 2:
        raise SplitDegenerateError(
            "need at least two calibration curves to build surrogate predictions"
        )
    train = data.subset(split.train_idx)
    model = model_fitter(train)
    center = krige(train, model, target, solver=solver)
    predictions, kept, failures = [], [], []
    for pos, j in enumerate(test_idx):
        held_out = data.subset(test_idx[:pos] + test_idx[pos + 1 :])
        try:
            predictions.append(krige(held_out, model, target, solver=solver))
            kept.append(j)
        except KrigebandError as exc:
            failures.append((j, str(exc)))
    if len(failures) > MAX_SURROGATE_FAILURE_FRACTION * len(test_idx):
        raise SurrogateFailureError(
            f"{len(failures)} of {len(test_idx)} surrogate predictions failed"
        )
    return center, model, SurrogateSet(predictions, kept, failures)


def resolve_epsilon(config, data):
    """Modulation floor: the configured value, or 1e-8 x the data value range."""
    if config.epsilon_floor is not None:
        return config.epsilon_floor
    return 1e-8 * max(data.value_range(), 1.0)


def modulation_sup(center, surr, eps):
    """Pointwise maximum absolute deviation of the surrogates, floored at eps."""
    if len(surr) == 0:
        raise ValueError("need at least one surrogate prediction")
    s = surr.deviations(center).max(axis=0)
    return Curve(center.grid, np.maximum(s, eps))


def modulation_sqrt(center, surr, eps):
    """Pointwise root-mean-square deviation of the surrogates, floored at eps."""
    if len(surr) == 0:
        raise ValueError("need at least one surrogate prediction")
    dev = surr.deviations(center)
    s = np.sqrt((dev * dev).mean(axis=0))
    return Curve(center.grid, np.maximum(s, eps))


def _check_positive_modulation(s):
    if np.any(s.values <= 0.0):
        raise ValueError("modulation must be positive everywhere")


def score_sup(center, surrogate, s):
    """Sup-norm of the modulated deviation between surrogate and center."""
    _check_positive_modulation(s)
    return float(np.max(np.abs(center.values - surrogate.values) / s.values))


def score_sqrt(center, surrogate, s, squared_denominator=False):
    """Integral form: sqrt of the mean squared deviation over the modulation.

    The integral is averaged over the span of the domain so that the score —
    and with it the radius of the heuristic sqrt band — does not scale with
    the length of the time axis (on a unit interval this is the plain
    integral). The denominator uses the modulation to the first power by
    default; pass ``squared_denominator=True`` for the dimensionally
    homogeneous variant.
    """
    _check_positive_modulation(s)
    denom = s.values * s.values if squared_denominator else s.values
    integrand = (center.values - surrogate.values) ** 2 / denom
    return float(np.sqrt(center.grid.integrate(integrand) / center.grid.span))


def conformal_radius(scores, alpha):
    """Finite-sample radius: the k-th smallest score, k = ceil((l+1)(1-alpha)).

    k is clamped to l, so the radius always belongs to the score list and at
    least k of the scores sit at or below it.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("empty score list")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    l = scores.size
    k = min(int(np.ceil((l + 1) * (1.0 - alpha))), l)
    return float(np.sort(scores)[k - 1])


def _score_fn(config):
    if config.score == "sup":
        return score_sup
    return lambda c, x, s: score_sqrt(
        c, x, s, squared_denominator=config.score_sqrt_squared_denominator
    )


def conformal_predict_detailed(data, target, config):
    """Full band construction returning all intermediates (see ConformalResult)."""
    timings = {}
    t0 = time.perf_counter()
    try:
        split = proximity_split(data, target, config.delta_percentile)
    except KrigebandError as exc:
        raise ConformalStageError("split", exc) from exc
    timings["split"] = time.perf_counter() - t0

    fitter = default_model_fitter(config.variogram_family, config.variogram_bins)
    t0 = time.perf_counter()
    try:
        center, model, surr = surrogate_predictions(
            split, data, fitter, target, solver=config.solver
        )
    except ConformalStageError:
        raise
    except KrigebandError as exc:
        stage = "variogram" if "variogram" in type(exc).__name__.lower() else "kriging"
        raise ConformalStageError(stage, exc) from exc
    timings["kriging"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        band, scores = score_and_band(center, surr, config, resolve_epsilon(config, data))
    except (KrigebandError, ValueError) as exc:
        raise ConformalStageError("scoring", exc) from exc
    timings["scoring"] = time.perf_counter() - t0
    return ConformalResult(band, split, surr, scores, model, config, timings)


def score_and_band(center, surr, config, eps):
    """Modulation, scores and radius for an already-computed surrogate set."""
    modulate = modulation_sup if config.modulation == "sup" else modulation_sqrt
    s = modulate(center, surr, eps)
    score = _score_fn(config)
    scores = tuple(score(center, pred, s) for pred in surr.predictions)
    rho = conformal_radius(scores, config.alpha)
    return PredictionBand(center, s, rho), scores


def conformal_predict(data, target, config):
    """Construct the prediction band at a target site; see the module docstring."""
    return conformal_predict_detailed(data, target, config).band


def write_band_csv(path, grid, center, lower, upper, modulation=None):
    """Export band envelopes as ``t,center,lower,upper,S`` (S blank if absent)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "center", "lower", "upper", "S"])
        svals = modulation.values if modulation is not None else None
        for i, t in enumerate(grid.points):
            row = [
                repr(float(t)),
                repr(float(center.values[i])),
                repr(float(lower.values[i])),
                repr(float(upper.values[i])),
                repr(float(svals[i])) if svals is not None else "",
            ]
            writer.writerow(row)
