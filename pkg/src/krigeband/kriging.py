"""Ordinary kriging for functional data: system assembly, solve, prediction.

The predictor is the best linear unbiased combination of observed curves,
with weights from the bordered semivariogram system (unbiasedness enforced
through a Lagrange multiplier row of ones). The system is symmetric but
indefinite, so the iterative path uses conjugate residuals, which tolerates
indefiniteness; a dense direct solve backs it up and doubles as the
verification oracle in tests.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError, SolverFailureError
from .fdata import Curve, distances_to, pairwise_distances
from .variogram import eval_model

__all__ = [
    "SolverSettings",
    "KrigingSystem",
    "KrigingSolution",
    "assemble_system",
    "solve_weights",
    "solve_weights_direct",
    "predict_curve",
    "krige",
    "system_debug_dict",
]

WEIGHT_SUM_TOL = 1e-8


@dataclass(frozen=True)
class SolverSettings:
    """Iterative-solver knobs; defaults suit systems up to a few hundred sites."""

    tol: float = 1e-10
    max_iter_factor: int = 10
    jitter_scale: float = 1e-10
    jitter_retries: int = 3


class KrigingSystem:
    """Bordered (n+1)x(n+1) semivariogram system and its right-hand side.

    The gamma block has an exactly zero diagonal (h = 0 convention) and the
    border is a row/column of ones with a zero corner.
    """

    __slots__ = ("matrix", "rhs", "n")

    def __init__(self, matrix, rhs):
        matrix = np.asarray(matrix, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        n = matrix.shape[0] - 1
        if matrix.shape != (n + 1, n + 1) or rhs.shape != (n + 1,) or n < 1:
            raise ValueError("malformed kriging system")
        self.matrix = matrix
        self.rhs = rhs
        self.n = n

    def __repr__(self):
        return f"KrigingSystem(n={self.n})"


@dataclass(frozen=True)
class KrigingSolution:
    """Weights, Lagrange multiplier and solve diagnostics."""

    weights: np.ndarray
    multiplier: float
    residual_norm: float
    iterations: int
    method: str = "conjugate_residual"

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))


def assemble_system(train, model, target):
    """Build the kriging system for a target site from a fitted variogram.

    The target must not coincide with a training site (the prediction layer
    short-circuits that case); coincident training sites make the system
    singular and raise.
    """
    dmat = pairwise_distances(train.sites)
    n = train.n
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.any(dmat[off] == 0.0):
        raise SingularSystemError("coincident training sites")
    a = np.zeros((n + 1, n + 1))
    gam = eval_model(model, dmat.ravel()).reshape(n, n) if n > 1 else np.zeros((1, 1))
    np.fill_diagonal(gam, 0.0)
    a[:n, :n] = gam
    a[n, :n] = 1.0
    a[:n, n] = 1.0
    b = np.empty(n + 1)
    b[:n] = eval_model(model, distances_to(train.sites, target))
    b[n] = 1.0
    return KrigingSystem(a, b)


def _conjugate_residual(a, b, tol, max_iter):
    """Minimal-residual CG variant for symmetric (possibly indefinite) systems.

    Returns (x, residual_norm, iterations, converged). Convergence additionally
    requires the weight-sum row to be satisfied to WEIGHT_SUM_TOL/10 so that
    the unbiasedness constraint holds even for large-magnitude variograms.
    """
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return np.zeros_like(b), 0.0, 0, True
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    ar = a @ r
    ap = ar.copy()
    r_ar = float(r @ ar)
    res = nb
    n = b.size - 1
    for it in range(1, max_iter + 1):
        ap_ap = float(ap @ ap)
        if not np.isfinite(ap_ap) or ap_ap <= 0.0 or not np.isfinite(r_ar):
            return x, res, it - 1, False
        alpha = r_ar / ap_ap
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r))
        if not np.isfinite(res):
            return x, res, it, False
        if res <= tol * nb and abs(float(x[:n].sum()) - 1.0) <= 0.1 * WEIGHT_SUM_TOL:
            return x, res, it, True
        ar = a @ r
        r_ar_new = float(r @ ar)
        beta = r_ar_new / r_ar if r_ar != 0.0 else 0.0
        p = r + beta * p
        ap = ar + beta * ap
        r_ar = r_ar_new
    return x, res, max_iter, False


def _with_jitter(system, jitter):
    a = system.matrix.copy()
    idx = np.arange(system.n)
    a[idx, idx] += jitter
    return a


def solve_weights(system, tol=1e-10, max_iter=None, jitter_scale=1e-10, jitter_retries=3):
    """Solve the kriging system iteratively, with jitter retries and direct fallback.

    On breakdown or non-convergence the gamma-block diagonal receives a tiny
    jitter (scaled up tenfold per retry); if the iteration still fails, a
    dense direct solve of the original system is used. Raises
    :class:`SolverFailureError` when nothing reaches the tolerance.
    """
    if max_iter is None:
        max_iter = 10 * (system.n + 1)
    b = system.rhs
    nb = float(np.linalg.norm(b))

    jitter = jitter_scale * float(np.abs(system.matrix).max())
    attempts = [(system.matrix, 0.0)]
    for k in range(jitter_retries):
        attempts.append((None, jitter * 10.0**k))
    for a, jit in attempts:
        if a is None:
            a = _with_jitter(system, jit)
        x, res, it, ok = _conjugate_residual(a, b, tol, max_iter)
        if ok:
            # report the residual with respect to the unjittered system
            if jit != 0.0:
                res = float(np.linalg.norm(system.matrix @ x - b))
                if res > max(tol * nb, 1e-12) * 10.0:
                    continue
            return _make_solution(system, x, res, it, "conjugate_residual")

    try:
        x = np.linalg.solve(system.matrix, b)
    except np.linalg.LinAlgError:
        x = np.linalg.solve(_with_jitter(system, jitter * 10.0**jitter_retries), b)
    res = float(np.linalg.norm(system.matrix @ x - b))
    if not np.isfinite(res) or res > max(tol * nb, 1e-9 * nb):
        raise SolverFailureError(
            f"kriging solve failed: residual {res:.3e} exceeds tolerance", residual=res
        )
    return _make_solution(system, x, res, 0, "direct")


def _make_solution(system, x, res, iterations, method):
    weights = x[: system.n]
    wsum = float(weights.sum())
    if abs(wsum - 1.0) > WEIGHT_SUM_TOL:
        raise SolverFailureError(
            f"weights sum to {wsum!r}, violating the unbiasedness constraint",
            residual=res,
        )
    return KrigingSolution(weights, float(x[system.n]), res, iterations, method)


def solve_weights_direct(system):
    """Dense direct elimination; used as the reference path in tests."""
    x = np.linalg.solve(system.matrix, system.rhs)
    res = float(np.linalg.norm(system.matrix @ x - system.rhs))
    return _make_solution(system, x, res, 0, "direct")


def predict_curve(train, solution):
    """Weighted combination of training curves on the shared grid."""
    if solution.weights.size != train.n:
        raise ValueError("weight count does not match training set size")
    values = solution.weights @ train.value_matrix()
    return Curve(train.grid, values)


def krige(train, model, target, solver=None):
    """Predict the curve at a target site by ordinary kriging.

    A target coinciding with a training site returns that site's observed
    curve directly (exact interpolation; also sidesteps the ambiguity between
    the zero diagonal and a nonzero nugget in the right-hand side).
    """
    solver = solver or SolverSettings()
    d0 = distances_to(train.sites, target)
    hit = np.flatnonzero(d0 == 0.0)
    if hit.size:
        return Curve(train.grid, train.curves[hit[0]].values.copy())
    system = assemble_system(train, model, target)
    solution = solve_weights(
        system,
        tol=solver.tol,
        max_iter=solver.max_iter_factor * (system.n + 1),
        jitter_scale=solver.jitter_scale,
        jitter_retries=solver.jitter_retries,
    )
    return predict_curve(train, solution)


def system_debug_dict(system, solution):
    """JSON-ready dump of (A, b, weights, multiplier, residual)."""
    return {
        "matrix": system.matrix.tolist(),
        "rhs": system.rhs.tolist(),
        "weights": solution.weights.tolist(),
        "multiplier": solution.multiplier,
        "residual_norm": solution.residual_norm,
        "iterations": solution.iterations,
        "method": solution.method,
    }
