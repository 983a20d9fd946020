"""Screening scores for L1-constrained least squares and their private updates.

Objective convention: ``f(u) = ||u - y||^2 / (2n)`` with ``u = Xw``, so that
``grad f(u) = (u - y) / n`` and ``f`` is ``1/n``-smooth and ``1/n``-strongly
convex in ``u``. A coordinate ``i`` with score ``s_i < 0`` is certified zero
at the constrained optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Dataset, L1Constraint, ValidationError, as_generator
from .mechanisms import NoiseSchedule, report_noisy_min


@dataclass(frozen=True, eq=False)
class ScreeningScores:
    s: np.ndarray
    wolfe_gap: float
    smoothness_l: float
    strong_convexity_mu: float


@dataclass(frozen=True)
class SensitivityBounds:
    coord: float
    vector_l2: float


def _check_w(data: Dataset, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (data.d,):
        raise ValidationError(f"w has shape {w.shape}, expected ({data.d},)")
    return w


def _check_feasible(w: np.ndarray, c: L1Constraint):
    if not c.contains(w):
        raise ValidationError(
            f"w is infeasible: ||w||_1 = {np.abs(w).sum():.6g} > {c.lam:.6g}")


def residual_gradient(data: Dataset, w) -> np.ndarray:
    """Gradient of ``f`` with respect to ``u = Xw``: ``(Xw - y) / n``."""
    w = _check_w(data, w)
    return (data.x @ w - data.y) / data.n


def _gap_from(u: np.ndarray, g: np.ndarray, xtg: np.ndarray, lam: float) -> float:
    # max over the L1 ball of (u - Xz)^T g is attained at a signed vertex
    return float(u @ g + lam * np.abs(xtg).max())


def wolfe_gap(data: Dataset, w, c: L1Constraint) -> float:
    """``max_{z in C} (Xw - Xz)^T grad f(Xw)`` in closed form."""
    w = _check_w(data, w)
    _check_feasible(w, c)
    u = data.x @ w
    g = (u - data.y) / data.n
    return _gap_from(u, g, data.x.T @ g, c.lam)


def scores_from_fit(data: Dataset, u: np.ndarray, lam: float) -> ScreeningScores:
    """Scores given the fitted values ``u = Xw``; shared by the training loops."""
    n = data.n
    g = (u - data.y) / n
    xtg = data.x.T @ g
    gap = _gap_from(u, g, xtg, lam)
    smooth = mu = 1.0 / n
    # G >= 0 analytically; clamp float noise before the square root
    root = math.sqrt(max(gap, 0.0) / mu)
    s = np.abs(xtg) + float(u @ g) \
        + smooth * (data.column_norms() + float(np.linalg.norm(u))) * root
    return ScreeningScores(s, gap, smooth, mu)


def screening_scores(data: Dataset, w, c: L1Constraint) -> ScreeningScores:
    """``s_i = |x_(i)^T g| + (Xw)^T g + L (||x_(i)|| + ||Xw||) sqrt(G / mu)``."""
    w = _check_w(data, w)
    _check_feasible(w, c)
    return scores_from_fit(data, data.x @ w, c.lam)


def theorem1_sensitivities(c: L1Constraint, n: int, d: int = 1) -> SensitivityBounds:
    """Add/remove sensitivity of one score and of the full score vector.

    One score moves by at most ``2lam/n + 2lam^2/n + 2lam(1 + lam)/n``.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    lam = c.lam
    coord = (2 * lam + 2 * lam**2 + 2 * lam * (1 + lam)) / n
    return SensitivityBounds(coord, coord * math.sqrt(d))


def _raw_scores(scores) -> np.ndarray:
    if isinstance(scores, ScreeningScores):
        return scores.s
    return np.asarray(scores, dtype=np.float64)


def adp_screen_update(w, scores, sigma2: float, rng) -> np.ndarray:
    """Zero every coordinate whose Gaussian-perturbed score is negative.

    ``sigma2 == 0`` applies the noiseless rule.
    """
    s = _raw_scores(scores)
    w = np.array(w, dtype=np.float64)
    if s.shape != w.shape:
        raise ValidationError(f"scores {s.shape} and w {w.shape} disagree")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    if sigma2 > 0:
        s = s + as_generator(rng).normal(0.0, math.sqrt(sigma2), size=s.shape)
    w[s < 0] = 0.0
    return w


def rnm_screen_update(w, scores, schedule: NoiseSchedule, rng) -> np.ndarray:
    """Zero the report-noisy-min coordinate if its noisy score is negative."""
    if schedule.mechanism != "laplace":
        raise ValidationError("report-noisy-min screening needs a Laplace schedule")
    s = _raw_scores(scores)
    w = np.array(w, dtype=np.float64)
    if s.shape != w.shape:
        raise ValidationError(f"scores {s.shape} and w {w.shape} disagree")
    j, value = report_noisy_min(s, schedule.scale, rng)
    if value < 0:
        w[j] = 0.0
    return w
