"""Evaluation metrics and the uniform-choice support analysis."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import stats

from .domain import Dataset, ValidationError, as_generator


@dataclass(frozen=True)
class SupportConfusion:
    tp: int
    fp: int
    fn: int
    tn: int
    tpr: float
    fpr: float
    f1: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("tp", "fp", "fn", "tn", "tpr", "fpr", "f1")}


def support_of(w) -> set:
    """Indices of exactly nonzero coordinates."""
    return set(np.flatnonzero(np.asarray(w) != 0).tolist())


def support_confusion(est_w, ref_support: Iterable[int],
                      d: Optional[int] = None) -> SupportConfusion:
    """Compare an estimate's support against a reference support.

    ``est_w`` is a weight vector, or a set of indices together with ``d``.
    F1 follows ``tp / (tp + (fp + fn) / 2)``, taken as 0 when undefined.
    """
    if isinstance(est_w, (set, frozenset)):
        if d is None:
            raise ValidationError("d is required when the estimate is an index set")
        est = set(est_w)
    else:
        w = np.asarray(est_w)
        d = w.size if d is None else d
        est = support_of(w)
    ref = set(int(j) for j in ref_support)
    for j in est | ref:
        if not 0 <= j < d:
            raise ValidationError(f"support index {j} outside [0, {d})")
    tp = len(est & ref)
    fp = len(est - ref)
    fn = len(ref - est)
    tn = d - tp - fp - fn
    tpr = tp / len(ref) if ref else 0.0
    fpr = fp / (d - len(ref)) if len(ref) < d else 0.0
    denom = tp + (fp + fn) / 2
    f1 = tp / denom if denom > 0 else 0.0
    return SupportConfusion(tp, fp, fn, tn, tpr, fpr, f1)


def sparsity(w) -> float:
    """Fraction of coordinates that are exactly zero."""
    w = np.asarray(w)
    if w.size == 0:
        raise ValidationError("sparsity of an empty vector")
    return float(np.count_nonzero(w == 0)) / w.size


def density(w) -> float:
    return 1.0 - sparsity(w)


def mse(data: Dataset, w) -> float:
    """``||y - Xw||^2 / n``."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (data.d,):
        raise ValidationError(f"w has shape {w.shape}, expected ({data.d},)")
    r = data.y - data.x @ w
    return float(r @ r) / data.n


def _r2(design: np.ndarray, target: np.ndarray) -> float:
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    ss_res = float(resid @ resid)
    centered = target - target.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        # a constant target is reproduced exactly by the intercept
        return 1.0
    return 1.0 - ss_res / ss_tot


def r2_basis(data: Dataset, chosen: Iterable[int], targets: Iterable[int]) -> float:
    """Mean R^2 of OLS fits (with intercept) of each target column on the chosen ones.

    Rank-deficient designs use the minimum-norm least-squares solution.
    """
    chosen = sorted(set(int(j) for j in chosen))
    targets = sorted(set(int(j) for j in targets))
    if not chosen or not targets:
        raise ValidationError("r2_basis needs nonempty chosen and target sets")
    if set(chosen) & set(targets):
        raise ValidationError("chosen and target feature sets overlap")
    for j in chosen + targets:
        if not 0 <= j < data.d:
            raise ValidationError(f"feature index {j} outside [0, {data.d})")
    design = np.column_stack([np.ones(data.n), data.x[:, chosen]])
    return float(np.mean([_r2(design, data.x[:, t]) for t in targets]))


def sign_test(diffs) -> float:
    """Two-sided exact binomial sign test on paired differences, zeros dropped."""
    diffs = np.asarray(diffs, dtype=np.float64)
    if diffs.size == 0:
        raise ValidationError("sign test needs at least one difference")
    nz = diffs[diffs != 0]
    if nz.size == 0:
        warnings.warn("all differences are zero; sign test p-value set to 1",
                      RuntimeWarning, stacklevel=2)
        return 1.0
    k = int(np.count_nonzero(nz > 0))
    return float(stats.binomtest(k, nz.size, 0.5, alternative="two-sided").pvalue)


def expected_nonzeros_closed_form(d: int, t: int) -> float:
    """Expected support size after ``t`` uniform update/screen rounds.

    Evaluates ``d r^T (1 - r^T) + sum_{i=1}^{T} r^(T-i) (1 - d^-(T-i))`` with
    ``r = (d-1)/d``, the sum folded into two geometric series.
    """
    if d < 1 or t < 1:
        raise ValidationError(f"d and t must be >= 1, got d={d}, t={t}")
    if d == 1:
        # r = 0; only the i = T summand has r^0 = 1, and it carries 1 - 1 = 0
        return 0.0
    log_r = math.log1p(-1.0 / d)
    r_t = math.exp(t * log_r)
    first = d * r_t * -math.expm1(t * log_r)
    q = (d - 1) / d**2
    # sum_{k<T} r^k = (1 - r^T) / (1 - r);  sum_{k<T} q^k = (1 - q^T) / (1 - q)
    geo_r = -math.expm1(t * log_r) * d
    geo_q = -math.expm1(t * math.log(q)) / (1.0 - q)
    return first + geo_r - geo_q


def mc_uniform_support(d: int, t: int, trials: int, rng) -> tuple[float, float]:
    """Monte Carlo of the uniform model, update then screen each round.

    Starts from all zeros. Returns the mean final support size and its
    standard error.
    """
    if d < 1 or t < 1 or trials < 1:
        raise ValidationError("d, t and trials must all be >= 1")
    gen = as_generator(rng)
    state = np.zeros((trials, d), dtype=bool)
    rows = np.arange(trials)
    for _ in range(t):
        state[rows, gen.integers(d, size=trials)] = True
        state[rows, gen.integers(d, size=trials)] = False
    counts = state.sum(axis=1)
    mean = float(counts.mean())
    stderr = float(counts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    return mean, stderr
