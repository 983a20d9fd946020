"""Noise primitives and composition arithmetic.

All logarithms are natural logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import as_generator


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-iteration privacy parameters and the noise they imply.

    ``scale_or_sigma2`` is the Laplace scale ``b`` when ``mechanism`` is
    ``"laplace"`` and the Gaussian variance when it is ``"gaussian"``.
    """

    eps_iter: float
    delta_iter: float
    scale_or_sigma2: float
    mechanism: str

    @property
    def scale(self) -> float:
        if self.mechanism != "laplace":
            raise AttributeError("scale is only defined for the Laplace mechanism")
        return self.scale_or_sigma2

    @property
    def sigma2(self) -> float:
        if self.mechanism != "gaussian":
            raise AttributeError("sigma2 is only defined for the Gaussian mechanism")
        return self.scale_or_sigma2


def laplace_noise(scale: float, size, rng) -> np.ndarray:
    """Draw iid Laplace(0, scale) variates by inverting the CDF.

    ``scale == 0`` returns exact zeros without consuming randomness.
    """
    if scale < 0 or not np.isfinite(scale):
        raise ValueError(f"Laplace scale must be finite and >= 0, got {scale}")
    if scale == 0:
        return np.zeros(size)
    u = as_generator(rng).random(size) - 0.5
    # 1 - 2|u| lies in (0, 1]; log1p keeps precision near u = 0
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_laplace(scale: float, rng) -> float:
    if not scale > 0:
        raise ValueError(f"Laplace scale must be > 0, got {scale}")
    return float(laplace_noise(scale, None, rng))


def sample_gaussian(sigma2: float, rng) -> float:
    if not sigma2 > 0:
        raise ValueError(f"Gaussian variance must be > 0, got {sigma2}")
    return float(as_generator(rng).normal(0.0, math.sqrt(sigma2)))


def gaussian_sigma2(sensitivity: float, eps: float, delta: float) -> float:
    """Variance of the Gaussian mechanism, ``2 s^2 ln(1.25/delta) / eps^2``."""
    if sensitivity < 0:
        raise ValueError(f"sensitivity must be >= 0, got {sensitivity}")
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 2.0 * sensitivity**2 * math.log(1.25 / delta) / eps**2


def adp_schedule(eps2: float, delta2: float, l: int,
                 delta2_vector_sensitivity: float) -> NoiseSchedule:
    """Gaussian noise for ``l`` screening rounds under advanced composition.

    Each round gets ``delta_iter = delta2 / (l + 1)`` and
    ``eps_iter = eps2 / (2 sqrt(2 l ln(1/delta_iter)))``.
    """
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    delta_iter = delta2 / (l + 1)
    eps_iter = eps2 / (2.0 * math.sqrt(2.0 * l * math.log(1.0 / delta_iter)))
    sigma2 = gaussian_sigma2(delta2_vector_sensitivity, eps_iter, delta_iter)
    return NoiseSchedule(eps_iter, delta_iter, sigma2, "gaussian")


def rnm_schedule(eps2: float, delta2: float, t_total: int,
                 coord_sensitivity: float) -> NoiseSchedule:
    """Laplace scale for ``t_total`` report-noisy-min rounds.

    ``eps_iter = eps2 / sqrt(8 T ln(1/delta2))``; each round is pure DP.
    """
    if t_total < 1:
        raise ValueError(f"t_total must be >= 1, got {t_total}")
    if not 0 < delta2 < 1:
        raise ValueError(f"delta2 must lie in (0, 1) for this schedule, got {delta2}")
    eps_iter = eps2 / math.sqrt(8.0 * t_total * math.log(1.0 / delta2))
    return NoiseSchedule(eps_iter, 0.0, coord_sensitivity / eps_iter, "laplace")


def report_noisy_min(scores, noise_scale: float, rng) -> tuple[int, float]:
    """Index and noisy value of the smallest score after Laplace perturbation.

    Ties resolve to the lowest index. With ``noise_scale == 0`` this is the
    exact argmin and no randomness is consumed.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("report_noisy_min needs at least one score")
    noisy = scores + laplace_noise(noise_scale, scores.shape, rng)
    j = int(np.argmin(noisy))
    return j, float(noisy[j])


def compose_basic(b1: tuple[float, float], b2: tuple[float, float]) -> tuple[float, float]:
    """Sequential composition: ``(eps1 + eps2, delta1 + delta2)``."""
    return b1[0] + b2[0], b1[1] + b2[1]


def advanced_composition(eps: float, delta: float, k: int,
                         delta_prime: float) -> tuple[float, float]:
    """Total cost of ``k`` runs of an ``(eps, delta)`` mechanism.

    ``eps' = eps sqrt(2k ln(1/delta')) + k eps (e^eps - 1)``,
    ``delta_total = k delta + delta'``.
    """
    eps_total = eps * math.sqrt(2.0 * k * math.log(1.0 / delta_prime)) \
        + k * eps * math.expm1(eps)
    return eps_total, k * delta + delta_prime


def advanced_composition_bound(eps: float, delta: float, k: int,
                               delta_prime: float) -> tuple[float, float]:
    """Simplified advanced composition, ``eps' = 2 eps sqrt(2k ln(1/delta'))``.

    Both screening schedules are calibrated against this form. It dominates
    :func:`advanced_composition` whenever ``k (e^eps - 1) <= sqrt(2k ln(1/delta'))``,
    which holds comfortably at the per-round budgets used here.
    """
    return 2.0 * eps * math.sqrt(2.0 * k * math.log(1.0 / delta_prime)), k * delta + delta_prime
