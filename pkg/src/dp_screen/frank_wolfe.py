"""Frank-Wolfe over the lambda-scaled L1 ball, nonprivate and private."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .domain import Dataset, L1Constraint, ModelState, ValidationError
from .mechanisms import laplace_noise

#: Vertex-score sensitivity rules understood by :func:`dp_fw_noise_scale`.
SENSITIVITY_RULES = ("derived", "lipschitz")


@dataclass(frozen=True)
class FwStepConfig:
    """Settings shared by every step of one Frank-Wolfe run.

    ``step_rule`` is ``"classic"`` (``2 / (t + 2)``) or a fixed float in
    (0, 1]. The classic rule evaluates ``t = state.iteration + step_offset``;
    training loops that count iterations from 1 use ``step_offset=1``.
    ``noise_override`` replaces the calibrated Laplace scale; 0 turns the
    private step into the nonprivate one.

    ``sensitivity`` picks the per-vertex sensitivity used for calibration:
    ``"derived"`` bounds it directly from the data bounds as ``4 lam^2 / n``;
    ``"lipschitz"`` uses ``lam * lipschitz / n`` for a loss that is
    ``lipschitz``-Lipschitz with respect to the L1 norm.
    """

    t_total: int
    eps1: float = 1.0
    delta1: float = 1e-6
    step_rule: Union[str, float] = "classic"
    noise_override: Optional[float] = None
    sensitivity: str = "lipschitz"
    lipschitz: float = 1.0
    step_offset: int = 0

    def __post_init__(self):
        if self.t_total < 1:
            raise ValidationError(f"t_total must be >= 1, got {self.t_total}")
        if self.step_rule != "classic":
            gamma = float(self.step_rule)
            if not 0 < gamma <= 1:
                raise ValidationError(f"fixed step must lie in (0, 1], got {gamma}")
        if self.sensitivity not in SENSITIVITY_RULES:
            raise ValidationError(f"unknown sensitivity rule {self.sensitivity!r}")
        if self.noise_override is not None and self.noise_override < 0:
            raise ValidationError("noise_override must be >= 0")

    def gamma(self, t: int) -> float:
        if self.step_rule == "classic":
            return 2.0 / (t + self.step_offset + 2.0)
        return float(self.step_rule)


def objective(data: Dataset, w) -> float:
    """``||Xw - y||^2 / (2n)``."""
    r = data.x @ w - data.y
    return float(r @ r) / (2 * data.n)


def weight_gradient(data: Dataset, w) -> np.ndarray:
    """Gradient of the objective in ``w``: ``X^T (Xw - y) / n``."""
    return data.x.T @ (data.x @ w - data.y) / data.n


def lmo_l1(gradient, c: L1Constraint) -> tuple[int, int]:
    """Vertex of the L1 ball minimizing ``<v, gradient>``.

    Returns ``(j, sign)`` for the vertex ``sign * lam * e_j`` with ``j`` the
    first index of largest ``|g_j|`` and ``sign = -sign(g_j)``, taking
    ``sign(0) = +1``.
    """
    g = np.asarray(gradient, dtype=np.float64)
    if g.size == 0:
        raise ValidationError("empty gradient")
    j = int(np.argmax(np.abs(g)))
    return j, (1 if g[j] < 0 else -1)


def _move_to_vertex(w: np.ndarray, j: int, sign: int, gamma: float,
                    lam: float) -> np.ndarray:
    out = (1.0 - gamma) * w
    out[j] += gamma * sign * lam
    return out


def _check_state(data: Dataset, state: ModelState, c: L1Constraint) -> np.ndarray:
    w = np.asarray(state.w, dtype=np.float64)
    if w.shape != (data.d,):
        raise ValidationError(f"w has shape {w.shape}, expected ({data.d},)")
    if not c.contains(w):
        raise ValidationError(f"infeasible w: ||w||_1 = {np.abs(w).sum():.6g}")
    return w


def fw_step(data: Dataset, state: ModelState, c: L1Constraint,
            cfg: FwStepConfig) -> ModelState:
    w = _check_state(data, state, c)
    j, sign = lmo_l1(weight_gradient(data, w), c)
    w_new = _move_to_vertex(w, j, sign, cfg.gamma(state.iteration), c.lam)
    return replace(state, w=w_new, iteration=state.iteration + 1)


def dp_fw_noise_scale(c: L1Constraint, n: int, cfg: FwStepConfig) -> float:
    """Laplace scale for each vertex score ``<+-lam e_j, grad>``.

    ``sensitivity * sqrt(8 T ln(1/delta1)) / eps1``; the composition factor
    spreads ``(eps1, delta1)`` over ``T`` noisy selections.
    """
    if cfg.sensitivity == "derived":
        vertex_sens = 4.0 * c.lam**2 / n
    else:
        vertex_sens = c.lam * cfg.lipschitz / n
    return vertex_sens * math.sqrt(8.0 * cfg.t_total * math.log(1.0 / cfg.delta1)) / cfg.eps1


def dp_select_vertex(gradient: np.ndarray, lam: float, scale: float,
                     rng) -> tuple[int, int]:
    """Report-noisy-min over the ``2d`` vertex scores."""
    # Candidate 2j is -lam e_j, candidate 2j+1 is +lam e_j. Scores are divided
    # by lam (and the noise with them), which leaves the argmin distribution
    # unchanged and makes the zero-noise case agree exactly with lmo_l1.
    g = np.asarray(gradient, dtype=np.float64)
    signed = np.empty(2 * g.size)
    signed[0::2] = -g
    signed[1::2] = g
    if scale > 0:
        signed += laplace_noise(scale / lam, signed.shape, rng)
    k = int(np.argmin(signed))
    return k // 2, (1 if k % 2 else -1)


def dp_fw_step(data: Dataset, state: ModelState, c: L1Constraint,
               cfg: FwStepConfig, rng) -> ModelState:
    """One private Frank-Wolfe step; the vertex is chosen by noisy minimum."""
    w = _check_state(data, state, c)
    scale = cfg.noise_override if cfg.noise_override is not None \
        else dp_fw_noise_scale(c, data.n, cfg)
    j, sign = dp_select_vertex(weight_gradient(data, w), c.lam, scale, rng)
    w_new = _move_to_vertex(w, j, sign, cfg.gamma(state.iteration), c.lam)
    return replace(state, w=w_new, iteration=state.iteration + 1)
