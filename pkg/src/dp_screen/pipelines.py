"""Training loops with private screening, plus the baselines they are compared to.

Every loop runs the Frank-Wolfe step first and screens the resulting iterate
second. Iterations are numbered from 1, so the classic step size of iteration
``t`` is ``2 / (t + 2)`` and the starting point keeps weight 1/3 after the first
step. Screened coordinates stay eligible for later Frank-Wolfe updates.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .domain import (Dataset, L1Constraint, ModelState, PrivacyBudget, RngStream,
                     ValidationError, random_l1_point, validate_dataset)
from .frank_wolfe import FwStepConfig, dp_fw_noise_scale, dp_fw_step, fw_step
from .mechanisms import (NoiseSchedule, adp_schedule, advanced_composition,
                         advanced_composition_bound, compose_basic, rnm_schedule)
from .metrics import mse
from .screening import (adp_screen_update, rnm_screen_update, scores_from_fit,
                        theorem1_sensitivities)

ALGORITHMS = ("adp_screen", "rnm_screen", "nonprivate_fw",
              "nonprivate_fw_with_screening", "dp_fw_plain", "uniform_ablation")
PRIVATE = ("adp_screen", "rnm_screen", "dp_fw_plain")

# substream ids under one trial's RngStream
_INIT, _FW, _SCREEN = 0, 1, 2


@dataclass(frozen=True)
class TrialConfig:
    """Everything needed to reproduce one trial.

    ``screen_noise_override`` and ``fw_noise_override`` pin the noise level
    (0 switches it off); they exist for testing the noiseless reductions.
    """

    constraint: L1Constraint
    t_total: int
    algorithm: str = "rnm_screen"
    budget: Optional[PrivacyBudget] = None
    screen_iterations: frozenset = frozenset()
    init: str = "random_ball"
    seed: int = 0
    trial_id: int = 0
    step_rule: Union[str, float] = "classic"
    fw_sensitivity: str = "lipschitz"
    fw_noise_override: Optional[float] = None
    screen_noise_override: Optional[float] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if self.t_total < 1:
            raise ValidationError(f"T must be >= 1, got {self.t_total}")
        object.__setattr__(self, "screen_iterations",
                           frozenset(int(t) for t in self.screen_iterations))
        bad = [t for t in self.screen_iterations if not 1 <= t <= self.t_total]
        if bad:
            raise ValidationError(f"screen iterations {sorted(bad)[:5]} outside 1..{self.t_total}")
        if self.algorithm in PRIVATE and self.budget is None:
            raise ValidationError(f"{self.algorithm} needs a privacy budget")
        if self.init not in ("random_ball", "zero"):
            raise ValidationError(f"unknown init {self.init!r}")

    def fw_config(self) -> FwStepConfig:
        b = self.budget
        return FwStepConfig(
            t_total=self.t_total,
            eps1=b.eps1 if b else 1.0,
            delta1=b.delta1 if b else 0.5,
            step_rule=self.step_rule,
            noise_override=self.fw_noise_override,
            sensitivity=self.fw_sensitivity,
            step_offset=1,
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["constraint"] = self.constraint.lam
        out["budget"] = asdict(self.budget) if self.budget else None
        out["screen_iterations"] = sorted(self.screen_iterations)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TrialResult:
    final_w: np.ndarray
    support: tuple
    mse_history: list
    support_size_history: list
    config_echo: TrialConfig
    elapsed_seconds: float = 0.0
    ref_support_history: Optional[list] = None
    gap_history: list = field(default_factory=list)


def _check_data(data: Dataset, cfg: TrialConfig) -> Dataset:
    return validate_dataset(data, cfg.constraint,
                            require_target_bound=cfg.algorithm in PRIVATE)


class _Recorder:
    def __init__(self, data: Dataset, reference: Optional[Sequence[int]]):
        self.data = data
        self.mse, self.size, self.gap = [], [], []
        self.ref_idx = None if reference is None else np.asarray(sorted(reference), dtype=int)
        self.ref = None if reference is None else []

    def record(self, w: np.ndarray, gap: Optional[float]):
        self.mse.append(mse(self.data, w))
        self.size.append(int(np.count_nonzero(w)))
        self.gap.append(gap)
        if self.ref is not None:
            self.ref.append(int(np.count_nonzero(w[self.ref_idx])))

    def result(self, w, cfg, start) -> TrialResult:
        return TrialResult(
            final_w=w,
            support=tuple(np.flatnonzero(w).tolist()),
            mse_history=self.mse,
            support_size_history=self.size,
            config_echo=cfg,
            elapsed_seconds=time.perf_counter() - start,
            ref_support_history=self.ref,
            gap_history=self.gap,
        )


def _start(data: Dataset, cfg: TrialConfig) -> tuple[ModelState, RngStream]:
    stream = RngStream(cfg.seed, cfg.trial_id)
    w0 = random_l1_point(data.d, cfg.constraint, stream.generator(_INIT), init=cfg.init)
    return ModelState(w0), stream


def screening_schedule(data: Dataset, cfg: TrialConfig) -> Optional[NoiseSchedule]:
    """The noise schedule a screening algorithm will use on ``data``."""
    sens = theorem1_sensitivities(cfg.constraint, data.n, data.d)
    b = cfg.budget
    if cfg.algorithm == "rnm_screen":
        sched = rnm_schedule(b.eps2, b.delta2, cfg.t_total, sens.coord)
        if cfg.screen_noise_override is not None:
            sched = replace(sched, scale_or_sigma2=cfg.screen_noise_override)
        return sched
    if cfg.algorithm == "adp_screen" and cfg.screen_iterations:
        sched = adp_schedule(b.eps2, b.delta2, len(cfg.screen_iterations), sens.vector_l2)
        if cfg.screen_noise_override is not None:
            sched = replace(sched, scale_or_sigma2=cfg.screen_noise_override)
        return sched
    return None


def run_adp_screen(data: Dataset, cfg: TrialConfig,
                   reference: Optional[Sequence[int]] = None) -> TrialResult:
    """Private Frank-Wolfe with Gaussian-noised screening at ``cfg.screen_iterations``."""
    if cfg.algorithm != "adp_screen":
        raise ValidationError(f"run_adp_screen got algorithm {cfg.algorithm!r}")
    t0 = time.perf_counter()
    data = _check_data(data, cfg)
    c, fw_cfg = cfg.constraint, cfg.fw_config()
    sched = screening_schedule(data, cfg)
    state, stream = _start(data, cfg)
    fw_rng, screen_rng = stream.generator(_FW), stream.generator(_SCREEN)
    rec = _Recorder(data, reference)
    for t in range(1, cfg.t_total + 1):
        state = dp_fw_step(data, state, c, fw_cfg, fw_rng)
        gap = None
        if t in cfg.screen_iterations:
            sc = scores_from_fit(data, data.x @ state.w, c.lam)
            gap = sc.wolfe_gap
            state.w = adp_screen_update(state.w, sc, sched.sigma2, screen_rng)
        rec.record(state.w, gap)
    return rec.result(state.w, cfg, t0)


def run_rnm_screen(data: Dataset, cfg: TrialConfig,
                   reference: Optional[Sequence[int]] = None) -> TrialResult:
    """Private Frank-Wolfe with one report-noisy-min screen per iteration."""
    if cfg.algorithm != "rnm_screen":
        raise ValidationError(f"run_rnm_screen got algorithm {cfg.algorithm!r}")
    t0 = time.perf_counter()
    data = _check_data(data, cfg)
    c, fw_cfg = cfg.constraint, cfg.fw_config()
    sched = screening_schedule(data, cfg)
    state, stream = _start(data, cfg)
    fw_rng, screen_rng = stream.generator(_FW), stream.generator(_SCREEN)
    rec = _Recorder(data, reference)
    for _ in range(cfg.t_total):
        state = dp_fw_step(data, state, c, fw_cfg, fw_rng)
        sc = scores_from_fit(data, data.x @ state.w, c.lam)
        state.w = rnm_screen_update(state.w, sc, sched, screen_rng)
        rec.record(state.w, sc.wolfe_gap)
    return rec.result(state.w, cfg, t0)


def run_dp_fw(data: Dataset, cfg: TrialConfig,
              reference: Optional[Sequence[int]] = None) -> TrialResult:
    """Private Frank-Wolfe alone."""
    t0 = time.perf_counter()
    data = _check_data(data, cfg)
    c, fw_cfg = cfg.constraint, cfg.fw_config()
    state, stream = _start(data, cfg)
    fw_rng = stream.generator(_FW)
    rec = _Recorder(data, reference)
    for _ in range(cfg.t_total):
        state = dp_fw_step(data, state, c, fw_cfg, fw_rng)
        rec.record(state.w, None)
    return rec.result(state.w, cfg, t0)


def run_nonprivate(data: Dataset, cfg: TrialConfig, with_screening: bool = False,
                   screen_iterations: Optional[Sequence[int]] = None,
                   reference: Optional[Sequence[int]] = None) -> TrialResult:
    """Nonprivate Frank-Wolfe, optionally with the noiseless screening rule.

    ``screen_iterations`` defaults to every iteration.
    """
    t0 = time.perf_counter()
    data = _check_data(data, cfg)
    c, fw_cfg = cfg.constraint, cfg.fw_config()
    when = set(range(1, cfg.t_total + 1)) if screen_iterations is None \
        else set(screen_iterations)
    state, _ = _start(data, cfg)
    rec = _Recorder(data, reference)
    for t in range(1, cfg.t_total + 1):
        state = fw_step(data, state, c, fw_cfg)
        gap = None
        if with_screening and t in when:
            sc = scores_from_fit(data, data.x @ state.w, c.lam)
            gap = sc.wolfe_gap
            state.w = adp_screen_update(state.w, sc, 0.0, None)
        rec.record(state.w, gap)
    return rec.result(state.w, cfg, t0)


def run_uniform_ablation(data: Dataset, cfg: TrialConfig,
                         reference: Optional[Sequence[int]] = None) -> TrialResult:
    """Frank-Wolfe and screening with both choices made uniformly at random.

    Each iteration moves toward a uniformly drawn signed vertex and then zeroes
    a uniformly drawn coordinate, ignoring the data. This is the model behind
    the expected-support analysis in :mod:`dp_screen.metrics`.
    """
    t0 = time.perf_counter()
    data = validate_dataset(data)
    c, fw_cfg = cfg.constraint, cfg.fw_config()
    state, stream = _start(data, cfg)
    fw_rng, screen_rng = stream.generator(_FW), stream.generator(_SCREEN)
    rec = _Recorder(data, reference)
    for _ in range(cfg.t_total):
        j = int(fw_rng.integers(data.d))
        sign = 1.0 if fw_rng.random() < 0.5 else -1.0
        gamma = fw_cfg.gamma(state.iteration)
        w = (1.0 - gamma) * state.w
        w[j] += gamma * sign * c.lam
        w[int(screen_rng.integers(data.d))] = 0.0
        state = replace(state, w=w, iteration=state.iteration + 1)
        rec.record(state.w, None)
    return rec.result(state.w, cfg, t0)


def run_trial(data: Dataset, cfg: TrialConfig,
              reference: Optional[Sequence[int]] = None) -> TrialResult:
    """Dispatch on ``cfg.algorithm``."""
    if cfg.algorithm == "adp_screen":
        return run_adp_screen(data, cfg, reference)
    if cfg.algorithm == "rnm_screen":
        return run_rnm_screen(data, cfg, reference)
    if cfg.algorithm == "dp_fw_plain":
        return run_dp_fw(data, cfg, reference)
    if cfg.algorithm == "uniform_ablation":
        return run_uniform_ablation(data, cfg, reference)
    screening = cfg.algorithm == "nonprivate_fw_with_screening"
    when = sorted(cfg.screen_iterations) if cfg.screen_iterations else None
    return run_nonprivate(data, cfg, screening, when, reference)


def privacy_spent(data: Dataset, cfg: TrialConfig) -> dict:
    """Recompute the privacy cost from the schedules a trial actually uses.

    ``screening`` composes the per-round parameters with the simplified
    advanced-composition bound the schedules are calibrated against, so it
    reproduces ``(eps2, delta2)``. ``screening_exact`` is the tighter
    ``eps sqrt(2k ln(1/delta')) + k eps (e^eps - 1)`` form of the same rounds.
    The optimization cost is the nominal ``(eps1, delta1)`` targeted by the
    Frank-Wolfe calibration.
    """
    zero = (0.0, 0.0)
    if cfg.algorithm not in PRIVATE:
        return {"optimization": zero, "screening": zero, "screening_exact": zero,
                "total": zero}
    b = cfg.budget
    opt = (b.eps1, b.delta1)
    sched = screening_schedule(data, cfg)
    if sched is None:
        screen = exact = zero
    elif sched.mechanism == "laplace":
        args = (sched.eps_iter, 0.0, cfg.t_total, b.delta2)
        screen, exact = advanced_composition_bound(*args), advanced_composition(*args)
    else:
        args = (sched.eps_iter, sched.delta_iter, len(cfg.screen_iterations), sched.delta_iter)
        screen, exact = advanced_composition_bound(*args), advanced_composition(*args)
    return {"optimization": opt, "screening": screen, "screening_exact": exact,
            "total": compose_basic(opt, screen),
            "fw_noise_scale": dp_fw_noise_scale(cfg.constraint, data.n, cfg.fw_config()),
            "screen_schedule": None if sched is None else asdict(sched)}


def oracle_k_clip(w, k: int) -> np.ndarray:
    """Keep the ``k`` largest-magnitude coordinates, ties to the lowest index."""
    w = np.asarray(w, dtype=np.float64)
    if not 0 <= k <= w.size:
        raise ValidationError(f"k = {k} outside [0, {w.size}]")
    order = np.argsort(-np.abs(w), kind="stable")
    out = np.zeros_like(w)
    keep = order[:k]
    out[keep] = w[keep]
    return out


def preselect_k_features(data: Dataset, k: int) -> set:
    """Indices of the ``k`` columns with the largest L1 norm, ties to the lowest index."""
    if not 0 <= k <= data.d:
        raise ValidationError(f"k = {k} outside [0, {data.d}]")
    norms = np.abs(data.x).sum(axis=0)
    return set(np.argsort(-norms, kind="stable")[:k].tolist())


def restrict_features(data: Dataset, keep: Sequence[int]) -> tuple[Dataset, list]:
    keep = sorted(keep)
    return Dataset(data.x[:, keep], data.y, dict(data.meta)), keep


def embed(w_sub, keep: Sequence[int], d: int) -> np.ndarray:
    out = np.zeros(d)
    out[list(keep)] = w_sub
    return out
