"""Core data types, validation and the seeded randomness contract.

Randomness is ordinary floating-point sampling from numpy generators. It is
suitable for research experiments only; it is not hardened against the
floating-point side channels that matter for deployed differential privacy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

#: Slack on the row L-infinity bound, absorbs rounding from the scaling step.
LINF_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when a dataset, constraint or config violates its invariants."""


@dataclass(frozen=True)
class L1Constraint:
    """The feasible set ``{w : ||w||_1 <= lam}``."""

    lam: float

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ValidationError(f"L1 radius must be positive, got {self.lam}")

    def contains(self, w: np.ndarray, rtol: float = 1e-12) -> bool:
        return float(np.abs(w).sum()) <= self.lam * (1.0 + rtol)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``x`` (n x d) and target ``y`` (n,).

    ``meta`` carries provenance such as scaling factors and the bounds checked
    by :func:`validate_dataset`.
    """

    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise ValidationError(f"x must be 2-D, got shape {x.shape}")
        if y.ndim != 1:
            raise ValidationError(f"y must be 1-D, got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise ValidationError(
                f"row count mismatch: x has {x.shape[0]} rows, y has {y.shape[0]}")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ValidationError(f"empty dataset of shape {x.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def column_norms(self) -> np.ndarray:
        """L2 norm of every column, computed once and cached."""
        norms = self.__dict__.get("_col_norms")
        if norms is None:
            norms = np.sqrt(np.einsum("ij,ij->j", self.x, self.x))
            object.__setattr__(self, "_col_norms", norms)
        return norms

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)
                and self.meta == other.meta)


@dataclass(frozen=True)
class PrivacyBudget:
    """Optimization budget ``(eps1, delta1)`` and screening budget ``(eps2, delta2)``."""

    eps1: float
    delta1: float
    eps2: float
    delta2: float

    def __post_init__(self):
        for name in ("eps1", "eps2"):
            v = getattr(self, name)
            if not v > 0:
                raise ValidationError(f"{name} must be > 0, got {v}")
        for name in ("delta1", "delta2"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValidationError(f"{name} must lie in (0, 1], got {v}")

    @property
    def total(self) -> tuple[float, float]:
        return self.eps1 + self.eps2, self.delta1 + self.delta2


@dataclass
class ModelState:
    """Weights of one running trial plus its per-iteration history."""

    w: np.ndarray
    iteration: int = 0
    mse_history: list = field(default_factory=list)
    support_history: Optional[list] = field(default_factory=list)


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Streams are keyed by ``(seed, stream_id)`` through numpy's ``SeedSequence``
    spawn keys, so distinct ids give independent streams and the same pair
    always reproduces the same draws.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned int, got {self.seed}")
        if self.stream_id < 0:
            raise ValidationError(f"stream_id must be >= 0, got {self.stream_id}")

    def generator(self, *substream: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *substream))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngStream`, a numpy ``Generator`` or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


def validate_dataset(raw: Dataset, c: Optional[L1Constraint] = None,
                     require_target_bound: bool = False) -> Dataset:
    """Check the row L-infinity bound and, optionally, ``|y_i| <= lam``.

    Returns a dataset whose ``meta`` records the observed bounds. Validating an
    already validated dataset returns an equal value.
    """
    x, y = raw.x, raw.y
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("dataset contains non-finite values")
    row_linf = np.abs(x).max(axis=1)
    worst = int(np.argmax(row_linf))
    if row_linf[worst] > 1.0 + LINF_TOL:
        raise ValidationError(
            f"row {worst} has L-infinity norm {row_linf[worst]:.6g} > 1")
    y_max = float(np.abs(y).max())
    if require_target_bound:
        if c is None:
            raise ValidationError("target bound requested without an L1 constraint")
        if y_max > c.lam:
            raise ValidationError(f"|y_i| = {y_max:.6g} exceeds lambda = {c.lam:.6g}")
    meta = dict(raw.meta)
    meta.update(x_linf=float(row_linf.max()), y_max_abs=y_max)
    if require_target_bound:
        meta["target_bound"] = c.lam
    return Dataset(x, y, meta)


def random_l1_point(d: int, c: L1Constraint, rng, init: str = "random_ball") -> np.ndarray:
    """Starting point inside the L1 ball.

    ``random_ball`` draws coordinates iid uniform on [-1, 1] and rescales the
    vector to L1 norm ``lam * u`` with ``u ~ U[0, 1]``. ``zero`` returns the
    origin.
    """
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    if init == "zero":
        return np.zeros(d)
    if init != "random_ball":
        raise ValidationError(f"unknown init {init!r}")
    gen = as_generator(rng)
    w = gen.uniform(-1.0, 1.0, size=d)
    u = gen.uniform(0.0, 1.0)
    norm = np.abs(w).sum()
    if norm == 0.0:
        return np.zeros(d)
    w *= c.lam * u / norm
    # rounding can overshoot the radius by an ulp
    excess = np.abs(w).sum()
    if excess > c.lam:
        w *= c.lam / excess
        while np.abs(w).sum() > c.lam:
            w = np.nextafter(w, 0.0)
    return w
