"""Synthetic datasets, CSV ingestion and preprocessing."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .domain import Dataset, RngStream, ValidationError

YJ_BOUNDS = (-5.0, 5.0)
YJ_TOL = 1e-4


class CsvParseError(ValidationError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 3000
    d: int = 600
    n_pos: int = 35
    n_neg: int = 35
    correlated: bool = False
    rho: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValidationError(f"n and d must be positive, got n={self.n}, d={self.d}")
        if self.n_pos < 0 or self.n_neg < 0:
            raise ValidationError("n_pos and n_neg must be nonnegative")
        if self.n_pos + self.n_neg > self.d:
            raise ValidationError(
                f"n_pos + n_neg = {self.n_pos + self.n_neg} exceeds d = {self.d}")
        if not 0 <= self.rho < 1:
            raise ValidationError(f"rho must lie in [0, 1), got {self.rho}")

    @property
    def true_support(self) -> list[int]:
        return list(range(self.n_pos + self.n_neg))


def scale_linf(data: Dataset) -> Dataset:
    """Divide ``x`` by its largest absolute entry when that exceeds 1.

    ``y`` is left alone. The applied factor is recorded as ``meta["x_scale"]``.
    """
    peak = float(np.abs(data.x).max())
    meta = dict(data.meta)
    if peak <= 1.0:
        meta.setdefault("x_scale", 1.0)
        return Dataset(data.x, data.y, meta)
    meta["x_scale"] = meta.get("x_scale", 1.0) / peak
    return Dataset(data.x / peak, data.y, meta)


def scale_target(data: Dataset, bound: float) -> Dataset:
    """Shrink ``y`` so that ``max |y_i| <= bound``; no-op if it already holds."""
    if not bound > 0:
        raise ValidationError(f"target bound must be > 0, got {bound}")
    peak = float(np.abs(data.y).max())
    meta = dict(data.meta)
    if peak <= bound:
        meta.setdefault("y_scale", 1.0)
        return Dataset(data.x, data.y, meta)
    meta["y_scale"] = meta.get("y_scale", 1.0) * bound / peak
    return Dataset(data.x, data.y * (bound / peak), meta)


def gen_synthetic(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Gaussian design, optionally AR(1)-correlated, with a +-1 sparse truth.

    The first ``n_pos`` weights are +1, the next ``n_neg`` are -1. ``x`` is
    scaled by one global factor so every entry is at most 1 in magnitude,
    then ``y = x @ true_w``.
    """
    gen = RngStream(spec.seed).generator()
    z = gen.standard_normal((spec.n, spec.d))
    if spec.correlated and spec.rho > 0:
        # column j = rho * column (j-1) + sqrt(1 - rho^2) * noise gives
        # corr(col_i, col_j) = rho^|i-j| with unit variances
        x = np.empty_like(z)
        x[:, 0] = z[:, 0]
        c = math.sqrt(1.0 - spec.rho**2)
        for j in range(1, spec.d):
            x[:, j] = spec.rho * x[:, j - 1] + c * z[:, j]
    else:
        x = z
    true_w = np.zeros(spec.d)
    true_w[:spec.n_pos] = 1.0
    true_w[spec.n_pos:spec.n_pos + spec.n_neg] = -1.0
    data = scale_linf(Dataset(x, np.zeros(spec.n), {"synthetic": asdict(spec)}))
    meta = dict(data.meta, true_support=spec.true_support)
    return Dataset(data.x, data.x @ true_w, meta), true_w


# -- Yeo-Johnson ------------------------------------------------------------

def yeo_johnson_apply(column, lambda_yj: float) -> np.ndarray:
    """Elementwise Yeo-Johnson transform with power ``lambda_yj``."""
    if not np.isfinite(lambda_yj):
        raise ValidationError(f"lambda must be finite, got {lambda_yj}")
    y = np.asarray(column, dtype=np.float64)
    out = np.empty_like(y)
    pos = y >= 0
    eps = np.spacing(1.0)
    lp = np.log1p(y[pos])
    if abs(lambda_yj) < eps:
        out[pos] = lp
    else:
        out[pos] = np.expm1(lambda_yj * lp) / lambda_yj
    ln = np.log1p(-y[~pos])
    if abs(lambda_yj - 2.0) < eps:
        out[~pos] = -ln
    else:
        out[~pos] = -np.expm1((2.0 - lambda_yj) * ln) / (2.0 - lambda_yj)
    return out


def yeo_johnson_llf(column, lambda_yj: float) -> float:
    """Profile log-likelihood of ``lambda_yj`` under a normal model."""
    y = np.asarray(column, dtype=np.float64)
    t = yeo_johnson_apply(y, lambda_yj)
    var = t.var()
    if var <= 0 or not np.isfinite(var):
        return -np.inf
    jac = np.sum(np.sign(y) * np.log1p(np.abs(y)))
    return -0.5 * y.size * math.log(var) + (lambda_yj - 1.0) * jac


def _golden_max(fun, lo: float, hi: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (a + b) / 2.0


@dataclass(frozen=True)
class YeoJohnsonParams:
    """Fitted powers, one per feature column, plus the target's if transformed."""

    per_column: tuple
    target: Optional[float] = None


def yeo_johnson_fit(column) -> float:
    """Maximum-likelihood power over [-5, 5] by golden-section search."""
    y = np.asarray(column, dtype=np.float64)
    if y.size == 0:
        raise ValidationError("cannot fit Yeo-Johnson on an empty column")
    if not np.all(np.isfinite(y)):
        raise ValidationError("column contains non-finite values")
    if np.ptp(y) == 0:
        warnings.warn("constant column; Yeo-Johnson power defaults to 1",
                      RuntimeWarning, stacklevel=2)
        return 1.0
    lam = _golden_max(lambda lm: yeo_johnson_llf(y, lm), *YJ_BOUNDS, YJ_TOL)
    return float(min(max(lam, YJ_BOUNDS[0]), YJ_BOUNDS[1]))


def yeo_johnson_dataset(data: Dataset, transform_target: bool = True
                        ) -> tuple[Dataset, YeoJohnsonParams]:
    cols = []
    lams = []
    for j in range(data.d):
        lam = yeo_johnson_fit(data.x[:, j])
        lams.append(lam)
        cols.append(yeo_johnson_apply(data.x[:, j], lam))
    x = np.column_stack(cols)
    y, lam_y = data.y, None
    if transform_target:
        lam_y = yeo_johnson_fit(data.y)
        y = yeo_johnson_apply(data.y, lam_y)
    params = YeoJohnsonParams(tuple(lams), lam_y)
    meta = dict(data.meta, yeo_johnson={"per_column": lams, "target": lam_y})
    return Dataset(x, y, meta), params


def preprocess(data: Dataset, yeo_johnson: bool = True, transform_target: bool = True,
               target_bound: Optional[float] = None) -> Dataset:
    """Optional Yeo-Johnson, then row L-infinity scaling, then target scaling."""
    if yeo_johnson:
        data, _ = yeo_johnson_dataset(data, transform_target)
    data = scale_linf(data)
    if target_bound is not None:
        data = scale_target(data, target_bound)
    return data


# -- CSV --------------------------------------------------------------------

def load_csv(path: Union[str, Path], target_column: Union[str, int] = -1,
             has_header: bool = True) -> Dataset:
    """Read a numeric CSV into an unvalidated :class:`Dataset`.

    ``target_column`` is a header name or a (possibly negative) column index.
    Parse errors name the 1-based file line and the column.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise CsvParseError(f"{path} is empty")
    width = len(rows[0])
    if has_header:
        header = [h.strip() for h in rows[0]]
        body, first_line = rows[1:], 2
    else:
        header = [str(j) for j in range(width)]
        body, first_line = rows, 1
    if isinstance(target_column, str) and not target_column.lstrip("-").isdigit():
        if target_column not in header:
            raise ValidationError(f"target column {target_column!r} not in {header}")
        t = header.index(target_column)
    else:
        t = int(target_column)
        if not -width <= t < width:
            raise ValidationError(f"target index {t} out of range for {width} columns")
        t %= width
    values = np.empty((len(body), width))
    for i, row in enumerate(body):
        line = first_line + i
        if len(row) != width:
            raise CsvParseError(f"line {line}: expected {width} fields, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise CsvParseError(
                    f"non-numeric value {cell!r} at row {line}, column {header[j]}") from None
    if values.shape[0] == 0:
        raise CsvParseError(f"{path} has no data rows")
    keep = [j for j in range(width) if j != t]
    meta = {"source": str(path), "feature_names": [header[j] for j in keep],
            "target_name": header[t]}
    return Dataset(values[:, keep], values[:, t], meta)


def write_csv(data: Dataset, path: Union[str, Path], target_name: str = "y") -> None:
    """Write features and target as one CSV with a header row."""
    names = data.meta.get("feature_names") or [f"x{j}" for j in range(data.d)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, target_name])
        for xi, yi in zip(data.x, data.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])
