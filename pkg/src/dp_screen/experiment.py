"""Batch trials, JSON-lines records, summaries and plot data."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .domain import Dataset
from .metrics import (density, mse, r2_basis, sign_test, sparsity, support_confusion,
                      support_of)
from .pipelines import (TrialConfig, TrialResult, embed, oracle_k_clip, privacy_spent,
                        restrict_features, run_trial)

METRICS = ("tpr", "fpr", "f1", "sparsity", "density", "support_size", "mse", "r2")


def default_workers() -> int:
    return int(os.environ.get("DP_SCREEN_WORKERS", "1"))


def _run_one(args):
    data, cfg, reference, keep = args
    if keep is None:
        return run_trial(data, cfg, reference)
    sub, keep = restrict_features(data, keep)
    ref_sub = None if reference is None else [keep.index(j) for j in reference if j in keep]
    res = run_trial(sub, cfg, ref_sub)
    res.final_w = embed(res.final_w, keep, data.d)
    res.support = tuple(np.flatnonzero(res.final_w).tolist())
    return res


def run_trials(data: Dataset, template: TrialConfig, n_trials: int, workers: int = 1,
               reference: Optional[Sequence[int]] = None,
               keep_features: Optional[Sequence[int]] = None) -> list[TrialResult]:
    """Run trials ``0..n_trials-1`` of ``template``; results come back in trial order.

    Each trial draws from its own stream ``(template.seed, trial_id)``, so the
    outcome does not depend on ``workers``.
    """
    jobs = [(data, replace(template, trial_id=i), reference, keep_features)
            for i in range(n_trials)]
    if workers <= 1 or n_trials == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def trial_metrics(data: Dataset, w, reference: Optional[Iterable[int]]) -> dict:
    """Metric block for one weight vector; confusion and R^2 need a reference."""
    w = np.asarray(w, dtype=np.float64)
    out = {"sparsity": sparsity(w), "density": density(w),
           "support_size": int(np.count_nonzero(w)), "mse": mse(data, w)}
    if reference is not None:
        ref = sorted(set(int(j) for j in reference))
        out.update(support_confusion(w, ref).as_dict())
        chosen = support_of(w)
        missed = set(ref) - chosen
        out["r2"] = r2_basis(data, chosen, missed) if chosen and missed else None
    return out


def make_record(data: Dataset, res: TrialResult, reference, traces: bool,
                extra_config: Optional[dict] = None) -> dict:
    cfg = res.config_echo
    b = cfg.budget
    config = cfg.to_dict()
    if extra_config:
        config.update(extra_config)
    privacy = privacy_spent(data, cfg)
    rec = {
        "trial_id": cfg.trial_id,
        "seed": cfg.seed,
        "algorithm": cfg.algorithm,
        "eps1": b.eps1 if b else None,
        "delta1": b.delta1 if b else None,
        "eps2": b.eps2 if b else None,
        "delta2": b.delta2 if b else None,
        "lambda": cfg.constraint.lam,
        "T": cfg.t_total,
        "config": config,
        "config_digest": cfg.digest(),
        "privacy": {"optimization": list(privacy["optimization"]),
                    "screening": list(privacy["screening"]),
                    "screening_exact": list(privacy["screening_exact"]),
                    "total": list(privacy["total"])},
        "support": list(res.support),
        "final_w": [float(v) for v in res.final_w],
        "metrics": trial_metrics(data, res.final_w, reference),
    }
    if traces:
        rec["trace"] = {"mse": res.mse_history,
                        "support_size": res.support_size_history,
                        "ref_support": res.ref_support_history,
                        "wolfe_gap": res.gap_history}
    return rec


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, allow_nan=False)


def write_jsonl(records: Iterable[dict], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_record(rec) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def summarize(records: Sequence[dict], keys: Sequence[str] = METRICS) -> list[dict]:
    """Mean and sample standard deviation of each metric across records."""
    rows = []
    for k in keys:
        vals = [r["metrics"].get(k) for r in records]
        vals = [v for v in vals if v is not None]
        if not vals:
            continue
        arr = np.asarray(vals, dtype=np.float64)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        rows.append({"metric": k, "mean": float(arr.mean()), "std": std, "count": arr.size})
    return rows


def write_csv_rows(rows: Sequence[dict], path: Path, fields: Optional[Sequence[str]] = None):
    fields = list(fields or (rows[0].keys() if rows else []))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in fields})


def recompute_metrics(records: Sequence[dict], data: Dataset,
                      reference: Optional[Sequence[int]],
                      oracle_k: Optional[int] = None) -> list[dict]:
    """Metric rows from stored weights, optionally after an Oracle-K clip."""
    rows = []
    for rec in records:
        w = np.asarray(rec["final_w"], dtype=np.float64)
        if oracle_k is not None:
            w = oracle_k_clip(w, oracle_k)
        m = trial_metrics(data, w, reference)
        rows.append({"trial_id": rec["trial_id"], "algorithm": rec["algorithm"], **m})
    return rows


def paired_sign_tests(rows_a: Sequence[dict], rows_b: Sequence[dict],
                      keys: Sequence[str] = METRICS) -> list[dict]:
    """Sign test of ``a - b`` per metric, pairing rows by ``trial_id``."""
    by_b = {r["trial_id"]: r for r in rows_b}
    out = []
    for k in keys:
        diffs = [a[k] - by_b[a["trial_id"]][k] for a in rows_a
                 if a["trial_id"] in by_b and a.get(k) is not None
                 and by_b[a["trial_id"]].get(k) is not None]
        if not diffs:
            continue
        d = np.asarray(diffs)
        out.append({"metric": k, "n_pairs": d.size, "n_pos": int((d > 0).sum()),
                    "n_neg": int((d < 0).sum()), "mean_diff": float(d.mean()),
                    "p_value": sign_test(d) if np.any(d != 0) else 1.0})
    return out


def plot_rows(records: Sequence[dict]) -> tuple[list[dict], list[dict]]:
    """Tidy per-iteration rows: MSE, and support split by the reference."""
    mse_rows, support_rows = [], []
    for rec in records:
        tr = rec.get("trace")
        if not tr:
            continue
        ref = tr.get("ref_support")
        for t, (m, s) in enumerate(zip(tr["mse"], tr["support_size"]), start=1):
            mse_rows.append({"trial_id": rec["trial_id"], "algorithm": rec["algorithm"],
                             "iteration": t, "mse": m, "wolfe_gap": tr["wolfe_gap"][t - 1]})
            row = {"trial_id": rec["trial_id"], "algorithm": rec["algorithm"],
                   "iteration": t, "support_size": s}
            if ref is not None:
                row["true_nonzero"] = ref[t - 1]
                row["true_zero"] = s - ref[t - 1]
            support_rows.append(row)
    return mse_rows, support_rows
