"""Command-line batch runner: ``synth``, ``run``, ``analyze`` and ``theorem2``.

Flags override values from ``--config``; the effective configuration is echoed
into every output. Any validation error exits with status 2 before work starts.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .data import SyntheticSpec, gen_synthetic, load_csv, preprocess, write_csv
from .domain import L1Constraint, PrivacyBudget, RngStream, ValidationError, validate_dataset
from .experiment import (default_workers, make_record, paired_sign_tests, plot_rows,
                         read_jsonl, recompute_metrics, run_trials, summarize,
                         write_csv_rows, write_jsonl)
from .metrics import expected_nonzeros_closed_form, mc_uniform_support
from .pipelines import TrialConfig, preselect_k_features

log = logging.getLogger("dp_screen")

ALGO_NAMES = {
    "rnm-screen": "rnm_screen",
    "adp-screen": "adp_screen",
    "nonprivate-fw": "nonprivate_fw",
    "dp-fw": "dp_fw_plain",
    "uniform-ablation": "uniform_ablation",
}

RUN_DEFAULTS = {
    "algo": "rnm-screen", "screen": None, "eps1": 4.9, "eps2": 0.1,
    "delta1": 1 / 4000, "delta2": 1 / 12000, "lambda": 50.0, "T": 1000,
    "trials": 20, "seed": 0, "init": "random_ball", "traces": "off",
    "target": "-1", "no_header": False, "yeo_johnson": False,
    "transform_target": True, "target_bound": "lambda", "reference": None,
    "preselect_k": None, "fw_sensitivity": "lipschitz",
}


def _sidecar(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".meta.json")


def _parse_iterations(spec: Optional[str], t_total: int) -> frozenset:
    """``every``, ``none``, ``last``, ``every:K`` or a comma list of iterations."""
    if spec in (None, "none", ""):
        return frozenset()
    if spec == "every":
        return frozenset(range(1, t_total + 1))
    if spec == "last":
        return frozenset({t_total})
    if spec.startswith("every:"):
        k = int(spec.split(":", 1)[1])
        if k < 1:
            raise ValidationError(f"screen period must be >= 1, got {k}")
        return frozenset(range(k, t_total + 1, k))
    try:
        return frozenset(int(t) for t in spec.split(","))
    except ValueError:
        raise ValidationError(f"cannot parse screen iterations {spec!r}") from None


def _load_reference(path: Optional[str], csv_path: Optional[Path]) -> Optional[list]:
    if path:
        blob = json.loads(Path(path).read_text())
        if isinstance(blob, dict):
            blob = blob.get("support", blob.get("true_support"))
        return sorted(int(j) for j in blob)
    if csv_path is not None and _sidecar(csv_path).is_file():
        meta = json.loads(_sidecar(csv_path).read_text())
        if meta.get("true_support") is not None:
            return sorted(int(j) for j in meta["true_support"])
    return None


# -- synth ------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SyntheticSpec(n=args.n, d=args.d, n_pos=args.pos, n_neg=args.neg,
                         correlated=args.correlated, rho=args.rho, seed=args.seed)
    data, true_w = gen_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{args.name}.csv"
    write_csv(data, csv_path)
    meta = {"spec": asdict(spec), "seed": spec.seed, "correlated": spec.correlated,
            "true_support": spec.true_support, "true_w_nonzero": {
                str(j): float(true_w[j]) for j in spec.true_support},
            "x_scale": data.meta.get("x_scale")}
    _sidecar(csv_path).write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    print(csv_path)
    return 0


# -- run --------------------------------------------------------------------

def _effective_run_config(args) -> dict:
    cfg = dict(RUN_DEFAULTS)
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text())
        unknown = set(file_cfg) - set(cfg) - {"data", "out", "workers"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for k, v in vars(args).items():
        if v is not None and k not in ("func", "config", "command", "verbose"):
            cfg[k] = v
    if cfg.get("data") is None or cfg.get("out") is None:
        raise ValidationError("run needs --data and --out (flag or config)")
    if cfg.get("workers") is None:
        cfg["workers"] = default_workers()
    if cfg["algo"] not in ALGO_NAMES:
        raise ValidationError(f"unknown --algo {cfg['algo']!r}")
    return cfg


def _prepare_run(cfg: dict):
    csv_path = Path(cfg["data"])
    target = cfg["target"]
    data = load_csv(csv_path, target_column=int(target) if str(target).lstrip("-").isdigit()
                    else target, has_header=not cfg["no_header"])
    lam = float(cfg["lambda"])
    bound = cfg["target_bound"]
    bound = None if bound == "none" else lam if bound == "lambda" else float(bound)
    data = preprocess(data, yeo_johnson=bool(cfg["yeo_johnson"]),
                      transform_target=bool(cfg["transform_target"]), target_bound=bound)
    algorithm = ALGO_NAMES[cfg["algo"]]
    t_total = int(cfg["T"])
    screen = _parse_iterations(cfg["screen"], t_total)
    if algorithm == "nonprivate_fw" and screen:
        algorithm = "nonprivate_fw_with_screening"
    if algorithm == "adp_screen" and cfg["screen"] is None:
        screen = _parse_iterations("every", t_total)
    budget = PrivacyBudget(float(cfg["eps1"]), float(cfg["delta1"]),
                           float(cfg["eps2"]), float(cfg["delta2"]))
    template = TrialConfig(
        constraint=L1Constraint(lam), t_total=t_total, algorithm=algorithm,
        budget=budget, screen_iterations=screen, init=cfg["init"],
        seed=int(cfg["seed"]), fw_sensitivity=cfg["fw_sensitivity"])
    reference = _load_reference(cfg["reference"], csv_path)
    keep = None
    if cfg["preselect_k"] is not None:
        keep = sorted(preselect_k_features(data, int(cfg["preselect_k"])))
    validate_dataset(data, template.constraint,
                     require_target_bound=algorithm in ("rnm_screen", "adp_screen", "dp_fw_plain"))
    return data, template, reference, keep


def cmd_run(args) -> int:
    cfg = _effective_run_config(args)
    data, template, reference, keep = _prepare_run(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    n_trials = int(cfg["trials"])
    if n_trials < 1:
        raise ValidationError("--trials must be >= 1")
    log.info("running %d trial(s) of %s", n_trials, template.algorithm)
    results = run_trials(data, template, n_trials, int(cfg["workers"]), reference, keep)
    echo = {k: v for k, v in cfg.items() if k not in ("workers",)}
    echo["preprocessing"] = {k: data.meta.get(k) for k in ("x_scale", "y_scale", "yeo_johnson")}
    if keep is not None:
        echo["preselected_features"] = keep
    traces = cfg["traces"] == "on"
    # the output location is not part of the experiment
    record_echo = {k: v for k, v in echo.items() if k != "out"}
    records = [make_record(data, r, reference, traces, {"run": record_echo}) for r in results]
    write_jsonl(records, out / "results.jsonl")
    write_csv_rows(summarize(records), out / "summary.csv", ["metric", "mean", "std", "count"])
    (out / "config.json").write_text(json.dumps(echo, indent=1, sort_keys=True) + "\n")
    for row in summarize(records):
        print(f"{row['metric']:>12s}  mean={row['mean']:.4f}  std={row['std']:.4f}")
    return 0


# -- analyze ----------------------------------------------------------------

def cmd_analyze(args) -> int:
    records = read_jsonl(args.results)
    if not records:
        raise ValidationError(f"{args.results} holds no records")
    run_cfg = records[0]["config"].get("run", {})
    data_path = Path(args.data or run_cfg.get("data", ""))
    if args.data is None and not data_path.is_file():
        raise ValidationError("analyze needs --data (the dataset used by the run)")
    # rebuild the dataset exactly as the run did
    data, _, ref_run, _ = _prepare_run({**RUN_DEFAULTS, **run_cfg, "data": str(data_path)})
    reference = _load_reference(args.reference, data_path) if args.reference else ref_run
    if args.confusion and reference is None:
        raise ValidationError("confusion metrics need a reference support (--reference)")
    oracle_k = None
    if args.oracle_k is not None:
        oracle_k = len(reference) if args.oracle_k == "auto" else int(args.oracle_k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = recompute_metrics(records, data, reference, oracle_k)
    fields = ["trial_id", "algorithm", "tp", "fp", "fn", "tn", "tpr", "fpr", "f1",
              "sparsity", "density", "support_size", "mse", "r2"]
    write_csv_rows(rows, out / "metrics.csv", [f for f in fields if f in rows[0]])
    summary = summarize([{"metrics": r} for r in rows])
    write_csv_rows(summary, out / "summary.csv", ["metric", "mean", "std", "count"])
    if args.compare:
        other = read_jsonl(args.compare)
        rows_b = recompute_metrics(other, data, reference)
        tests = paired_sign_tests(rows, rows_b)
        write_csv_rows(tests, out / "sign_test.csv",
                       ["metric", "n_pairs", "n_pos", "n_neg", "mean_diff", "p_value"])
    mse_rows, support_rows = plot_rows(records)
    if mse_rows:
        write_csv_rows(mse_rows, out / "plot_mse.csv")
        write_csv_rows(support_rows, out / "plot_support.csv")
    for row in summary:
        print(f"{row['metric']:>12s}  mean={row['mean']:.4f}  std={row['std']:.4f}")
    return 0


# -- theorem2 ---------------------------------------------------------------

def _int_list(s: str) -> list[int]:
    return [int(float(v)) for v in s.split(",") if v]


def cmd_theorem2(args) -> int:
    rows = []
    stream = RngStream(args.seed)
    for i, d in enumerate(args.d):
        for j, t in enumerate(args.T):
            cf = expected_nonzeros_closed_form(d, t)
            row = {"d": d, "T": t, "closed_form": cf,
                   "limit_T_inf": (d - 1) ** 2 * d / ((d - 1) * d + 1),
                   "limit_d_inf": t - 1, "mc_mean": None, "mc_stderr": None}
            if args.mc_trials and d * args.mc_trials <= args.mc_cells and t <= args.mc_max_t:
                m, se = mc_uniform_support(d, t, args.mc_trials,
                                           stream.generator(i, j))
                row.update(mc_mean=m, mc_stderr=se)
            rows.append(row)
            mc = "" if row["mc_mean"] is None else \
                f"  mc={row['mc_mean']:.6g}±{row['mc_stderr']:.2g}"
            print(f"d={d:<8d} T={t:<8d} closed_form={cf:.6g}{mc}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv_rows(rows, out / "theorem2.csv")
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dp-screen", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--n", type=int, default=3000)
    s.add_argument("--d", type=int, default=600)
    s.add_argument("--pos", type=int, default=35)
    s.add_argument("--neg", type=int, default=35)
    s.add_argument("--correlated", action="store_true")
    s.add_argument("--rho", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--name", default="data")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("run", help="run independent trials of one algorithm")
    r.add_argument("--config")
    r.add_argument("--data")
    r.add_argument("--out")
    r.add_argument("--algo", choices=sorted(ALGO_NAMES))
    r.add_argument("--screen", help="every | none | last | every:K | comma list")
    r.add_argument("--eps1", type=float)
    r.add_argument("--eps2", type=float)
    r.add_argument("--delta1", type=float)
    r.add_argument("--delta2", type=float)
    r.add_argument("--lambda", dest="lambda", type=float)
    r.add_argument("--T", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--traces", choices=("on", "off"))
    r.add_argument("--init", choices=("random_ball", "zero"))
    r.add_argument("--target", help="target column name or index (default: last)")
    r.add_argument("--no-header", dest="no_header", action="store_const", const=True)
    r.add_argument("--yeo-johnson", dest="yeo_johnson", action="store_const", const=True)
    r.add_argument("--no-transform-target", dest="transform_target",
                   action="store_const", const=False)
    r.add_argument("--target-bound", dest="target_bound",
                   help="'lambda' (default), 'none' or a number")
    r.add_argument("--reference", help="JSON list of reference support indices")
    r.add_argument("--preselect-k", dest="preselect_k", type=int)
    r.add_argument("--fw-sensitivity", dest="fw_sensitivity",
                   choices=("lipschitz", "derived"))
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="metrics, sign tests and plot data")
    a.add_argument("--results", required=True)
    a.add_argument("--compare", help="second results file for paired sign tests")
    a.add_argument("--data")
    a.add_argument("--reference")
    a.add_argument("--confusion", action="store_true",
                   help="fail unless a reference support is available")
    a.add_argument("--oracle-k", dest="oracle_k",
                   help="clip --results weights to the K largest ('auto' = reference size)")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("theorem2", help="closed form vs Monte Carlo support size")
    t.add_argument("--d", type=_int_list, default=[2, 5, 10, 100])
    t.add_argument("--T", type=_int_list, default=[1, 10, 100])
    t.add_argument("--mc-trials", dest="mc_trials", type=int, default=10000)
    t.add_argument("--mc-cells", dest="mc_cells", type=int, default=10**7,
                   help="skip Monte Carlo when d * trials exceeds this")
    t.add_argument("--mc-max-t", dest="mc_max_t", type=int, default=10**4)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_theorem2)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
