import csv
import json

import numpy as np
import pytest

from dp_screen.cli import main
from dp_screen.data import load_csv
from dp_screen.domain import L1Constraint, validate_dataset
from dp_screen.experiment import read_jsonl
from dp_screen.metrics import support_confusion

from oracles import sign_test_p


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["synth", "--n", "200", "--d", "30", "--pos", "3", "--neg", "3",
                 "--seed", "1", "--out", str(out), "--name", "small"]) == 0
    return out / "small.csv"


def run(dataset, out, *extra):
    args = ["run", "--data", str(dataset), "--out", str(out), "--lambda", "5",
            "--T", "20", "--trials", "3", "--seed", "42", "--traces", "on", *extra]
    return main(args)


class TestSynth:
    def test_files_and_metadata(self, dataset):
        meta = json.loads(dataset.with_name("small.meta.json").read_text())
        assert meta["true_support"] == list(range(6))
        assert meta["correlated"] is False
        data = load_csv(dataset)
        assert data.x.shape == (200, 30)
        validate_dataset(data)

    def test_default_size(self, tmp_path):
        assert main(["synth", "--n", "3000", "--d", "600", "--pos", "35", "--neg", "35",
                     "--seed", "1", "--out", str(tmp_path)]) == 0
        meta = json.loads((tmp_path / "data.meta.json").read_text())
        assert len(meta["true_support"]) == 70

    def test_correlated_flag(self, tmp_path):
        main(["synth", "--n", "20", "--d", "5", "--pos", "1", "--neg", "1",
              "--correlated", "--rho", "0.5", "--out", str(tmp_path)])
        meta = json.loads((tmp_path / "data.meta.json").read_text())
        assert meta["correlated"] is True
        assert meta["spec"]["rho"] == 0.5

    def test_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            main(["synth", "--n", "50", "--d", "8", "--pos", "2", "--neg", "1",
                  "--seed", "9", "--out", str(tmp_path / name)])
        for f in ("data.csv", "data.meta.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_invalid_spec(self, tmp_path, capsys):
        assert main(["synth", "--d", "4", "--pos", "3", "--neg", "3",
                     "--out", str(tmp_path)]) == 2
        assert "exceeds" in capsys.readouterr().err


class TestRun:
    def test_outputs(self, dataset, tmp_path):
        assert run(dataset, tmp_path) == 0
        records = read_jsonl(tmp_path / "results.jsonl")
        assert [r["trial_id"] for r in records] == [0, 1, 2]
        rec = records[0]
        for key in ("seed", "algorithm", "eps1", "delta1", "eps2", "delta2", "lambda", "T",
                    "support", "metrics", "config", "trace", "privacy"):
            assert key in rec
        for key in ("tpr", "fpr", "f1", "sparsity", "density", "mse"):
            assert key in rec["metrics"]
        assert rec["algorithm"] == "rnm_screen"
        assert len(rec["trace"]["mse"]) == 20
        assert (tmp_path / "config.json").is_file()

    def test_determinism(self, dataset, tmp_path):
        run(dataset, tmp_path / "a")
        run(dataset, tmp_path / "b")
        assert (tmp_path / "a" / "results.jsonl").read_bytes() == \
            (tmp_path / "b" / "results.jsonl").read_bytes()

    def test_workers_do_not_change_results(self, dataset, tmp_path):
        run(dataset, tmp_path / "a", "--workers", "1")
        run(dataset, tmp_path / "b", "--workers", "2")
        a = [r["final_w"] for r in read_jsonl(tmp_path / "a" / "results.jsonl")]
        b = [r["final_w"] for r in read_jsonl(tmp_path / "b" / "results.jsonl")]
        assert a == b

    def test_summary_recomputes(self, dataset, tmp_path):
        run(dataset, tmp_path)
        records = read_jsonl(tmp_path / "results.jsonl")
        for row in read_rows(tmp_path / "summary.csv"):
            vals = np.array([r["metrics"][row["metric"]] for r in records], dtype=float)
            assert float(row["mean"]) == pytest.approx(vals.mean(), rel=1e-12, abs=1e-15)
            assert float(row["std"]) == pytest.approx(vals.std(ddof=1), rel=1e-12, abs=1e-15)
            assert int(row["count"]) == 3

    def test_config_precedence(self, dataset, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"T": 7, "lambda": 5, "trials": 1, "algo": "dp-fw"}))
        assert main(["run", "--config", str(cfg), "--data", str(dataset),
                     "--out", str(tmp_path / "o"), "--T", "4"]) == 0
        rec = read_jsonl(tmp_path / "o" / "results.jsonl")[0]
        assert rec["T"] == 4
        assert rec["algorithm"] == "dp_fw_plain"
        assert rec["config"]["run"]["T"] == 4

    def test_nonprivate_screening(self, dataset, tmp_path):
        assert run(dataset, tmp_path, "--algo", "nonprivate-fw", "--screen", "every",
                   "--init", "zero") == 0
        rec = read_jsonl(tmp_path / "results.jsonl")[0]
        assert rec["algorithm"] == "nonprivate_fw_with_screening"
        assert rec["privacy"]["total"] == [0.0, 0.0]

    def test_adp_screen_iterations(self, dataset, tmp_path):
        assert run(dataset, tmp_path, "--algo", "adp-screen", "--screen", "every:5") == 0
        rec = read_jsonl(tmp_path / "results.jsonl")[0]
        assert rec["config"]["screen_iterations"] == [5, 10, 15, 20]

    def test_preselect(self, dataset, tmp_path):
        assert run(dataset, tmp_path, "--preselect-k", "10") == 0
        rec = read_jsonl(tmp_path / "results.jsonl")[0]
        keep = set(rec["config"]["run"]["preselected_features"])
        assert len(keep) == 10
        assert set(rec["support"]) <= keep
        assert len(rec["final_w"]) == 30

    @pytest.mark.parametrize("extra", [["--lambda", "-1"], ["--screen", "every:0"],
                                       ["--eps1", "0"],
                                       ["--lambda", "0.1", "--target-bound", "none"],
                                       ["--screen", "25"]])
    def test_validation_errors_exit_2(self, dataset, tmp_path, extra, capsys):
        assert run(dataset, tmp_path / "x", *extra) == 2
        assert "error" in capsys.readouterr().err
        assert not (tmp_path / "x" / "results.jsonl").exists()

    def test_missing_data(self, tmp_path):
        assert main(["run", "--data", str(tmp_path / "none.csv"),
                     "--out", str(tmp_path)]) == 2


class TestAnalyze:
    @pytest.fixture
    def runs(self, dataset, tmp_path):
        run(dataset, tmp_path / "rnm")
        run(dataset, tmp_path / "fw", "--algo", "dp-fw")
        return tmp_path

    def test_outputs(self, runs):
        out = runs / "an"
        assert main(["analyze", "--results", str(runs / "rnm" / "results.jsonl"),
                     "--compare", str(runs / "fw" / "results.jsonl"),
                     "--out", str(out)]) == 0
        tests = read_rows(out / "sign_test.csv")
        assert "p_value" in tests[0]
        metrics = read_rows(out / "metrics.csv")
        assert len(metrics) == 3
        assert len(read_rows(out / "plot_mse.csv")) == 3 * 20
        support = read_rows(out / "plot_support.csv")
        assert len(support) == 3 * 20
        assert {"true_nonzero", "true_zero"} <= set(support[0])

    def test_recomputation(self, runs):
        out = runs / "an"
        main(["analyze", "--results", str(runs / "rnm" / "results.jsonl"),
              "--compare", str(runs / "fw" / "results.jsonl"), "--out", str(out)])
        recs = read_jsonl(runs / "rnm" / "results.jsonl")
        other = {r["trial_id"]: r for r in read_jsonl(runs / "fw" / "results.jsonl")}
        for row, rec in zip(read_rows(out / "metrics.csv"), recs):
            sc = support_confusion(np.array(rec["final_w"]), set(range(6)))
            assert float(row["f1"]) == sc.f1
            assert float(row["tpr"]) == sc.tpr
            assert float(row["f1"]) == rec["metrics"]["f1"]
        f1_rows = [r for r in read_rows(out / "sign_test.csv") if r["metric"] == "f1"]
        diffs = [r["metrics"]["f1"] - other[r["trial_id"]]["metrics"]["f1"] for r in recs]
        pos, neg = sum(d > 0 for d in diffs), sum(d < 0 for d in diffs)
        if pos + neg:
            assert float(f1_rows[0]["p_value"]) == pytest.approx(sign_test_p(pos, neg))

    def test_oracle_k(self, runs):
        out = runs / "k"
        assert main(["analyze", "--results", str(runs / "rnm" / "results.jsonl"),
                     "--oracle-k", "auto", "--out", str(out)]) == 0
        for row in read_rows(out / "metrics.csv"):
            assert int(row["support_size"]) <= 6

    def test_confusion_needs_reference(self, tmp_path, capsys):
        main(["synth", "--n", "40", "--d", "5", "--pos", "1", "--neg", "1",
              "--out", str(tmp_path)])
        (tmp_path / "data.meta.json").unlink()
        run(tmp_path / "data.csv", tmp_path / "r")
        assert main(["analyze", "--results", str(tmp_path / "r" / "results.jsonl"),
                     "--confusion", "--out", str(tmp_path / "a")]) == 2
        assert "reference" in capsys.readouterr().err


class TestTheorem2:
    def test_grid(self, tmp_path):
        assert main(["theorem2", "--d", "2,3,5", "--T", "1,2", "--mc-trials", "2000",
                     "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "theorem2.csv")
        assert len(rows) == 6
        assert {"closed_form", "mc_mean", "mc_stderr", "limit_T_inf", "limit_d_inf"} <= set(rows[0])

    def test_limits(self, tmp_path):
        main(["theorem2", "--d", "2", "--T", "1000000", "--out", str(tmp_path)])
        row = read_rows(tmp_path / "theorem2.csv")[0]
        assert float(row["closed_form"]) == pytest.approx(2 / 3, abs=1e-3)
        assert row["mc_mean"] == ""
