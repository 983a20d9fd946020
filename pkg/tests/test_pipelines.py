import math
from dataclasses import replace

import numpy as np
import pytest

from dp_screen import pipelines
from dp_screen.domain import Dataset, L1Constraint, ModelState, PrivacyBudget, ValidationError
from dp_screen.frank_wolfe import fw_step
from dp_screen.mechanisms import (advanced_composition, advanced_composition_bound,
                                  compose_basic)
from dp_screen.metrics import mse
from dp_screen.pipelines import (TrialConfig, embed, oracle_k_clip, preselect_k_features,
                                 privacy_spent, restrict_features, run_adp_screen,
                                 run_nonprivate, run_rnm_screen, run_trial,
                                 screening_schedule)
from dp_screen.screening import adp_screen_update, screening_scores

from oracles import exact_uniform_support

BUDGET = PrivacyBudget(4.9, 1 / 4000, 0.1, 1 / 12000)


@pytest.fixture
def problem():
    gen = np.random.default_rng(3)
    n, d = 120, 15
    x = gen.uniform(-1, 1, (n, d))
    w = np.zeros(d)
    w[:3] = [1.0, -1.0, 0.5]
    y = x @ w
    return Dataset(x, y / np.abs(y).max() * 2.0), L1Constraint(2.0)


def config(c, algorithm, t=30, **kw):
    budget = None if algorithm.startswith("nonprivate") or algorithm == "uniform_ablation" \
        else BUDGET
    return TrialConfig(constraint=c, t_total=t, algorithm=algorithm, budget=budget, **kw)


class TestTrialConfig:
    def test_screen_iterations_in_range(self):
        with pytest.raises(ValidationError):
            TrialConfig(L1Constraint(1.0), 5, "adp_screen", BUDGET, screen_iterations={6})
        with pytest.raises(ValidationError):
            TrialConfig(L1Constraint(1.0), 5, "adp_screen", BUDGET, screen_iterations={0})

    def test_private_needs_budget(self):
        with pytest.raises(ValidationError):
            TrialConfig(L1Constraint(1.0), 5, "rnm_screen")

    def test_unknown_algorithm(self):
        with pytest.raises(ValidationError):
            TrialConfig(L1Constraint(1.0), 5, "lasso")

    def test_digest_stable(self):
        a = TrialConfig(L1Constraint(1.0), 5, "rnm_screen", BUDGET, seed=3)
        assert a.digest() == replace(a).digest()
        assert a.digest() != replace(a, seed=4).digest()


class TestDeterminism:
    @pytest.mark.parametrize("algorithm", pipelines.ALGORITHMS)
    def test_bit_identical(self, problem, algorithm):
        data, c = problem
        cfg = config(c, algorithm, seed=11, screen_iterations={5, 10})
        a, b = run_trial(data, cfg), run_trial(data, cfg)
        assert np.array_equal(a.final_w, b.final_w)
        assert a.mse_history == b.mse_history
        assert a.support_size_history == b.support_size_history
        assert a.support == tuple(np.flatnonzero(a.final_w))

    def test_trials_differ(self, problem):
        data, c = problem
        cfg = config(c, "rnm_screen")
        a = run_trial(data, cfg)
        b = run_trial(data, replace(cfg, trial_id=1))
        assert not np.array_equal(a.final_w, b.final_w)


class TestFeasibility:
    @pytest.mark.parametrize("algorithm", pipelines.ALGORITHMS)
    def test_every_recorded_iterate(self, problem, algorithm, monkeypatch):
        data, c = problem
        seen = []
        original = pipelines._Recorder.record

        def spy(self, w, gap):
            seen.append(c.contains(w))
            return original(self, w, gap)
        monkeypatch.setattr(pipelines._Recorder, "record", spy)
        run_trial(data, config(c, algorithm, t=40, screen_iterations=range(1, 41)))
        assert len(seen) == 40 and all(seen)

    def test_private_rejects_unbounded_target(self, problem):
        data, c = problem
        loud = Dataset(data.x, data.y * 10)
        with pytest.raises(ValidationError, match="exceeds lambda"):
            run_trial(loud, config(c, "rnm_screen"))
        run_trial(loud, config(c, "nonprivate_fw"))


class TestRnmScreen:
    def test_support_changes_by_at_most_one(self, problem):
        data, c = problem
        res = run_rnm_screen(data, config(c, "rnm_screen", t=200, init="zero",
                                          screen_noise_override=1.0))
        sizes = [0] + res.support_size_history
        assert set(np.diff(sizes)) <= {-1, 0, 1}
        assert -1 in np.diff(sizes)

    def test_noiseless_without_screening_is_plain_fw(self, problem, monkeypatch):
        data, c = problem
        fired = []
        original = pipelines.rnm_screen_update

        def spy(w, scores, schedule, rng):
            fired.append(scores.s.min() < 0)
            return original(w, scores, schedule, rng)
        monkeypatch.setattr(pipelines, "rnm_screen_update", spy)
        cfg = config(c, "rnm_screen", t=25, fw_noise_override=0.0, screen_noise_override=0.0)
        res = run_rnm_screen(data, cfg)
        assert not any(fired)
        plain = run_nonprivate(data, replace(cfg, algorithm="nonprivate_fw", budget=None))
        assert np.array_equal(res.final_w, plain.final_w)

    def test_wrong_algorithm(self, problem):
        data, c = problem
        with pytest.raises(ValidationError):
            run_rnm_screen(data, config(c, "adp_screen"))


class TestAdpScreen:
    def test_no_screening_is_dp_fw(self, problem):
        data, c = problem
        cfg = config(c, "adp_screen", seed=5)
        res = run_adp_screen(data, cfg)
        plain = run_trial(data, replace(cfg, algorithm="dp_fw_plain"))
        assert np.array_equal(res.final_w, plain.final_w)

    def test_single_noiseless_round(self, problem):
        data, c = problem
        cfg = config(c, "adp_screen", t=1, screen_iterations={1}, fw_noise_override=0.0,
                     screen_noise_override=0.0, seed=2)
        res = run_adp_screen(data, cfg)
        start = pipelines._start(data, cfg)[0]
        stepped = fw_step(data, start, c, cfg.fw_config())
        expect = adp_screen_update(stepped.w, screening_scores(data, stepped.w, c), 0.0, None)
        assert np.array_equal(res.final_w, expect)

    def test_wolfe_gap_recorded_only_when_screening(self, problem):
        data, c = problem
        res = run_adp_screen(data, config(c, "adp_screen", t=6, screen_iterations={2, 5}))
        assert [g is not None for g in res.gap_history] == [False, True, False, False, True, False]


class TestNonprivate:
    def test_zero_start_grows_by_one(self, problem):
        data, c = problem
        res = run_nonprivate(data, config(c, "nonprivate_fw", t=50, init="zero"))
        sizes = [0] + res.support_size_history
        assert set(np.diff(sizes)) <= {0, 1}

    def test_mse_history(self, problem):
        data, c = problem
        res = run_nonprivate(data, config(c, "nonprivate_fw", t=10))
        assert res.mse_history[-1] == mse(data, res.final_w)

    def test_screening_zero_start_keeps_true_zeros_out(self):
        gen = np.random.default_rng(0)
        n, d = 400, 30
        x = gen.standard_normal((n, d))
        x /= np.abs(x).max()
        w = np.zeros(d)
        w[:4] = [1, -1, 1, -1]
        data = Dataset(x, x @ w)
        res = run_nonprivate(data, config(L1Constraint(3.0), "nonprivate_fw_with_screening",
                                          t=300, init="zero"), True)
        assert set(res.support) <= set(range(4))

    def test_reference_trace(self, problem):
        data, c = problem
        res = run_nonprivate(data, config(c, "nonprivate_fw", t=5), reference=[0, 1, 2])
        assert len(res.ref_support_history) == 5
        assert all(r <= s for r, s in zip(res.ref_support_history, res.support_size_history))


class TestUniformAblation:
    @pytest.mark.parametrize("d,t", [(2, 1), (3, 2), (4, 4)])
    def test_matches_enumeration(self, d, t):
        data = Dataset(np.zeros((1, d)), np.zeros(1))
        cfg = TrialConfig(L1Constraint(1.0), t, "uniform_ablation", init="zero")
        trials = 3000
        sizes = np.array([len(run_trial(data, replace(cfg, trial_id=i)).support)
                          for i in range(trials)])
        se = sizes.std(ddof=1) / math.sqrt(trials)
        assert abs(sizes.mean() - exact_uniform_support(d, t)) <= 3 * se


class TestPrivacyAccounting:
    def test_rnm_identity(self, problem):
        data, c = problem
        cfg = config(c, "rnm_screen", t=1000)
        spent = privacy_spent(data, cfg)
        sched = screening_schedule(data, cfg)
        assert spent["screening"][0] == pytest.approx(BUDGET.eps2, rel=1e-12)
        assert spent["screening"][1] == BUDGET.delta2
        eps, delta = spent["total"]
        assert eps == pytest.approx(BUDGET.total[0], rel=1e-12)
        assert delta == pytest.approx(BUDGET.total[1], rel=1e-12)
        exact = advanced_composition(sched.eps_iter, 0.0, 1000, BUDGET.delta2)
        assert spent["screening_exact"] == exact
        assert exact[0] <= spent["screening"][0]

    def test_adp_identity(self, problem):
        data, c = problem
        budget = PrivacyBudget(2.5, 1 / 6000, 2.5, 1 / 6000)
        cfg = TrialConfig(c, 100, "adp_screen", budget, screen_iterations=range(1, 101))
        spent = privacy_spent(data, cfg)
        assert spent["screening"][0] == pytest.approx(2.5, rel=1e-12)
        assert spent["screening"][1] == pytest.approx(1 / 6000, rel=1e-12)
        assert spent["screening_exact"][0] <= 2.5
        assert spent["total"] == compose_basic((2.5, 1 / 6000), spent["screening"])

    def test_bound_matches_formula(self):
        eps, delta = advanced_composition_bound(0.01, 1e-9, 50, 1e-6)
        assert eps == pytest.approx(2 * 0.01 * math.sqrt(100 * math.log(1e6)))
        assert delta == pytest.approx(50e-9 + 1e-6)

    def test_nonprivate_is_free(self, problem):
        data, c = problem
        assert privacy_spent(data, config(c, "nonprivate_fw"))["total"] == (0.0, 0.0)


class TestBaselines:
    def test_clip(self):
        assert oracle_k_clip([3, -5, 1], 2).tolist() == [3, -5, 0]

    def test_clip_identity(self):
        w = np.array([0.1, -2.0, 0.0, 4.0])
        assert np.array_equal(oracle_k_clip(w, 4), w)

    def test_clip_ties(self):
        assert oracle_k_clip([2, -2, 2], 2).tolist() == [2, -2, 0]

    def test_clip_range(self):
        with pytest.raises(ValidationError):
            oracle_k_clip([1.0], 2)

    def test_preselect_hand(self):
        assert preselect_k_features(Dataset([[1, 0], [1, 0.5]], [0, 0]), 1) == {0}

    def test_preselect_all(self, problem):
        data, _ = problem
        assert preselect_k_features(data, data.d) == set(range(data.d))

    def test_preselect_duplicates(self):
        x = np.array([[0.1, 0.5, 0.5], [0.2, -0.5, -0.5]])
        assert preselect_k_features(Dataset(x, [0, 0]), 1) == {1}

    def test_restrict_and_embed(self, problem):
        data, _ = problem
        sub, keep = restrict_features(data, [4, 1])
        assert keep == [1, 4]
        assert np.array_equal(sub.x, data.x[:, [1, 4]])
        assert embed([2.0, 3.0], keep, 6).tolist() == [0, 2, 0, 0, 3, 0]
