"""Support recovery of RNM-Screen on the 3000 x 600 synthetic problems.

Seventy of the 600 true weights are nonzero (35 at +1, 35 at -1). We train
with report-noisy-min screening at eps = 4.9 + 0.1 and compare the private
support with the truth, first on independent features and then on features
with correlation 0.5^|i-j|.

    python demos/synthetic_recovery.py --trials 5 --T 1000
"""

import argparse

import numpy as np

from dp_screen import L1Constraint, PrivacyBudget, SyntheticSpec, TrialConfig, gen_synthetic
from dp_screen.experiment import run_trials
from dp_screen.metrics import support_confusion

parser = argparse.ArgumentParser()
parser.add_argument("--trials", type=int, default=5)
parser.add_argument("--T", type=int, default=1000)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

budget = PrivacyBudget(eps1=4.9, delta1=1 / 4000, eps2=0.1, delta2=1 / 12000)
config = TrialConfig(constraint=L1Constraint(50.0), t_total=args.T,
                     algorithm="rnm_screen", budget=budget, seed=args.seed)

print(f"{'features':<14}{'TPR':>7}{'FPR':>7}{'F1':>7}{'nonzero':>9}")
for correlated in (False, True):
    data, _ = gen_synthetic(SyntheticSpec(correlated=correlated, seed=args.seed))
    truth = data.meta["true_support"]
    results = run_trials(data, config, args.trials)
    conf = [support_confusion(r.final_w, truth) for r in results]
    nonzero = np.mean([len(r.support) / data.d for r in results])
    name = "correlated" if correlated else "independent"
    print(f"{name:<14}{np.mean([c.tpr for c in conf]):>7.3f}"
          f"{np.mean([c.fpr for c in conf]):>7.3f}{np.mean([c.f1 for c in conf]):>7.3f}"
          f"{nonzero:>9.3f}")

# Correlated features help: the true block reinforces itself through the
# neighbouring columns, so fewer true-zero coordinates enter the model.
