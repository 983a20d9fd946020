"""Differentially private iterative screening for L1-constrained least squares."""

from .domain import (Dataset, L1Constraint, ModelState, PrivacyBudget, RngStream,
                     ValidationError, random_l1_point, validate_dataset)
from .data import (SyntheticSpec, gen_synthetic, load_csv, preprocess, scale_linf,
                   yeo_johnson_apply, yeo_johnson_fit)
from .frank_wolfe import FwStepConfig, dp_fw_noise_scale, dp_fw_step, fw_step, lmo_l1
from .mechanisms import (NoiseSchedule, adp_schedule, compose_basic, gaussian_sigma2,
                         report_noisy_min, rnm_schedule, sample_gaussian, sample_laplace)
from .metrics import (expected_nonzeros_closed_form, mc_uniform_support, mse, r2_basis,
                      sign_test, sparsity, support_confusion)
from .pipelines import (TrialConfig, TrialResult, oracle_k_clip, preselect_k_features,
                        run_adp_screen, run_nonprivate, run_rnm_screen, run_trial)
from .screening import (ScreeningScores, SensitivityBounds, adp_screen_update,
                        residual_gradient, rnm_screen_update, screening_scores,
                        theorem1_sensitivities, wolfe_gap)

__version__ = "0.1.0"
