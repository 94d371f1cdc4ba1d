"""Group-sparse linear regression toolkit.

Convex estimators (Lasso, Group Lasso, kernel-scale/MKL) and empirical-Bayes
estimators that put per-block scale factors on the coefficients, estimate
them from the marginal likelihood, and read off sparsity from exact zeros.
"""

from .model import (
    GroupedDesign, HyperState, BlockVector, DiagonalizedBlock, EstimateResult,
    MarginalFactor, assemble_sigma_y, posterior_mean, neg_log_marginal,
    neg_log_marginal_grad, mse_of_lambda, diagonalize_block,
)
from .pqn import PqnConfig, PqnResult, minimize_pqn
from .convex import (
    ConvexFitConfig, solve_lasso, solve_glasso, solve_mkl_lambda,
    mkl_recover_theta, kkt_residual_mkl, solve_adalasso,
)
from .hglasso import (
    solve_hgl_pqn, kkt_residual_hgl, closed_form_lambda_orth,
    closed_form_lambda_mkl_orth, lambda_opt, ZeroProbQuery, prob_lambda_zero,
    noncentral_chi2_cdf, two_group_thresholds, weighted_mse_profile,
)
from .selection import (
    SelectionConfig, SelectionTrace, estimate_sigma2_ls, estimate_kappa,
    forward_select, fit_hglasso,
)
from .experiments import (
    McConfig, McReport, ArxProblem, ArxModel, gen_problem, percentage_error,
    sparsity_index, zero_pattern, build_arx, cod_k, gen_arx_series,
    run_monte_carlo, ESTIMATORS,
)

__version__ = "0.1.0"
