"""Quantile regression by majorize-minimize.

Separate and simultaneous (basis-expanded) fits, adaptive-lasso selection,
covariate splines, a double-kernel baseline and a small simulation lab.
"""

__version__ = "0.1.0"

from .basis import (BasisSpec, coefficient_function, eval_basis, logistic, natural_spline,
                    natural_spline_columns, parse_basis)
from .errors import (DegenerateFitError, DomainError, MMQRError, NumericError, ParseError,
                     SingularMatrixError)
from .kernel import (KernelConfig, PointSample, dk_cdf, dk_pdf, dk_quantile, kernel_weights,
                     lcv_log_likelihood)
from .loss import check_loss, perturbed_loss, surrogate_value, total_loss
from .penalized import PenaltyConfig, bic, fit_penalized, penalized_mm_step, select_lambda
from .separate import Dataset, FitConfig, fit_quantile, mm_step, solve_spd
from .simulation import (GG_SET_1, GG_SET_2, ErrorDistribution, GGParams, Scenario, error_quantile,
                         gamma_quantile, gg_convert, gg_from_mu, gg_pdf, gg_quantile, gg_sample,
                         imse, run_scenario, sample_hetero, theoretical_quantile)
from .simultaneous import (accumulate_normal_system, default_grid, fit_simultaneous,
                           mm_step_simultaneous, predict_quantile)
from .splines import cv_loss, kfold_split, transform_covariate, transform_design
