"""Confidence intervals from quantile-modified (profile) score equations."""

from .cumulants import CumulantSet, JointCumulantTable, profile_cumulants
from .datasets import load_reading_skills, reading_skills_model
from .errors import *  # noqa: F401,F403
from .families import BetaFamily, GammaFamily, SymmetricFamily, dgf
from .regression import (GammaModel, RegressionModel, RegressionSpec, beta_regression,
                         regression_intervals, symmetric_regression)
from .scoremod import cornish_fisher_shift, modified_score
from .simulate import CoverageReport, SimConfig, noncoverage_discrepancy, simulate
from .solver import (ConfidenceInterval, Inference, ScoreModel, build_interval, fit_mle,
                     solve_profile_quantile, solve_quantile_estimator)
from .specialfn import chisq_quantile, integrate, norm_quantile, polygamma
from .tables import interval_table
from .univariate import (exact_interval, exponential_model, gamma_model, normal_variance_model,
                         skew_normal_model)

__version__ = "0.1.0"
