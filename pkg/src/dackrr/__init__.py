"""Divide-and-conquer kernel ridge regression with an exactly computable
finite-rank operator lab."""

from .distributed import AveragedModel, Partition, compare_estimators, fit_distributed, partition
from .experiments import (
    ExperimentConfig,
    RateResult,
    RateRow,
    SlopeFit,
    emit,
    fit_loglog_slope,
    lambda_rule,
    m_monotonicity_report,
    m_restriction,
    run_rate_experiment,
)
from .kernels import Gaussian, PeriodicSobolev, kernel_from_config
from .krr import KrrModel, NumericError, fit, l2_dist_mc, predict, rkhs_dist_sq, rkhs_norm_sq
from .operator_lab import (
    ConcentrationReport,
    approximation_error,
    concentration_check,
    data_free_limit,
    effective_dimension_empirical,
    effective_dimension_spectral,
    second_order_residual,
    verify_difference_representation,
    whitened_feature_second_moment,
)
from .synthetic import (
    BoundedUniform,
    Dataset,
    GaussianNoise,
    Heteroscedastic,
    SpectralModel,
    TargetFunction,
    f_rho_eval,
    make_source_target,
    make_spectral,
    rng_for,
    sample_dataset,
)

__version__ = "0.1.0"
