"""Robust functional logistic regression with penalized density power divergence."""

__version__ = "0.1.0"

from .basis import (
    BSplineBasis,
    Grid,
    PenaltyMatrix,
    curve_basis_inner_products,
    default_dimension,
    eval_basis,
    gram_matrix,
    make_basis,
    make_uniform_grid,
    penalty_matrix,
)
from .diagnostics import ResidualReport, anscombe_residuals, incomplete_beta
from .divergence import DivergenceParams, Link, bernoulli_density, dpd, loss, loss_d1, loss_d2
from .model import (
    DesignMatrices,
    FitConfig,
    FitResult,
    FunctionalDataset,
    build_design,
    covariance,
    edf,
    fit,
    fit_design,
    irls_weights,
    predict,
)
from .selection import SelectionConfig, aic, amise, select_kappa, select_lambda
from .simulation import StudyConfig, StudyReport, run_study
