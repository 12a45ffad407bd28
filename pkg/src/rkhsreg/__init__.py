"""Nonparametric regression from repeated correlated measurements.

The projection estimator weights the averaged observations by solving the Gram
system of the (known) error covariance against the representer of a kernel
smoother. Classical competitors, exact and asymptotic risk, bandwidth
selection and a Monte Carlo harness live alongside it.
"""

from .covariance import (
    CovarianceModel,
    CustomCovariance,
    GeneralizedWiener,
    GramMatrix,
    OrnsteinUhlenbeck,
    Wiener,
    covariance_from_json,
    eval_cov,
    gram,
    gram_solve,
    jump_alpha,
    quadratic_form,
)
from .designs import DesignGrid, active_window, gm_midpoints, midpoint_design, regular_design, uniform_regular_design
from .estimators import (
    LinearSmoother,
    Method,
    asymptotic_projection_weights,
    cheng_lin_weights,
    estimate,
    gm_weights,
    priestley_chao_weights,
    projection_ou_closed,
    projection_weights,
    projection_wiener_closed,
    representer,
    smoother,
    weight_matrix,
)
from .kernels import BoundaryMode, KernelSpec, ScaledKernel, kernel_moments, phi, quartic_kernel, uniform_kernel

__version__ = "0.1.0"
