"""Variational optimization toolkit.

Analytic Gaussian-smoothed surrogates with exact gradients and error
certificates for lasso, fused lasso, kernel soft-margin SVMs, and binary
quadratic programs, plus the annealed optimizers and reference solvers used
to verify them.
"""

from . import binary_qp, gauss_smooth, harness, lasso, optimize, svm

__all__ = ["binary_qp", "gauss_smooth", "harness", "lasso", "optimize", "svm"]

__version__ = "0.1.0"
