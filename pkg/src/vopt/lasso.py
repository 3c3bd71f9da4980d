"""Standard and fused lasso: objectives, smoothed bounds, certificates, solvers.

The squared loss is carried around as the triple (c, b, A) so that both the
objective and its Gaussian-smoothed upper bound evaluate in O(D^2).  The
smoothed bound is exact in closed form, jointly convex in the mean, and comes
with a width-dependent certificate on its distance to the true objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gauss_smooth import (
    SQRT_2PI,
    ScalarGaussian,
    abs_gauss_curvature_mu,
    abs_gauss_grad_mu,
    abs_gauss_mean,
)
from .optimize import SmoothedProblem

__all__ = [
    "QuadraticForm",
    "GaussianParams",
    "LassoSpec",
    "build_quadratic",
    "lasso_value",
    "lasso_bound_eval",
    "lasso_gap_max",
    "sigma_for_tolerance",
    "shooting_solve",
    "fused_reference_solve",
    "vo_problem",
]

_SQRT2 = math.sqrt(2.0)


def _readonly(arr):
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class QuadraticForm:
    """Squared-loss data summarized as f_quad(w) = c + w'b + w'Aw."""

    c: float
    b: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        b = _readonly(self.b)
        A = _readonly(self.A)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)
        if b.ndim != 1 or A.ndim != 2 or A.shape != (b.size, b.size):
            raise ValueError("need b of shape (D,) and A of shape (D, D)")
        if not (np.isfinite(self.c) and np.all(np.isfinite(b)) and np.all(np.isfinite(A))):
            raise ValueError("entries must be finite")
        scale = max(float(np.max(np.abs(A))), 1.0)
        if float(np.max(np.abs(A - A.T))) > 1e-12 * scale:
            raise ValueError("A must be symmetric to within 1e-12 relative")
        trace = float(np.trace(A))
        min_eig = float(np.linalg.eigvalsh(A)[0])
        if min_eig < -1e-10 * max(trace, 0.0) - 1e-300:
            raise ValueError(f"A must be positive semidefinite (min eigenvalue {min_eig:g})")

    @property
    def dim(self) -> int:
        return self.b.size

    @property
    def trace(self) -> float:
        return float(np.trace(self.A))


@dataclass(frozen=True)
class GaussianParams:
    """Variational mean vector plus isotropic standard deviation."""

    mu: np.ndarray
    sigma: float

    def __post_init__(self):
        mu = _readonly(self.mu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", float(self.sigma))
        if mu.ndim != 1 or not np.all(np.isfinite(mu)):
            raise ValueError("mu must be a finite vector")
        if not (self.sigma > 0.0 and np.isfinite(self.sigma)):
            raise ValueError("sigma must be > 0")


@dataclass(frozen=True)
class LassoSpec:
    """Quadratic data plus one-norm weight lambda1 and fusion weight lambda2."""

    quad: QuadraticForm
    lambda1: float
    lambda2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        if self.lambda1 < 0.0 or self.lambda2 < 0.0:
            raise ValueError("regularizer weights must be >= 0")

    @property
    def dim(self) -> int:
        return self.quad.dim


def build_quadratic(inputs, targets) -> QuadraticForm:
    """Summarize rows x^n and targets y^n into (c, b, A).

    c = sum y^2, b = -2 sum y x, A = sum x x', so that for any w,
    c + w'b + w'Aw equals the residual sum of squares.
    """
    X = np.asarray(inputs, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size or X.shape[0] < 1:
        raise ValueError("need inputs of shape (N, D) and targets of shape (N,)")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("entries must be finite")
    A = X.T @ X
    return QuadraticForm(c=float(y @ y), b=-2.0 * (X.T @ y), A=0.5 * (A + A.T))


def _check_dim(spec: LassoSpec, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.dim,):
        raise ValueError(f"expected vector of length {spec.dim}, got shape {w.shape}")
    return w


def lasso_value(spec: LassoSpec, w) -> float:
    """c + w'b + w'Aw + lambda1 sum|w_i| + lambda2 sum|w_i - w_{i-1}|."""
    w = _check_dim(spec, w)
    quad = spec.quad
    value = quad.c + float(w @ quad.b) + float(w @ (quad.A @ w))
    if spec.lambda1:
        value += spec.lambda1 * float(np.sum(np.abs(w)))
    if spec.lambda2:
        value += spec.lambda2 * float(np.sum(np.abs(np.diff(w))))
    return value


def lasso_bound_eval(spec: LassoSpec, params: GaussianParams):
    """Smoothed upper bound, its exact gradient, and its Hessian diagonal.

    The quadratic part contributes sigma^2 trace(A); each |w_i| becomes its
    Gaussian mean at width sigma; each fused difference |w_i - w_{i-1}|
    becomes the Gaussian mean of the difference, whose width is sqrt(2) sigma.
    """
    mu = _check_dim(spec, params.mu)
    sigma = params.sigma
    quad = spec.quad
    Amu = quad.A @ mu
    value = quad.c + float(mu @ quad.b) + float(mu @ Amu) + sigma * sigma * quad.trace
    grad = quad.b + 2.0 * Amu
    hess_diag = 2.0 * np.diag(quad.A).copy()
    if spec.lambda1:
        g = ScalarGaussian(mu, sigma)
        value += spec.lambda1 * float(np.sum(abs_gauss_mean(g)))
        grad = grad + spec.lambda1 * abs_gauss_grad_mu(g)
        hess_diag += spec.lambda1 * abs_gauss_curvature_mu(g)
    if spec.lambda2:
        gd = ScalarGaussian(np.diff(mu), _SQRT2 * sigma)
        value += spec.lambda2 * float(np.sum(abs_gauss_mean(gd)))
        pair_grad = spec.lambda2 * abs_gauss_grad_mu(gd)
        grad = grad.copy()
        grad[1:] += pair_grad
        grad[:-1] -= pair_grad
        pair_curv = spec.lambda2 * abs_gauss_curvature_mu(gd)
        hess_diag[1:] += pair_curv
        hess_diag[:-1] += pair_curv
    return float(value), grad, hess_diag


def lasso_gap_max(spec: LassoSpec, sigma: float) -> float:
    """Certified maximum of bound minus objective at smoothing width sigma.

    sigma^2 trace(A) + 2 lambda1 D sigma / sqrt(2 pi)
    + 2 lambda2 (D-1) sqrt(2) sigma / sqrt(2 pi); each penalty term's excess
    peaks where its argument sits at the kink.
    """
    if not (sigma > 0.0 and np.isfinite(sigma)):
        raise ValueError("sigma must be > 0")
    d = spec.dim
    gap = sigma * sigma * spec.quad.trace
    gap += 2.0 * spec.lambda1 * d * sigma / SQRT_2PI
    gap += 2.0 * spec.lambda2 * (d - 1) * _SQRT2 * sigma / SQRT_2PI
    return float(gap)


def sigma_for_tolerance(spec: LassoSpec, delta_f: float) -> float:
    """Largest width whose certified gap equals delta_f (standard lasso only).

    Solves sigma^2 trace(A) + (2 lambda1 D / sqrt(2 pi)) sigma = delta_f for
    its positive root, so lasso_gap_max(spec, sigma) round-trips to delta_f.
    """
    if spec.lambda2 != 0.0:
        raise ValueError("certificate inversion requires lambda2 == 0")
    if not (delta_f > 0.0 and np.isfinite(delta_f)):
        raise ValueError("delta_f must be > 0")
    a = spec.quad.trace
    lin = 2.0 * spec.lambda1 * spec.dim / SQRT_2PI
    if a <= 0.0 and lin <= 0.0:
        raise ValueError("gap is identically zero: trace(A) = 0 and lambda1 = 0")
    if a <= 0.0:
        return delta_f / lin
    # stable positive quadratic root, avoiding cancellation for small delta_f
    return 2.0 * delta_f / (lin + math.sqrt(lin * lin + 4.0 * a * delta_f))


def shooting_solve(spec: LassoSpec, tol: float = 1e-12, max_sweeps: int = 100_000) -> np.ndarray:
    """Cyclic coordinate descent with closed-form soft-threshold updates.

    Supports the standard lasso only.  Sweeps until the largest coordinate
    change in a full cycle drops below tol.  When the threshold interval
    straddles zero the coordinate is set exactly to zero.
    """
    if spec.lambda2 != 0.0:
        raise ValueError("shooting supports lambda2 == 0 only")
    quad = spec.quad
    diag = np.diag(quad.A)
    if np.any(diag <= 0.0):
        raise ValueError("shooting requires strictly positive diagonal of A")
    d = spec.dim
    lam = spec.lambda1
    w = np.zeros(d)
    Aw = np.zeros(d)
    for _ in range(max_sweeps):
        max_change = 0.0
        for i in range(d):
            q = quad.b[i] + 2.0 * (Aw[i] - diag[i] * w[i])
            if abs(q) <= lam:
                new = 0.0
            else:
                new = -math.copysign(abs(q) - lam, q) / (2.0 * diag[i])
            change = new - w[i]
            if change != 0.0:
                Aw += quad.A[:, i] * change
                w[i] = new
                max_change = max(max_change, abs(change))
        if max_change < tol:
            return w
    raise RuntimeError(f"shooting did not converge within {max_sweeps} sweeps")


def fused_reference_solve(spec: LassoSpec, iters: int) -> np.ndarray:
    """Plain subgradient descent returning the best iterate by objective.

    Step at iteration t is 1 / (L sqrt(t)) with
    L = 2 ||A||_inf + lambda1 + 2 lambda2.  Slow but independent of the
    smoothed machinery, so it serves as a cross-check.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    quad = spec.quad
    d = spec.dim
    lip = 2.0 * float(np.max(np.sum(np.abs(quad.A), axis=1))) + spec.lambda1 + 2.0 * spec.lambda2
    lip = max(lip, 1e-300)
    w = np.zeros(d)
    best_w = w.copy()
    best_f = lasso_value(spec, w)
    for t in range(1, iters + 1):
        Aw = quad.A @ w
        g = quad.b + 2.0 * Aw + spec.lambda1 * np.sign(w)
        if spec.lambda2:
            sd = np.sign(np.diff(w))
            g = g.copy()
            g[1:] += spec.lambda2 * sd
            g[:-1] -= spec.lambda2 * sd
        w = w - g / (lip * math.sqrt(t))
        f = lasso_value(spec, w)
        if f < best_f:
            best_f = f
            best_w = w.copy()
    return best_w


def vo_problem(spec: LassoSpec) -> SmoothedProblem:
    """Package a lasso spec as a smoothed-objective handle for the optimizers."""
    return SmoothedProblem(
        bound=lambda mu, sigma: lasso_bound_eval(spec, GaussianParams(mu, sigma)),
        objective=lambda w: lasso_value(spec, w),
        gap=lambda sigma: lasso_gap_max(spec, sigma),
    )
