"""Kernelized soft-margin SVM: primal, smoothed bound, Huber comparator, SMO.

The primal lives in RKHS form: f(beta, b) = beta'K beta + C sum hinge_n with
K_nm = y^n y^m k(x^n, x^m).  The Gaussian-smoothed bound replaces each hinge
by its exact Gaussian mean and stays convex; the Huber comparator replaces it
by a piecewise-quadratic upper bound.  An SMO solver on the dual provides the
reference optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gauss_smooth import SQRT_2PI, hinge_gauss_mean, std_normal_cdf
from .optimize import SmoothedProblem

__all__ = [
    "KernelProblem",
    "SvmParams",
    "HuberSpec",
    "build_kernel",
    "svm_primal_value",
    "svm_bound_eval",
    "svm_gap_bound",
    "svm_gap_and_sigma",
    "huber_eval",
    "huber_hessian",
    "smo_reference_solve",
    "vo_problem",
    "huber_problem",
]


def _readonly(arr, dtype=float):
    out = np.array(arr, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class KernelProblem:
    """Label-weighted kernel matrix, labels, and cost coefficient."""

    K: np.ndarray
    labels: np.ndarray
    C: float

    def __post_init__(self):
        K = _readonly(self.K)
        y = _readonly(self.labels)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "C", float(self.C))
        n = y.size
        if K.ndim != 2 or K.shape != (n, n) or y.ndim != 1:
            raise ValueError("need K of shape (N, N) matching labels of shape (N,)")
        if not np.all(np.isfinite(K)):
            raise ValueError("kernel entries must be finite")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("labels must be +-1")
        if not (self.C > 0.0 and np.isfinite(self.C)):
            raise ValueError("C must be > 0")
        scale = max(float(np.max(np.abs(K))), 1.0)
        if float(np.max(np.abs(K - K.T))) > 1e-12 * scale:
            raise ValueError("K must be symmetric to within 1e-12 relative")
        trace = float(np.trace(K))
        min_eig = float(np.linalg.eigvalsh(K)[0])
        if min_eig < -1e-10 * max(trace, 0.0) - 1e-300:
            raise ValueError(f"K must be positive semidefinite (min eigenvalue {min_eig:g})")

    @property
    def size(self) -> int:
        return self.labels.size

    @property
    def trace(self) -> float:
        return float(np.trace(self.K))


@dataclass(frozen=True)
class SvmParams:
    """Gaussian means for (beta, b) plus the shared isotropic width."""

    beta_mean: np.ndarray
    b_mean: float
    sigma: float

    def __post_init__(self):
        beta = _readonly(self.beta_mean)
        object.__setattr__(self, "beta_mean", beta)
        object.__setattr__(self, "b_mean", float(self.b_mean))
        object.__setattr__(self, "sigma", float(self.sigma))
        if beta.ndim != 1 or not np.all(np.isfinite(beta)) or not np.isfinite(self.b_mean):
            raise ValueError("means must be finite")
        if not (self.sigma > 0.0 and np.isfinite(self.sigma)):
            raise ValueError("sigma must be > 0")


@dataclass(frozen=True)
class HuberSpec:
    """Half-width of the quadratic zone of the Huber hinge."""

    h: float

    def __post_init__(self):
        object.__setattr__(self, "h", float(self.h))
        if not (self.h > 0.0 and np.isfinite(self.h)):
            raise ValueError("h must be > 0")


def build_kernel(points, labels, kernel: str = "linear", gamma: float | None = None,
                 cost: float = 1.0) -> KernelProblem:
    """Assemble K_nm = y^n y^m k(x^n, x^m) for a linear or RBF kernel."""
    X = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError("need points of shape (N, D) and labels of shape (N,)")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be +-1")
    if kernel == "linear":
        gram = X @ X.T
    elif kernel == "rbf":
        if gamma is None or not (gamma > 0.0):
            raise ValueError("rbf kernel needs gamma > 0")
        sq = np.sum(X * X, axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0)
        gram = np.exp(-gamma * d2)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    K = np.outer(y, y) * gram
    return KernelProblem(K=0.5 * (K + K.T), labels=y, C=cost)


def _margins(prob: KernelProblem, beta, b):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (prob.size,):
        raise ValueError(f"expected beta of length {prob.size}, got shape {beta.shape}")
    return 1.0 - prob.K @ beta - float(b) * prob.labels


def svm_primal_value(prob: KernelProblem, beta, b) -> float:
    """beta'K beta + C sum_n max(1 - (K beta)_n - b y^n, 0)."""
    beta = np.asarray(beta, dtype=float)
    xi = _margins(prob, beta, b)
    return float(beta @ (prob.K @ beta) + prob.C * np.sum(np.maximum(xi, 0.0)))


def svm_bound_eval(prob: KernelProblem, params: SvmParams):
    """Smoothed upper bound on the primal with exact gradients.

    With nu_n = 1 - (K mu)_n - mu_b y^n and
    varsigma_n = sigma sqrt(1 + sum_m K_nm^2), the bound is
    mu'K mu + sigma^2 trace(K) + C sum_n E max(z_n, 0), z_n ~ N(nu_n, varsigma_n^2).
    Gradients: d/dmu_n = 2 (K mu)_n - C sum_m K_nm cdf(nu_m / varsigma_m),
    d/db = -C sum_m y^m cdf(nu_m / varsigma_m).
    """
    mu = params.beta_mean
    if mu.shape != (prob.size,):
        raise ValueError(f"expected beta_mean of length {prob.size}")
    sigma = params.sigma
    Kmu = prob.K @ mu
    nu = 1.0 - Kmu - params.b_mean * prob.labels
    varsigma = sigma * np.sqrt(1.0 + np.sum(prob.K * prob.K, axis=1))
    value = float(mu @ Kmu) + sigma * sigma * prob.trace \
        + prob.C * float(np.sum(hinge_gauss_mean(nu, varsigma)))
    phis = std_normal_cdf(nu / varsigma)
    grad_beta = 2.0 * Kmu - prob.C * (prob.K @ phis)
    grad_b = -prob.C * float(prob.labels @ phis)
    return value, grad_beta, grad_b


def svm_gap_bound(prob: KernelProblem, sigma: float) -> float:
    """Certified maximum of bound minus primal at width sigma:
    sigma^2 trace(K) + C sigma M / sqrt(2 pi)."""
    if not (sigma > 0.0 and np.isfinite(sigma)):
        raise ValueError("sigma must be > 0")
    m = float(np.sum(np.sqrt(1.0 + np.sum(prob.K * prob.K, axis=1))))
    return sigma * sigma * prob.trace + prob.C * sigma * m / SQRT_2PI


def svm_gap_and_sigma(prob: KernelProblem, delta_f: float):
    """Gap machinery: the constant M, the gap curve, and the width for delta_f.

    M = sum_n sqrt(1 + sum_m K_nm^2); gap_at(sigma) = sigma^2 trace(K)
    + C sigma M / sqrt(2 pi); sigma_star is the positive root of
    gap_at(sigma) = delta_f.
    """
    if not (delta_f > 0.0 and np.isfinite(delta_f)):
        raise ValueError("delta_f must be > 0")
    m = float(np.sum(np.sqrt(1.0 + np.sum(prob.K * prob.K, axis=1))))
    trace = prob.trace
    lin = prob.C * m / SQRT_2PI

    def gap_at(sigma: float) -> float:
        return sigma * sigma * trace + lin * sigma

    if trace <= 0.0 and lin <= 0.0:
        raise ValueError("gap is identically zero")
    if trace <= 0.0:
        sigma_star = delta_f / lin
    else:
        sigma_star = 2.0 * delta_f / (lin + math.sqrt(lin * lin + 4.0 * trace * delta_f))
    return m, gap_at, sigma_star


def _huber_loss_terms(h: float, xi: np.ndarray):
    quad_zone = np.abs(xi) < h
    loss = np.where(quad_zone, (h + xi) ** 2 / (4.0 * h), np.maximum(xi, 0.0))
    slope = np.where(quad_zone, (h + xi) / (2.0 * h), (xi >= h).astype(float))
    return loss, slope, quad_zone


def huber_eval(prob: KernelProblem, spec: HuberSpec, beta, b):
    """Huber-smoothed primal with gradients.

    Per-point loss on xi_n = 1 - (K beta)_n - b y^n:
    (h + xi)^2 / (4h) for |xi| < h, max(xi, 0) otherwise (the boundary
    belongs to the linear branch).  Continuously differentiable, convex,
    upper-bounds the hinge by at most h/4 per point, and tightens as h -> 0.
    """
    beta = np.asarray(beta, dtype=float)
    xi = _margins(prob, beta, b)
    loss, slope, _ = _huber_loss_terms(spec.h, xi)
    value = float(beta @ (prob.K @ beta) + prob.C * np.sum(loss))
    grad_beta = 2.0 * (prob.K @ beta) - prob.C * (prob.K @ slope)
    grad_b = -prob.C * float(prob.labels @ slope)
    return value, grad_beta, grad_b


def huber_hessian(prob: KernelProblem, spec: HuberSpec, beta, b) -> np.ndarray:
    """Exact Hessian of the Huber objective, ordered (beta_1..beta_N, b).

    The curvature C/(2h) acts only on points inside the quadratic zone, so
    every block involving b vanishes when that zone is empty.
    """
    beta = np.asarray(beta, dtype=float)
    xi = _margins(prob, beta, b)
    _, _, quad_zone = _huber_loss_terms(spec.h, xi)
    weight = prob.C / (2.0 * spec.h) * quad_zone.astype(float)
    n = prob.size
    H = np.zeros((n + 1, n + 1))
    H[:n, :n] = 2.0 * prob.K + (prob.K * weight) @ prob.K
    cross = prob.K @ (weight * prob.labels)
    H[:n, n] = cross
    H[n, :n] = cross
    H[n, n] = float(np.sum(weight))
    return H


def smo_reference_solve(prob: KernelProblem, tol: float = 1e-6,
                        max_steps: int = 2_000_000):
    """Reference optimum via pairwise dual updates.

    Solves max_alpha sum alpha - alpha'K alpha / 4 over [0, C]^N with
    y'alpha = 0, picking the maximal-violating pair each step and solving the
    two-variable subproblem analytically; beta = alpha / 2 reconstructs the
    primal point.  Returns (beta, b, primal_value).
    """
    if not (tol > 0.0):
        raise ValueError("tol must be > 0")
    K, y, c = prob.K, prob.labels, prob.C
    n = prob.size
    alpha = np.zeros(n)
    # E_n = 1 - (K beta)_n drives both the pair selection and the bias
    e = np.ones(n)
    for _ in range(max_steps):
        ye = y * e
        up = np.where(y > 0, alpha < c, alpha > 0.0)
        low = np.where(y > 0, alpha > 0.0, alpha < c)
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, ye, -np.inf)))
        j = int(np.argmin(np.where(low, ye, np.inf)))
        violation = ye[i] - ye[j]
        if violation <= tol:
            break
        # move along alpha_i += t y_i, alpha_j -= t y_j (keeps y'alpha fixed)
        curv = 0.5 * (K[i, i] + K[j, j] - 2.0 * y[i] * y[j] * K[i, j])
        t = violation / max(curv, 1e-12)
        t = min(t, (c - alpha[i]) if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else (c - alpha[j]))
        alpha[i] += t * y[i]
        alpha[j] -= t * y[j]
        e -= 0.5 * t * (y[i] * K[:, i] - y[j] * K[:, j])
    else:
        raise RuntimeError(f"SMO did not reach tol {tol:g} within {max_steps} steps")
    beta = 0.5 * alpha
    free = (alpha > 0.0) & (alpha < c)
    ye = y * e
    if free.any():
        b = float(np.mean(ye[free]))
    else:
        lower = ((y > 0) & (alpha >= c)) | ((y < 0) & (alpha <= 0.0))
        upper = ((y > 0) & (alpha <= 0.0)) | ((y < 0) & (alpha >= c))
        b_lo = float(np.max(ye[lower])) if lower.any() else -np.inf
        b_up = float(np.min(ye[upper])) if upper.any() else np.inf
        if np.isinf(b_lo):
            b = b_up
        elif np.isinf(b_up):
            b = b_lo
        else:
            b = 0.5 * (b_lo + b_up)
    return beta, b, svm_primal_value(prob, beta, b)


def _split(x, n):
    x = np.asarray(x, dtype=float)
    return x[:n], float(x[n])


def vo_problem(prob: KernelProblem) -> SmoothedProblem:
    """Smoothed-objective handle over the stacked point (beta_1..beta_N, b)."""
    n = prob.size

    def bound(x, sigma):
        beta, b = _split(x, n)
        value, grad_beta, grad_b = svm_bound_eval(prob, SvmParams(beta, b, sigma))
        return value, np.append(grad_beta, grad_b)

    def objective(x):
        beta, b = _split(x, n)
        return svm_primal_value(prob, beta, b)

    return SmoothedProblem(bound=bound, objective=objective,
                           gap=lambda sigma: svm_gap_bound(prob, sigma))


def huber_problem(prob: KernelProblem) -> SmoothedProblem:
    """Huber-comparator handle; the smoothing width is the half-width h."""
    n = prob.size

    def bound(x, h):
        beta, b = _split(x, n)
        value, grad_beta, grad_b = huber_eval(prob, HuberSpec(h), beta, b)
        return value, np.append(grad_beta, grad_b)

    def objective(x):
        beta, b = _split(x, n)
        return svm_primal_value(prob, beta, b)

    # per-point Huber excess over the hinge peaks at h/4
    return SmoothedProblem(bound=bound, objective=objective,
                           gap=lambda h: prob.C * prob.size * h / 4.0)
