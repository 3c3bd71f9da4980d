"""Gaussian-expectation primitives shared by the smoothed objectives.

Closed forms for the mean of |w| and of max(z, 0) under a scalar Gaussian,
their derivatives with respect to the mean, and the per-coordinate
smoothing gap.  Everything broadcasts over numpy arrays; scalars in give
scalars out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "ScalarGaussian",
    "std_normal_cdf",
    "std_normal_pdf",
    "abs_gauss_mean",
    "abs_gauss_grad_mu",
    "abs_gauss_curvature_mu",
    "hinge_gauss_mean",
    "hinge_gauss_grad_nu",
    "abs_gap",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# Beyond |z| = 40 both the tail CDF and exp(-z^2/2) underflow double
# precision, so the smoothed terms equal their zero-width limits exactly.
TAIL_CUTOFF = 40.0


def _finite(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _maybe_scalar(out, *inputs):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(out)
    return out


@dataclass(frozen=True)
class ScalarGaussian:
    """Per-coordinate Gaussian N(mean, std^2).

    Fields may be scalars or broadcastable arrays; std must be strictly
    positive wherever a smoothed quantity is evaluated.
    """

    mean: float | np.ndarray
    std: float | np.ndarray

    def __post_init__(self):
        _finite(self.mean, "mean")
        std = _finite(self.std, "std")
        if np.any(std < 0.0):
            raise ValueError("std must be >= 0")


def _positive_std(g: ScalarGaussian):
    mu = np.asarray(g.mean, dtype=float)
    std = np.asarray(g.std, dtype=float)
    if np.any(std <= 0.0):
        raise ValueError("std must be > 0 for smoothed evaluation")
    return mu, std


def std_normal_cdf(x):
    """Standard normal CDF, accurate to ~1e-16 relative across the real line."""
    arr = _finite(x, "x")
    return _maybe_scalar(ndtr(arr), x)


def std_normal_pdf(x):
    """Standard normal density exp(-x^2/2) / sqrt(2 pi)."""
    arr = _finite(x, "x")
    return _maybe_scalar(np.exp(-0.5 * arr * arr) / SQRT_2PI, x)


def abs_gauss_mean(g: ScalarGaussian):
    """E|w| for w ~ N(mu, sigma^2).

    Equals mu * (1 - 2 cdf(-mu/sigma)) + 2 sigma exp(-mu^2/(2 sigma^2)) / sqrt(2 pi);
    always >= |mu|, even in mu, and -> |mu| as sigma -> 0.
    """
    mu, sigma = _positive_std(g)
    with np.errstate(over="ignore"):
        z = mu / sigma
        zc = np.clip(z, -TAIL_CUTOFF, TAIL_CUTOFF)
        smooth = mu * (1.0 - 2.0 * ndtr(-zc)) + (2.0 / SQRT_2PI) * sigma * np.exp(-0.5 * zc * zc)
        out = np.where(np.abs(z) > TAIL_CUTOFF, np.abs(mu), smooth)
    return _maybe_scalar(out, g.mean, g.std)


def abs_gauss_grad_mu(g: ScalarGaussian):
    """d E|w| / d mu = 1 - 2 cdf(-mu/sigma); odd in mu, saturates to +-1."""
    mu, sigma = _positive_std(g)
    with np.errstate(over="ignore"):
        z = mu / sigma
    return _maybe_scalar(1.0 - 2.0 * ndtr(-z), g.mean, g.std)


def abs_gauss_curvature_mu(g: ScalarGaussian):
    """d^2 E|w| / d mu^2 = 2 exp(-mu^2/(2 sigma^2)) / (sigma sqrt(2 pi)) > 0."""
    mu, sigma = _positive_std(g)
    with np.errstate(over="ignore"):
        z = mu / sigma
        zc = np.clip(z, -TAIL_CUTOFF, TAIL_CUTOFF)
        out = np.where(np.abs(z) > TAIL_CUTOFF, 0.0,
                       (2.0 / SQRT_2PI) / sigma * np.exp(-0.5 * zc * zc))
    return _maybe_scalar(out, g.mean, g.std)


def hinge_gauss_mean(nu, varsigma):
    """E max(z, 0) for z ~ N(nu, varsigma^2).

    Equals nu * cdf(nu/varsigma) + varsigma exp(-nu^2/(2 varsigma^2)) / sqrt(2 pi);
    convex and nondecreasing in nu, >= max(nu, 0), and exceeds it by at most
    varsigma / sqrt(2 pi).
    """
    nu_arr = _finite(nu, "nu")
    vs = _finite(varsigma, "varsigma")
    if np.any(vs <= 0.0):
        raise ValueError("varsigma must be > 0")
    with np.errstate(over="ignore"):
        z = nu_arr / vs
        zc = np.clip(z, -TAIL_CUTOFF, TAIL_CUTOFF)
        smooth = nu_arr * ndtr(zc) + vs / SQRT_2PI * np.exp(-0.5 * zc * zc)
        out = np.where(np.abs(z) > TAIL_CUTOFF, np.maximum(nu_arr, 0.0), smooth)
    return _maybe_scalar(out, nu, varsigma)


def hinge_gauss_grad_nu(nu, varsigma):
    """d E max(z, 0) / d nu = cdf(nu / varsigma)."""
    nu_arr = _finite(nu, "nu")
    vs = _finite(varsigma, "varsigma")
    if np.any(vs <= 0.0):
        raise ValueError("varsigma must be > 0")
    with np.errstate(over="ignore"):
        z = nu_arr / vs
    return _maybe_scalar(ndtr(z), nu, varsigma)


def abs_gap(z):
    """Unit-scale smoothing excess g(z) = E|w| - |z| for w ~ N(z, 1).

    g(z) = z (1 - 2 cdf(-z)) + sqrt(2/pi) exp(-z^2/2) - |z|.  Even,
    nonnegative, peaks at g(0) = sqrt(2/pi) and decays to 0 in the tails.
    The smoothing error of |.| at scale sigma is sigma * abs_gap(mu/sigma).
    """
    arr = _finite(z, "z")
    az = np.abs(arr)
    zc = np.minimum(az, TAIL_CUTOFF)
    raw = az * (1.0 - 2.0 * ndtr(-zc)) + SQRT_2_OVER_PI * np.exp(-0.5 * zc * zc) - az
    # far-tail cancellation can leave -1e-16 residue; the true value is >= 0
    out = np.where(az > TAIL_CUTOFF, 0.0, np.maximum(raw, 0.0))
    return _maybe_scalar(out, z)
