"""Mean-field Bernoulli relaxation of binary quadratic programs.

For f(x) = x'Ax + b'x on the hypercube {0,1}^D, a factorized Bernoulli
distribution with success probabilities theta gives the multilinear lower
bound E(theta) on max f, exact at every vertex.  Projected gradient ascent
exercises the bound; exhaustive enumeration provides the oracle at small D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BinaryQP",
    "BernoulliParams",
    "binary_bound_eval",
    "binary_vo_maximize",
    "binary_vo_multistart",
    "brute_force_max",
    "default_step_size",
]

ENUMERATION_LIMIT = 22


def _readonly(arr):
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class BinaryQP:
    """Objective data for f(x) = x'Ax + b'x; A need not be symmetric or PSD."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = _readonly(self.A)
        b = _readonly(self.b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if b.ndim != 1 or b.size < 1 or A.shape != (b.size, b.size):
            raise ValueError("need b of shape (D,) and A of shape (D, D)")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("entries must be finite")

    @property
    def dim(self) -> int:
        return self.b.size

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.A @ x) + self.b @ x)


@dataclass(frozen=True)
class BernoulliParams:
    """Factorized Bernoulli success probabilities, componentwise in [0, 1]."""

    theta: np.ndarray

    def __post_init__(self):
        theta = _readonly(self.theta)
        object.__setattr__(self, "theta", theta)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise ValueError("theta must be a finite vector")
        if np.any(theta < 0.0) or np.any(theta > 1.0):
            raise ValueError("theta must lie in [0, 1] componentwise")


def binary_bound_eval(qp: BinaryQP, params: BernoulliParams):
    """Expected objective under the factorized distribution, with gradient.

    E(theta) = sum_{i != j} A_ij theta_i theta_j + sum_i (b_i + A_ii) theta_i,
    using E[x_i x_j] = theta_i theta_j for i != j and E[x_i^2] = theta_i.
    At any 0/1 vertex E(theta) = f(theta) exactly.
    """
    theta = params.theta
    if theta.size != qp.dim:
        raise ValueError(f"expected theta of length {qp.dim}")
    diag = np.diag(qp.A)
    atheta = qp.A @ theta
    value = float(theta @ atheta - diag @ (theta * theta) + (qp.b + diag) @ theta)
    grad = atheta + qp.A.T @ theta - 2.0 * diag * theta + qp.b + diag
    return value, grad


def default_step_size(qp: BinaryQP) -> float:
    """Fixed ascent step 1 / (2 ||A||_inf + ||b||_inf + 1)."""
    a_norm = float(np.max(np.sum(np.abs(qp.A), axis=1)))
    b_norm = float(np.max(np.abs(qp.b))) if qp.dim else 0.0
    return 1.0 / (2.0 * a_norm + b_norm + 1.0)


def binary_vo_maximize(qp: BinaryQP, init: BernoulliParams, steps: int = 500,
                       step_size: float | None = None):
    """Projected gradient ascent on the box, then threshold-rounding.

    Returns (theta, rounded, f_rounded) where rounded_i = 1 iff
    theta_i >= 0.5 and f_rounded is the objective at that vertex.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if step_size is None:
        step_size = default_step_size(qp)
    if not (step_size > 0.0):
        raise ValueError("step_size must be > 0")
    theta = np.array(init.theta, dtype=float)
    if theta.size != qp.dim:
        raise ValueError(f"expected theta of length {qp.dim}")
    for _ in range(steps):
        _, grad = binary_bound_eval(qp, BernoulliParams(theta))
        theta = np.clip(theta + step_size * grad, 0.0, 1.0)
    rounded = (theta >= 0.5).astype(np.int64)
    return BernoulliParams(theta), rounded, qp.value(rounded)


def binary_vo_multistart(qp: BinaryQP, restarts: int = 8, steps: int = 500,
                         step_size: float | None = None, seed: int = 0):
    """Best of several ascent runs: one from the box center, the rest random."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    best = None
    for r in range(restarts):
        if r == 0:
            init = BernoulliParams(np.full(qp.dim, 0.5))
        else:
            init = BernoulliParams(rng.random(qp.dim))
        result = binary_vo_maximize(qp, init, steps=steps, step_size=step_size)
        if best is None or result[2] > best[2]:
            best = result
    return best


def brute_force_max(qp: BinaryQP):
    """Exhaustive maximum over {0,1}^D; ties go to the lexicographically
    smallest vertex.  Refuses D > 22."""
    d = qp.dim
    if d > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration budget is D <= {ENUMERATION_LIMIT}, got {d}")
    # bit i of the counter is coordinate i read MSB-first, so counter order
    # is lexicographic order on x and the first argmax breaks ties correctly
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    total = 1 << d
    chunk = min(total, 1 << 16)
    best_val = -np.inf
    best_x = None
    for start in range(0, total, chunk):
        ks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        X = ((ks[:, None] >> shifts[None, :]) & 1).astype(float)
        vals = np.einsum("ij,ij->i", X @ qp.A, X) + X @ qp.b
        local = int(np.argmax(vals))
        if vals[local] > best_val:
            best_val = float(vals[local])
            best_x = X[local].astype(np.int64)
    return best_x, best_val
