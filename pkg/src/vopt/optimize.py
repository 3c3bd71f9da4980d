"""Bound-minimization procedures with annealed smoothing.

Two optimizers drive every smoothed objective in this package: a damped
diagonal Newton method and a limited-memory quasi-Newton method with a
strong-Wolfe line search.  Both shrink the smoothing width geometrically
while they run and emit a standardized run report with a gap certificate
at the final width.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ShrinkSchedule",
    "StopRule",
    "RunReport",
    "SmoothedProblem",
    "CurvatureError",
    "LineSearchError",
    "lbfgs_direction",
    "diag_newton_minimize",
    "quasi_newton_minimize",
]


class CurvatureError(RuntimeError):
    """Diagonal Newton met a non-positive Hessian entry."""


class LineSearchError(RuntimeError):
    """Line search could not make progress; carries the partial report."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ShrinkSchedule:
    """Geometric annealing of the smoothing width.

    The width at iteration t (0-based) is
    max(initial * factor**(t // every), floor).
    """

    initial: float
    factor: float = 0.9
    every: int = 1
    floor: float = 0.0

    def __post_init__(self):
        if not (self.initial > self.floor >= 0.0):
            raise ValueError("need initial > floor >= 0")
        if not (0.0 < self.factor <= 1.0):
            raise ValueError("factor must lie in (0, 1]")
        if self.every < 1:
            raise ValueError("every must be >= 1")

    def value_at(self, iteration: int) -> float:
        return max(self.initial * self.factor ** (iteration // self.every), self.floor)


@dataclass(frozen=True)
class StopRule:
    rel_change_tol: float
    max_iters: int

    def __post_init__(self):
        if self.rel_change_tol <= 0.0 or self.max_iters <= 0:
            raise ValueError("StopRule fields must be positive")


@dataclass(frozen=True)
class SmoothedProblem:
    """Handle bundling a smoothed objective with its exact counterpart.

    bound(point, width) returns (value, grad) or (value, grad, hess_diag);
    objective(point) is the unsmoothed function; gap(width) certifies
    max over points of bound - objective at that smoothing width.
    """

    bound: Callable[[np.ndarray, float], tuple]
    objective: Callable[[np.ndarray], float]
    gap: Callable[[float], float]


@dataclass
class RunReport:
    final_point: np.ndarray
    final_objective: float
    final_bound: float
    gap_certificate: float
    iterations: int
    objective_trace: np.ndarray
    wall_time: float = field(default=0.0, compare=False)


def _finish(problem, point, sigma, iterations, trace, t0) -> RunReport:
    final_bound = float(problem.bound(point, sigma)[0])
    return RunReport(
        final_point=point,
        final_objective=float(problem.objective(point)),
        final_bound=final_bound,
        gap_certificate=float(problem.gap(sigma)),
        iterations=iterations,
        objective_trace=np.asarray(trace, dtype=float),
        wall_time=time.perf_counter() - t0,
    )


def diag_newton_minimize(problem: SmoothedProblem, schedule: ShrinkSchedule,
                         init: np.ndarray, stop: StopRule,
                         damping: float = 0.1) -> RunReport:
    """Damped diagonal Newton descent on a shrinking-width bound.

    Each iteration updates mu_i <- mu_i - damping * grad_i / hess_i at the
    current width, then the schedule advances.  Terminates when the mean
    absolute change falls below rel_change_tol times the mean absolute
    value of the current solution, or at max_iters.
    """
    t0 = time.perf_counter()
    mu = np.array(init, dtype=float)
    trace = []
    sigma = schedule.value_at(0)
    iterations = 0
    for it in range(stop.max_iters):
        sigma = schedule.value_at(it)
        value, grad, hess = problem.bound(mu, sigma)
        if np.any(hess <= 0.0) or not np.all(np.isfinite(hess)):
            raise CurvatureError(
                f"non-positive Hessian diagonal at iteration {it}; "
                f"min entry {np.min(hess):g}")
        trace.append(value)
        step = damping * grad / hess
        mu = mu - step
        iterations = it + 1
        change = float(np.mean(np.abs(step)))
        scale = float(np.mean(np.abs(mu)))
        if change < stop.rel_change_tol * scale or (scale == 0.0 and change == 0.0):
            break
    return _finish(problem, mu, sigma, iterations, trace, t0)


def lbfgs_direction(grad: np.ndarray, s_hist, y_hist) -> np.ndarray:
    """Two-loop recursion: apply the implicit inverse Hessian to -grad."""
    q = -grad.copy()
    if not s_hist:
        return q
    alphas = []
    rhos = [1.0 / float(np.dot(y, s)) for s, y in zip(s_hist, y_hist)]
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * float(np.dot(s, q))
        alphas.append(a)
        q -= a * y
    s_last, y_last = s_hist[-1], y_hist[-1]
    q *= float(np.dot(s_last, y_last)) / float(np.dot(y_last, y_last))
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        b = rho * float(np.dot(y, q))
        q += (a - b) * s
    return q


_WOLFE_C1 = 1e-4
_WOLFE_C2 = 0.9
_MAX_LS_EVALS = 40


def _interp_quadratic(t_lo, f_lo, d_lo, t_hi, f_hi):
    # minimizer of the quadratic through (t_lo, f_lo, d_lo) and (t_hi, f_hi);
    # exact for quadratic objectives, which makes the optimizer finitely
    # convergent on them
    denom = f_hi - f_lo - d_lo * (t_hi - t_lo)
    if denom <= 0.0 or not np.isfinite(denom):
        return None
    t = t_lo - 0.5 * d_lo * (t_hi - t_lo) ** 2 / denom
    if not np.isfinite(t):
        return None
    return t


def _wolfe_search(phi, f0, d0, t_init):
    """Strong-Wolfe search on phi(t) -> (f, dphi, payload).

    Returns (t, f, payload, converged_flat) where converged_flat signals
    that no improvement beyond floating-point resolution exists along this
    direction; t is None on genuine failure.
    """
    evals = 0
    best = (0.0, f0, None)

    def take(t):
        nonlocal evals, best
        evals += 1
        f, d, payload = phi(t)
        if f < best[1]:
            best = (t, f, payload)
        return f, d, payload

    def wolfe_ok(t, f, d):
        return (f <= f0 + _WOLFE_C1 * t * d0) and (abs(d) <= -_WOLFE_C2 * d0)

    def zoom(lo, f_lo, d_lo, hi, f_hi):
        nonlocal evals
        while evals < _MAX_LS_EVALS:
            t = _interp_quadratic(lo, f_lo, d_lo, hi, f_hi)
            width = abs(hi - lo)
            left, right = sorted((lo, hi))
            if t is None or not (left < t < right):
                t = 0.5 * (lo + hi)
            f, d, payload = take(t)
            if wolfe_ok(t, f, d):
                return t, f, payload
            if f > f0 + _WOLFE_C1 * t * d0 or f >= f_lo:
                hi, f_hi = t, f
            else:
                if d * (hi - lo) >= 0.0:
                    hi, f_hi = lo, f_lo
                lo, f_lo, d_lo = t, f, d
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)) or width == abs(hi - lo):
                break
        return None

    t_prev, f_prev, d_prev = 0.0, f0, d0
    t = t_init
    first = True
    while evals < _MAX_LS_EVALS:
        f, d, payload = take(t)
        if f > f0 + _WOLFE_C1 * t * d0 or (not first and f >= f_prev):
            res = zoom(t_prev, f_prev, d_prev, t, f)
            break
        if wolfe_ok(t, f, d):
            return t, f, payload, False
        if d >= 0.0:
            res = zoom(t, f, d, t_prev, f_prev)
            break
        # minimizer lies beyond t: extrapolate, preferring the quadratic model
        t_new = _interp_quadratic(t_prev, f_prev, d_prev, t, f)
        if t_new is None or t_new <= t * 1.0001:
            t_new = 2.0 * t
        t_prev, f_prev, d_prev = t, f, d
        t = min(t_new, 1e10)
        first = False
    else:
        res = None

    if res is not None:
        t, f, payload = res
        return t, f, payload, False
    # fall back to the best strict-descent point seen, if any
    t_best, f_best, payload_best = best
    if t_best > 0.0 and f_best < f0:
        return t_best, f_best, payload_best, False
    flat = abs(f_best - f0) <= 8.0 * np.finfo(float).eps * max(1.0, abs(f0))
    return None, f0, None, flat


def quasi_newton_minimize(problem: SmoothedProblem, schedule: ShrinkSchedule,
                          init: np.ndarray, stop: StopRule,
                          memory: int = 10) -> RunReport:
    """Limited-memory quasi-Newton descent on a shrinking-width bound.

    Search directions come from the two-loop recursion over curvature pairs
    that pass the s'y > 0 filter, so every step is a descent step; the line
    search enforces sufficient decrease and the strong curvature condition.
    Terminates when the gradient norm falls below
    rel_change_tol * max(1, |initial gradient|), or at max_iters.
    """
    if memory < 1:
        raise ValueError("memory must be >= 1")
    t0 = time.perf_counter()
    x = np.array(init, dtype=float)
    sigma = schedule.value_at(0)
    f, g = problem.bound(x, sigma)[:2]
    g0_scale = max(1.0, float(np.linalg.norm(g)))
    s_hist: deque = deque(maxlen=memory)
    y_hist: deque = deque(maxlen=memory)
    trace = [float(f)]
    iterations = 0
    for it in range(stop.max_iters):
        sigma_it = schedule.value_at(it)
        if sigma_it != sigma:
            sigma = sigma_it
            f, g = problem.bound(x, sigma)[:2]
        if float(np.linalg.norm(g)) < stop.rel_change_tol * g0_scale:
            break
        d = lbfgs_direction(g, s_hist, y_hist)
        d0 = float(np.dot(g, d))
        if d0 >= 0.0:
            # numerically spoiled memory: drop it and fall back to steepest descent
            s_hist.clear()
            y_hist.clear()
            d = -g
            d0 = -float(np.dot(g, g))

        def phi(t, _d=d, _x=x, _sigma=sigma):
            fv, gv = problem.bound(_x + t * _d, _sigma)[:2]
            return fv, float(np.dot(gv, _d)), gv

        t_init = 1.0 if s_hist else min(1.0, 1.0 / max(1.0, float(np.sum(np.abs(g)))))
        t_step, f_new, g_new, flat = _wolfe_search(phi, float(f), d0, t_init)
        if t_step is None:
            if flat:
                break  # at floating-point resolution of the bound: converged
            raise LineSearchError(
                f"line search stalled at iteration {it}",
                _finish(problem, x, sigma, iterations, trace, t0))
        if g_new is None:
            _, g_new = problem.bound(x + t_step * d, sigma)[:2]
        s = t_step * d
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
        x = x + s
        f, g = f_new, g_new
        trace.append(float(f))
        iterations = it + 1
    return _finish(problem, x, sigma, iterations, trace, t0)
