"""Experiment harness: synthetic generators, suite runner, reports.

Reproduces the synthetic protocols at configurable scale, runs the smoothed
optimizers against the in-repo reference solvers, and emits per-run rows with
relative errors and gap certificates.  All randomness flows through
counter-based generators keyed by (seed, repeat), so repeats are
order-independent and bit-reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import binary_qp, lasso, svm
from .optimize import ShrinkSchedule, StopRule, diag_newton_minimize, quasi_newton_minimize

__all__ = [
    "ExperimentConfig",
    "ReportRow",
    "TASKS",
    "make_config",
    "rng_from",
    "child_seed",
    "gen_lasso",
    "gen_fused",
    "gen_svm",
    "gen_binary",
    "run_suite",
    "run_props",
    "report_text",
    "write_report",
]

TASKS = ("lasso", "fused", "svm", "binary", "props")

CSV_HEADER = "task,dim,seed,solver,objective,relative_error,gap_certificate,iterations,wall_time_s"

_TASK_DEFAULTS = {
    "lasso": dict(dim=50, sigma0=0.1, shrink=0.9, every=1, floor=1e-8, tol=1e-15, max_iters=100_000),
    "fused": dict(dim=100, sigma0=0.1, shrink=0.9, every=1, floor=1e-8, tol=1e-10, max_iters=2000),
    "svm": dict(dim=100, n=200, sigma0=0.001, shrink=0.1, every=250, floor=1e-10, tol=1e-10, max_iters=1600),
    "binary": dict(dim=12, sigma0=1.0, shrink=1.0, every=1, floor=0.0, tol=1e-10, max_iters=500),
    "props": dict(dim=8, sigma0=0.1, shrink=0.9, every=1, floor=1e-8, tol=1e-10, max_iters=1000),
}

HUBER_INITIAL = 10.0
SUBGRADIENT_ITERS = 20_000
BINARY_RESTARTS = 8


def rng_from(entropy) -> np.random.Generator:
    """Counter-based generator keyed by an int or tuple of ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def child_seed(seed: int, repeat: int, stream: int = 0) -> int:
    """Stable 64-bit substream key hashed from (seed, repeat, stream)."""
    ss = np.random.SeedSequence((int(seed), int(repeat), int(stream)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    dim: int
    n_points: int | None
    seed: int
    schedule: ShrinkSchedule
    stop: StopRule
    cost: float = 10.0
    regularizers: tuple[float, float] | None = None
    repeats: int = 1
    output_path: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.dim < 1 or self.repeats < 1:
            raise ValueError("dim and repeats must be >= 1")
        if self.n_points is not None and self.n_points < 2:
            raise ValueError("n must be >= 2")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")


def make_config(task: str, dim: int | None = None, n: int | None = None, seed: int = 0,
                repeats: int = 1, sigma0: float | None = None, shrink: float | None = None,
                shrink_every: int | None = None, sigma_floor: float | None = None,
                tol: float | None = None, max_iters: int | None = None, cost: float = 10.0,
                regularizers: tuple[float, float] | None = None,
                out: str | None = None, fmt: str = "csv") -> ExperimentConfig:
    """Fill per-task protocol defaults for anything not given explicitly."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; choose from {TASKS}")
    d = _TASK_DEFAULTS[task]
    schedule = ShrinkSchedule(
        initial=d["sigma0"] if sigma0 is None else sigma0,
        factor=d["shrink"] if shrink is None else shrink,
        every=d["every"] if shrink_every is None else shrink_every,
        floor=d["floor"] if sigma_floor is None else sigma_floor,
    )
    stop = StopRule(
        rel_change_tol=d["tol"] if tol is None else tol,
        max_iters=d["max_iters"] if max_iters is None else max_iters,
    )
    return ExperimentConfig(
        task=task,
        dim=d["dim"] if dim is None else dim,
        n_points=d.get("n") if n is None else n,
        seed=seed,
        schedule=schedule,
        stop=stop,
        cost=cost,
        regularizers=regularizers,
        repeats=repeats,
        output_path=out,
        fmt=fmt,
    )


@dataclass
class ReportRow:
    task: str
    dim: int
    seed: int
    solver: str
    objective: float
    relative_error: float
    gap_certificate: float
    iterations: int
    wall_time_s: float


def _sparse_coefficients(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Coefficient draw: 0 w.p. 1/2, N(5,1) w.p. 1/4, N(-5,1) w.p. 1/4."""
    cats = rng.random(dim)
    normals = rng.standard_normal(dim)
    return np.where(cats < 0.5, 0.0, np.where(cats < 0.75, 5.0 + normals, -5.0 + normals))


def _noisy_labels(rng: np.random.Generator, X: np.ndarray, u: np.ndarray) -> np.ndarray:
    y0 = X @ u
    noise_std = 0.1 * float(np.mean(np.abs(y0)))
    return y0 + noise_std * rng.standard_normal(y0.size)


def gen_lasso(dim: int, seed: int):
    """Sparse regression instance: N = 10 dim rows, lambda1 = 30 dim."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = rng_from(seed)
    u = _sparse_coefficients(rng, dim)
    X = rng.standard_normal((10 * dim, dim))
    y = _noisy_labels(rng, X, u)
    spec = lasso.LassoSpec(lasso.build_quadratic(X, y), lambda1=30.0 * dim, lambda2=0.0)
    return spec, u


def gen_fused(dim: int, seed: int):
    """Piecewise-constant instance: lambda1 = dim, lambda2 = 0.4 dim.

    The first coefficient follows the sparse draw; each later one copies its
    neighbour w.p. 1/2, is 0 w.p. 1/4, and is N(+-5, 1) w.p. 1/8 each.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = rng_from(seed)
    cats = rng.random(dim)
    normals = rng.standard_normal(dim)
    u = np.zeros(dim)
    if cats[0] < 0.5:
        u[0] = 0.0
    elif cats[0] < 0.75:
        u[0] = 5.0 + normals[0]
    else:
        u[0] = -5.0 + normals[0]
    for i in range(1, dim):
        if cats[i] < 0.5:
            u[i] = u[i - 1]
        elif cats[i] < 0.75:
            u[i] = 0.0
        elif cats[i] < 0.875:
            u[i] = 5.0 + normals[i]
        else:
            u[i] = -5.0 + normals[i]
    X = rng.standard_normal((10 * dim, dim))
    y = _noisy_labels(rng, X, u)
    spec = lasso.LassoSpec(lasso.build_quadratic(X, y), lambda1=1.0 * dim, lambda2=0.4 * dim)
    return spec, u


def gen_svm(n: int, dim: int, seed: int, cost: float = 10.0) -> svm.KernelProblem:
    """Near-separable classification: positives around a length-3.5 vector.

    Balanced labels (extra point positive for odd n), unit-covariance
    Gaussian clouds, linear kernel.
    """
    if n < 2 or dim < 1:
        raise ValueError("need n >= 2 and dim >= 1")
    rng = rng_from(seed)
    v = rng.standard_normal(dim)
    v *= 3.5 / float(np.linalg.norm(v))
    n_pos = (n + 1) // 2
    pos = v + rng.standard_normal((n_pos, dim))
    neg = rng.standard_normal((n - n_pos, dim))
    points = np.vstack([pos, neg])
    labels = np.concatenate([np.ones(n_pos), -np.ones(n - n_pos)])
    return svm.build_kernel(points, labels, kernel="linear", cost=cost)


def gen_binary(dim: int, seed: int) -> binary_qp.BinaryQP:
    """Random symmetric-coupling instance with standard-normal entries."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = rng_from(seed)
    g = rng.standard_normal((dim, dim))
    return binary_qp.BinaryQP(A=0.5 * (g + g.T), b=rng.standard_normal(dim))


def _rel_errors_min(objectives):
    finite = [f for f in objectives if np.isfinite(f)]
    if not finite:
        return [np.nan for _ in objectives]
    best = min(finite)
    denom = best if best > 0 else max(abs(best), 1.0)
    return [(f - best) / denom if np.isfinite(f) else np.nan for f in objectives]


def _rel_errors_max(objectives):
    finite = [f for f in objectives if np.isfinite(f)]
    if not finite:
        return [np.nan for _ in objectives]
    best = max(finite)
    denom = best if best > 0 else max(abs(best), 1.0)
    return [(best - f) / denom if np.isfinite(f) else np.nan for f in objectives]


def _timed(solver: Callable):
    t0 = time.perf_counter()
    out = solver()
    return out, time.perf_counter() - t0


def _apply_regularizers(config: ExperimentConfig, spec: lasso.LassoSpec) -> lasso.LassoSpec:
    if config.regularizers is None:
        return spec
    lam1, lam2 = config.regularizers
    return replace(spec, lambda1=lam1, lambda2=lam2)


def _lasso_repeat(config: ExperimentConfig, seed: int):
    spec, _ = gen_lasso(config.dim, seed)
    spec = _apply_regularizers(config, spec)
    report, _ = _timed(lambda: diag_newton_minimize(
        lasso.vo_problem(spec), config.schedule, np.zeros(spec.dim), config.stop))
    w_ref, t_ref = _timed(lambda: lasso.shooting_solve(spec, tol=1e-12))
    rows = [
        ("vo-diag-newton", report.final_objective, report.gap_certificate,
         report.iterations, report.wall_time),
        ("shooting", lasso.lasso_value(spec, w_ref), 0.0, 0, t_ref),
    ]
    return rows, _rel_errors_min([r[1] for r in rows])


def _fused_repeat(config: ExperimentConfig, seed: int):
    spec, _ = gen_fused(config.dim, seed)
    spec = _apply_regularizers(config, spec)
    report, _ = _timed(lambda: quasi_newton_minimize(
        lasso.vo_problem(spec), config.schedule, np.zeros(spec.dim), config.stop))
    w_ref, t_ref = _timed(lambda: lasso.fused_reference_solve(spec, SUBGRADIENT_ITERS))
    rows = [
        ("vo-lbfgs", report.final_objective, report.gap_certificate,
         report.iterations, report.wall_time),
        ("subgradient", lasso.lasso_value(spec, w_ref), 0.0, SUBGRADIENT_ITERS, t_ref),
    ]
    return rows, _rel_errors_min([r[1] for r in rows])


def _svm_repeat(config: ExperimentConfig, seed: int, init_seed: int):
    n = config.n_points if config.n_points is not None else 10 * config.dim
    prob = gen_svm(n, config.dim, seed, cost=config.cost)
    x0 = rng_from(init_seed).standard_normal(prob.size + 1)
    vo_report, _ = _timed(lambda: quasi_newton_minimize(
        svm.vo_problem(prob), config.schedule, x0, config.stop))
    huber_schedule = ShrinkSchedule(initial=HUBER_INITIAL, factor=config.schedule.factor,
                                    every=config.schedule.every, floor=1e-8)
    hub_report, _ = _timed(lambda: quasi_newton_minimize(
        svm.huber_problem(prob), huber_schedule, x0, config.stop))
    (beta, b, primal), t_smo = _timed(lambda: svm.smo_reference_solve(prob, tol=1e-6))
    rows = [
        ("vo-lbfgs", vo_report.final_objective, vo_report.gap_certificate,
         vo_report.iterations, vo_report.wall_time),
        ("huber-lbfgs", hub_report.final_objective, hub_report.gap_certificate,
         hub_report.iterations, hub_report.wall_time),
        ("smo", primal, 0.0, 0, t_smo),
    ]
    return rows, _rel_errors_min([r[1] for r in rows])


def _binary_repeat(config: ExperimentConfig, seed: int, init_seed: int):
    qp = gen_binary(config.dim, seed)
    (theta, rounded, f_rounded), t_vo = _timed(lambda: binary_qp.binary_vo_multistart(
        qp, restarts=BINARY_RESTARTS, steps=config.stop.max_iters, seed=init_seed))
    bound_val, _ = binary_qp.binary_bound_eval(qp, theta)
    rows = [("vo-projgrad", f_rounded, max(0.0, bound_val - f_rounded),
             config.stop.max_iters, t_vo)]
    if config.dim <= binary_qp.ENUMERATION_LIMIT:
        (_, f_star), t_bf = _timed(lambda: binary_qp.brute_force_max(qp))
        rows.append(("brute-force", f_star, 0.0, 0, t_bf))
    return rows, _rel_errors_max([r[1] for r in rows])


def run_suite(config: ExperimentConfig):
    """Run the configured task over all repeats.

    Returns (rows, n_failures); a solver exception produces a row with NaN
    metrics rather than aborting the suite.  Writes the report file when the
    config carries an output path.
    """
    if config.task == "props":
        raise ValueError("use run_props for the property suite")
    runners = {"lasso": _lasso_repeat, "fused": _fused_repeat,
               "svm": _svm_repeat, "binary": _binary_repeat}
    runner = runners[config.task]
    rows: list[ReportRow] = []
    failures = 0
    for r in range(config.repeats):
        seed = child_seed(config.seed, r, 0)
        init_seed = child_seed(config.seed, r, 1)
        try:
            if config.task in ("svm", "binary"):
                raw, rels = runner(config, seed, init_seed)
            else:
                raw, rels = runner(config, seed)
        except Exception as exc:  # noqa: BLE001 - failed run becomes an error row
            failures += 1
            rows.append(ReportRow(config.task, config.dim, seed, f"error:{type(exc).__name__}",
                                  float("nan"), float("nan"), float("nan"), 0, 0.0))
            continue
        for (solver, objective, gap, iters, wall), rel in zip(raw, rels):
            rows.append(ReportRow(config.task, config.dim, seed, solver,
                                  float(objective), float(rel), float(gap),
                                  int(iters), float(wall)))
    if config.output_path:
        write_report(rows, config.output_path, config.fmt)
    return rows, failures


def _f17(x: float) -> str:
    return format(float(x), ".17g")


def report_text(rows, fmt: str = "csv") -> str:
    """Serialize rows; csv uses 17 significant digits and LF endings."""
    if fmt == "csv":
        lines = [CSV_HEADER]
        for row in rows:
            lines.append(",".join([
                row.task, str(row.dim), str(row.seed), row.solver,
                _f17(row.objective), _f17(row.relative_error),
                _f17(row.gap_certificate), str(row.iterations), _f17(row.wall_time_s),
            ]))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps([asdict(row) for row in rows], indent=2) + "\n"
    raise ValueError("format must be csv or json")


def write_report(rows, path: str, fmt: str = "csv") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_text(rows, fmt))


# ---------------------------------------------------------------------------
# property suite


@dataclass
class PropertyResult:
    name: str
    checks: int
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _random_lasso_spec(rng, dim, fused=False):
    n = 3 * dim
    X = rng.standard_normal((n, dim))
    y = rng.standard_normal(n)
    lam1 = float(rng.uniform(0.1, 5.0))
    lam2 = float(rng.uniform(0.1, 5.0)) if fused else 0.0
    return lasso.LassoSpec(lasso.build_quadratic(X, y), lambda1=lam1, lambda2=lam2)


def _random_kernel_problem(rng, n, dim=4):
    X = rng.standard_normal((n, dim))
    labels = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    kernel = "rbf" if rng.random() < 0.5 else "linear"
    gamma = float(rng.uniform(0.1, 1.0)) if kernel == "rbf" else None
    return svm.build_kernel(X, labels, kernel=kernel, gamma=gamma,
                            cost=float(rng.uniform(0.5, 5.0)))


def _fd_gradient(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (fn(xp) - fn(xm)) / (2.0 * step)
    return g


def _grad_close(analytic, numeric, tol):
    return bool(np.all(np.abs(analytic - numeric) <= tol * (1.0 + np.abs(analytic))))


def _prop_bound_dominance(rng, trials=200):
    fails = 0
    for _ in range(trials):
        fused = rng.random() < 0.5
        spec = _random_lasso_spec(rng, int(rng.integers(2, 8)), fused=fused)
        mu = rng.standard_normal(spec.dim) * 2.0
        sigma = float(rng.uniform(0.01, 2.0))
        bound = lasso.lasso_bound_eval(spec, lasso.GaussianParams(mu, sigma))[0]
        if bound < lasso.lasso_value(spec, mu) - 1e-10:
            fails += 1
    return trials, fails


def _prop_svm_dominance(rng, trials=200):
    fails = 0
    for _ in range(trials):
        prob = _random_kernel_problem(rng, int(rng.integers(3, 10)))
        beta = rng.standard_normal(prob.size)
        b = float(rng.standard_normal())
        sigma = float(rng.uniform(0.01, 1.0))
        bound = svm.svm_bound_eval(prob, svm.SvmParams(beta, b, sigma))[0]
        hub = svm.huber_eval(prob, svm.HuberSpec(float(rng.uniform(0.01, 2.0))), beta, b)[0]
        primal = svm.svm_primal_value(prob, beta, b)
        if bound < primal - 1e-10 or hub < primal - 1e-10:
            fails += 1
    return trials, fails


def _prop_binary_lower_bound(rng, trials=100):
    fails = 0
    for _ in range(trials):
        qp = gen_binary(int(rng.integers(2, 9)), int(rng.integers(0, 2**32)))
        _, f_star = binary_qp.brute_force_max(qp)
        theta = binary_qp.BernoulliParams(rng.random(qp.dim))
        if binary_qp.binary_bound_eval(qp, theta)[0] > f_star + 1e-10:
            fails += 1
    return trials, fails


def _prop_gradients(rng, trials=30):
    fails = 0
    for _ in range(trials):
        spec = _random_lasso_spec(rng, 4, fused=True)
        mu = rng.standard_normal(4)
        sigma = float(rng.uniform(0.05, 1.0))
        _, grad, _ = lasso.lasso_bound_eval(spec, lasso.GaussianParams(mu, sigma))
        num = _fd_gradient(lambda m: lasso.lasso_bound_eval(spec, lasso.GaussianParams(m, sigma))[0], mu)
        if not _grad_close(grad, num, 1e-6):
            fails += 1

        prob = _random_kernel_problem(rng, 5)
        x = rng.standard_normal(prob.size + 1)
        handle = svm.vo_problem(prob)
        _, grad = handle.bound(x, sigma)
        num = _fd_gradient(lambda p: handle.bound(p, sigma)[0], x)
        if not _grad_close(grad, num, 1e-6):
            fails += 1

        qp = gen_binary(5, int(rng.integers(0, 2**32)))
        theta = rng.random(5)
        _, grad = binary_qp.binary_bound_eval(qp, binary_qp.BernoulliParams(theta))
        num = _fd_gradient(lambda t: binary_qp.binary_bound_eval(
            qp, binary_qp.BernoulliParams(np.clip(t, 0.0, 1.0)))[0], theta, h=1e-4)
        if not _grad_close(grad, num, 1e-8):
            fails += 1
    return 3 * trials, fails


def _prop_gap_certificates(rng, trials=100):
    fails = 0
    for _ in range(trials):
        spec = _random_lasso_spec(rng, int(rng.integers(2, 8)))
        sigma = float(rng.uniform(0.01, 1.0))
        mu = rng.standard_normal(spec.dim) * 2.0
        gap = lasso.lasso_gap_max(spec, sigma)
        diff = lasso.lasso_bound_eval(spec, lasso.GaussianParams(mu, sigma))[0] \
            - lasso.lasso_value(spec, mu)
        if diff > gap + 1e-10:
            fails += 1
        delta = float(rng.uniform(0.01, 10.0))
        sigma_star = lasso.sigma_for_tolerance(spec, delta)
        if abs(lasso.lasso_gap_max(spec, sigma_star) - delta) > 1e-10 * delta:
            fails += 1

        prob = _random_kernel_problem(rng, int(rng.integers(3, 8)))
        _, gap_at, sigma_star = svm.svm_gap_and_sigma(prob, delta)
        if abs(gap_at(sigma_star) - delta) > 1e-10 * delta:
            fails += 1
        beta = rng.standard_normal(prob.size)
        b = float(rng.standard_normal())
        sigma = float(rng.uniform(0.01, 1.0))
        diff = svm.svm_bound_eval(prob, svm.SvmParams(beta, b, sigma))[0] \
            - svm.svm_primal_value(prob, beta, b)
        if diff > gap_at(sigma) + 1e-10:
            fails += 1
    return 4 * trials, fails


def _prop_convexity(rng, trials=100):
    fails = 0
    for _ in range(trials):
        spec = _random_lasso_spec(rng, 5, fused=True)
        sigma = float(rng.uniform(0.05, 1.0))
        m1 = rng.standard_normal(5) * 3.0
        m2 = rng.standard_normal(5) * 3.0
        e = lambda m: lasso.lasso_bound_eval(spec, lasso.GaussianParams(m, sigma))[0]
        if e(0.5 * (m1 + m2)) > 0.5 * (e(m1) + e(m2)) + 1e-10:
            fails += 1

        prob = _random_kernel_problem(rng, 5)
        handle = svm.vo_problem(prob) if rng.random() < 0.5 else svm.huber_problem(prob)
        x1 = rng.standard_normal(prob.size + 1)
        x2 = rng.standard_normal(prob.size + 1)
        width = float(rng.uniform(0.05, 1.0))
        f = lambda x: handle.bound(x, width)[0]
        if f(0.5 * (x1 + x2)) > 0.5 * (f(x1) + f(x2)) + 1e-10:
            fails += 1
    return 2 * trials, fails


def _prop_vertex_exactness(rng, trials=20):
    fails = 0
    checks = 0
    for _ in range(trials):
        d = int(rng.integers(2, 7))
        qp = gen_binary(d, int(rng.integers(0, 2**32)))
        for k in range(1 << d):
            x = np.array([(k >> (d - 1 - i)) & 1 for i in range(d)], dtype=float)
            checks += 1
            val = binary_qp.binary_bound_eval(qp, binary_qp.BernoulliParams(x))[0]
            if abs(val - qp.value(x)) > 1e-9 * (1.0 + abs(val)):
                fails += 1
    return checks, fails


def run_props(seed: int = 0) -> list[PropertyResult]:
    """Run the invariant battery; each entry reports (checks, failures)."""
    suites = [
        ("lasso-bound-dominance", _prop_bound_dominance),
        ("svm-huber-dominance", _prop_svm_dominance),
        ("binary-lower-bound", _prop_binary_lower_bound),
        ("gradient-fidelity", _prop_gradients),
        ("gap-certificates", _prop_gap_certificates),
        ("convexity-midpoint", _prop_convexity),
        ("binary-vertex-exactness", _prop_vertex_exactness),
    ]
    results = []
    for idx, (name, fn) in enumerate(suites):
        checks, fails = fn(rng_from((seed, idx)))
        results.append(PropertyResult(name=name, checks=checks, failures=fails))
    return results
