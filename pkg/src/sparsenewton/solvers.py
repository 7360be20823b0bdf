"""Iterative solvers for the l1-Tikhonov problem and its smooth substitution.

ISTA and FISTA iterate on the original variable; gradient descent,
Levenberg-Marquardt and Newton iterate on the substituted variable x~ and
their reconstructions are read off through back_transform.

Conventions shared by all runners:

* the discrepancy principle ||residual|| <= tau * delta is checked at the
  initial point and after every step (boundary inclusive);
* stop reasons are "discrepancy", "max_iter" or "stagnation" (the latter also
  covers gradient-tolerance exits and failed line searches);
* traces carry one row per iterate, starting with the initial point.

Note on constants: the ISTA/FISTA update is
x_{k+1} = S_{alpha omega}(x_k - omega A^T(A x_k - y)), whose fixed points
minimize ||A x - y||^2 + 2 alpha ||x||_1.  The gradient step omega absorbs
the factor 2 of d/dx ||A x - y||^2; the shrinkage weight is alpha * omega as
written.  When comparing against the substituted functional at weight a, run
ISTA with alpha = a / 2.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .functionals import ProblemData, back_transform, eval_J, eval_T, grad_J, hessian_operator
from .linalg import CurvatureError, as_vector, cg_solve
from .transform import TransformSpec, apply_N_inverse, gradient_diag

STAGNATION_RTOL = 1e-14
STAGNATION_WINDOW = 10
MAX_BACKTRACKS = 60

STOP_DISCREPANCY = "discrepancy"
STOP_MAX_ITER = "max_iter"
STOP_STAGNATION = "stagnation"


class DivergenceError(RuntimeError):
    pass


@dataclass
class ArmijoRule:
    """Backtracking parameters: accept t = t_init * shrink^m."""

    t_init: float = 1.0
    shrink: float = 0.5
    slope: float = 1e-4

    def __post_init__(self):
        if self.t_init <= 0.0:
            raise ValueError("armijo t_init must be > 0")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("armijo shrink must lie in (0, 1)")
        if not 0.0 < self.slope < 1.0:
            raise ValueError("armijo slope must lie in (0, 1)")


@dataclass
class SolverConfig:
    """Knobs shared by all runners; unknown to a given method = ignored by it.

    alpha overrides the ProblemData weight when set.  epsilon semantics:
    None picks the per-method default (0 for gradient descent and LM, the
    "auto" rule for Newton); "auto" resolves to 1e-4 * delta, falling back to
    1e-8 * ||y_delta|| when delta == 0.  omega "auto" is 0.9 / ||A||_2^2 with
    the norm estimated by 100 power iterations.  lm_alpha0 None resolves to
    delta, giving the shift schedule alpha_n = delta * lm_decay^n.
    """

    alpha: Optional[float] = None
    epsilon: object = None
    tau: float = 1.1
    omega: object = "auto"
    beta: float = 3.0
    armijo: ArmijoRule = field(default_factory=ArmijoRule)
    lm_alpha0: object = None
    lm_decay: float = 0.6
    lm_floor: float = 1e-14
    max_iter: int = 1000
    inner_tol: float = 1e-10
    grad_tol: float = 0.0
    x0: Optional[np.ndarray] = None
    warm_start: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.alpha is not None and self.alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        if self.tau <= 1.0:
            raise ValueError("tau must exceed 1")
        if self.beta < 3.0:
            raise ValueError("beta must be >= 3")
        if not 0.0 < self.lm_decay < 1.0:
            raise ValueError("lm_decay must lie in (0, 1)")
        if self.lm_floor <= 0.0:
            raise ValueError("lm_floor must be > 0")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.inner_tol < 0.0 or self.grad_tol < 0.0:
            raise ValueError("tolerances must be >= 0")
        if self.warm_start < 0:
            raise ValueError("warm_start must be >= 0")
        if self.omega != "auto" and (not np.isreal(self.omega) or self.omega <= 0.0):
            raise ValueError('omega must be "auto" or a positive real')


@dataclass
class IterationTrace:
    """Per-iterate history plus the stopping verdict."""

    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    functionals: list = field(default_factory=list)
    rel_errors: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    stop_reason: str = ""
    n_star: int = 0


def soft_threshold(x, threshold: float) -> np.ndarray:
    """Componentwise shrinkage sign(x) max(|x| - threshold, 0)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def check_discrepancy(residual_norm: float, tau: float, delta: float) -> bool:
    """True when ||residual|| <= tau * delta (boundary inclusive)."""
    return residual_norm <= tau * delta


class _Stagnation:
    """Counts consecutive iterations with relative functional change < rtol."""

    def __init__(self):
        self.prev = None
        self.count = 0

    def update(self, f: float) -> bool:
        if self.prev is not None and abs(self.prev - f) < STAGNATION_RTOL * max(1.0, abs(self.prev)):
            self.count += 1
        else:
            self.count = 0
        self.prev = f
        return self.count >= STAGNATION_WINDOW


class _Recorder:
    """Accumulates trace rows; wall time is cumulative from construction."""

    def __init__(self, timer, image_of, x_true, callback):
        self.trace = IterationTrace()
        self.timer = timer
        self.image_of = image_of
        self.x_true = x_true
        self.x_true_norm = float(np.linalg.norm(x_true)) if x_true is not None else 0.0
        self.callback = callback
        self.t0 = timer()

    def record(self, n: int, x: np.ndarray, residual: float, functional: float):
        if self.x_true is None:
            rel = float("nan")
        else:
            err = np.linalg.norm(self.image_of(x) - self.x_true)
            rel = float(err / self.x_true_norm) if self.x_true_norm > 0 else float(err)
        t = self.trace
        t.iterations.append(n)
        t.residuals.append(residual)
        t.functionals.append(functional)
        t.rel_errors.append(rel)
        t.wall_times.append(self.timer() - self.t0)
        if self.callback is not None:
            self.callback(n, x)

    def finish(self, reason: str):
        self.trace.stop_reason = reason
        self.trace.n_star = self.trace.iterations[-1]
        return self.trace


def _effective_problem(p: ProblemData, cfg: SolverConfig) -> ProblemData:
    if cfg.alpha is None or cfg.alpha == p.alpha:
        return p
    return ProblemData(p.A, p.y_delta, cfg.alpha)


def _resolve_omega(A, cfg: SolverConfig) -> float:
    if cfg.omega == "auto":
        sigma = A.norm2_estimate()
        return 0.9 / max(sigma * sigma, np.finfo(float).tiny)
    return float(cfg.omega)


def resolve_epsilon(cfg: SolverConfig, delta: float, y_delta, default) -> float:
    eps = cfg.epsilon
    if eps is None:
        eps = default
    if eps == "auto":
        if delta > 0.0:
            return 1e-4 * delta
        return 1e-8 * float(np.linalg.norm(y_delta))
    eps = float(eps)
    if eps < 0.0:
        raise ValueError("epsilon must be >= 0")
    return eps


def _initial_point(p: ProblemData, cfg: SolverConfig, delta: float,
                   transformed: bool) -> np.ndarray:
    """x0 from the config, else warm_start FISTA iterations, else zeros."""
    if cfg.x0 is not None:
        x0 = as_vector(cfg.x0).copy()
        if x0.size != p.A.n_cols:
            raise ValueError(f"x0 has length {x0.size} but A has {p.A.n_cols} columns")
        return x0
    if cfg.warm_start > 0:
        warm_cfg = replace(cfg, warm_start=0, max_iter=cfg.warm_start, x0=None)
        xw, _ = run_fista(p, warm_cfg, delta)
        return apply_N_inverse(xw) if transformed else xw
    return np.zeros(p.A.n_cols)


def _check_finite(x: np.ndarray):
    if not np.all(np.isfinite(x)):
        raise DivergenceError("divergence; reduce omega")


def run_ista(p: ProblemData, cfg: SolverConfig, delta: float, *,
             x_true=None, callback=None, timer=time.perf_counter):
    """Iterative soft thresholding on the original variable."""
    p = _effective_problem(p, cfg)
    A, y = p.A, p.y_delta
    omega = _resolve_omega(A, cfg)
    threshold = p.alpha * omega
    x = _initial_point(p, cfg, delta, transformed=False)
    rec = _Recorder(timer, lambda v: v, x_true, callback)
    stag = _Stagnation()
    Ax = A.matvec(x)
    residual = float(np.linalg.norm(Ax - y))
    rec.record(0, x, residual, eval_T(p, x))
    reason = STOP_MAX_ITER
    if check_discrepancy(residual, cfg.tau, delta):
        return x, rec.finish(STOP_DISCREPANCY)
    stag.update(rec.trace.functionals[-1])
    for n in range(1, cfg.max_iter + 1):
        x = soft_threshold(x - omega * A.transpose_matvec(Ax - y), threshold)
        _check_finite(x)
        Ax = A.matvec(x)
        residual = float(np.linalg.norm(Ax - y))
        rec.record(n, x, residual, eval_T(p, x))
        if check_discrepancy(residual, cfg.tau, delta):
            reason = STOP_DISCREPANCY
            break
        if stag.update(rec.trace.functionals[-1]):
            reason = STOP_STAGNATION
            break
    return x, rec.finish(reason)


def run_fista(p: ProblemData, cfg: SolverConfig, delta: float, *,
              variant: str = "nesterov-t", x_true=None, callback=None,
              timer=time.perf_counter):
    """Accelerated soft thresholding.

    variant "nesterov-t" uses the t-sequence t_k = (1 + sqrt(1 + 4 t_{k-1}^2))/2
    with weight (t_{k-1} - 1)/t_k; variant "beta" uses (k - 1)/(k + beta - 1).
    """
    if variant not in ("nesterov-t", "beta"):
        raise ValueError(f'unknown FISTA variant "{variant}"')
    p = _effective_problem(p, cfg)
    A, y = p.A, p.y_delta
    omega = _resolve_omega(A, cfg)
    threshold = p.alpha * omega
    x = _initial_point(p, cfg, delta, transformed=False)
    rec = _Recorder(timer, lambda v: v, x_true, callback)
    stag = _Stagnation()
    Ax = A.matvec(x)
    residual = float(np.linalg.norm(Ax - y))
    rec.record(0, x, residual, eval_T(p, x))
    reason = STOP_MAX_ITER
    if check_discrepancy(residual, cfg.tau, delta):
        return x, rec.finish(STOP_DISCREPANCY)
    stag.update(rec.trace.functionals[-1])
    x_prev, Ax_prev = x, Ax
    t_prev = 1.0
    for k in range(1, cfg.max_iter + 1):
        if variant == "nesterov-t":
            t_k = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev))
            momentum = (t_prev - 1.0) / t_k
            t_prev = t_k
        else:
            momentum = (k - 1.0) / (k + cfg.beta - 1.0)
        z = x + momentum * (x - x_prev)
        Az = Ax + momentum * (Ax - Ax_prev)  # exact by linearity
        x_next = soft_threshold(z - omega * A.transpose_matvec(Az - y), threshold)
        _check_finite(x_next)
        x_prev, Ax_prev = x, Ax
        x, Ax = x_next, A.matvec(x_next)
        residual = float(np.linalg.norm(Ax - y))
        rec.record(k, x, residual, eval_T(p, x))
        if check_discrepancy(residual, cfg.tau, delta):
            reason = STOP_DISCREPANCY
            break
        if stag.update(rec.trace.functionals[-1]):
            reason = STOP_STAGNATION
            break
    return x, rec.finish(reason)


def run_transformed_ista(p: ProblemData, cfg: SolverConfig, delta: float, *,
                         x_true=None, callback=None, timer=time.perf_counter):
    """Soft thresholding applied in the substituted variable.

    Update x~ <- S_{alpha omega}(x~ - omega 2 G(x~) A^T(A N(x~) - y)).  Kept
    as an experimental variant; no convergence guarantee is claimed, and it is
    excluded from the acceptance comparisons.
    """
    p = _effective_problem(p, cfg)
    A, y = p.A, p.y_delta
    spec = TransformSpec(0.0)
    omega = _resolve_omega(A, cfg)
    threshold = p.alpha * omega
    x = _initial_point(p, cfg, delta, transformed=True)
    rec = _Recorder(timer, lambda v: back_transform(v, spec), x_true, callback)
    stag = _Stagnation()
    reason = STOP_MAX_ITER
    for n in range(cfg.max_iter + 1):
        Fx = A.matvec(back_transform(x, spec))
        residual = float(np.linalg.norm(Fx - y))
        rec.record(n, x, residual, eval_J(p, x, spec))
        if check_discrepancy(residual, cfg.tau, delta):
            reason = STOP_DISCREPANCY
            break
        if n == cfg.max_iter:
            break
        if stag.update(rec.trace.functionals[-1]):
            reason = STOP_STAGNATION
            break
        step = gradient_diag(spec, x).apply(A.transpose_matvec(Fx - y))
        x = soft_threshold(x - omega * 2.0 * step, threshold)
        _check_finite(x)
    return x, rec.finish(reason)


def run_gradient_descent(p: ProblemData, cfg: SolverConfig, delta: float, *,
                         x_true=None, callback=None, timer=time.perf_counter):
    """Armijo-damped steepest descent on the substituted functional.

    Runs on J when epsilon == 0 (the default) and on J_eps otherwise.
    """
    p = _effective_problem(p, cfg)
    eps = resolve_epsilon(cfg, delta, p.y_delta, default=0.0)
    spec = TransformSpec(eps)
    x = _initial_point(p, cfg, delta, transformed=True)
    rec = _Recorder(timer, lambda v: back_transform(v, spec), x_true, callback)
    stag = _Stagnation()

    def residual_of(v):
        return float(np.linalg.norm(p.A.matvec(back_transform(v, spec)) - p.y_delta))

    J = lambda v: eval_J(p, v, spec)
    fx = J(x)
    residual = residual_of(x)
    rec.record(0, x, residual, fx)
    reason = STOP_MAX_ITER
    if check_discrepancy(residual, cfg.tau, delta):
        return x, rec.finish(STOP_DISCREPANCY)
    stag.update(fx)
    for n in range(1, cfg.max_iter + 1):
        g = grad_J(p, x, spec)
        g_sq = float(g @ g)
        if np.sqrt(g_sq) <= cfg.grad_tol:
            reason = STOP_STAGNATION
            break
        t = cfg.armijo.t_init
        accepted = None
        for _ in range(MAX_BACKTRACKS + 1):
            candidate = x - t * g
            f_cand = J(candidate)
            if f_cand <= fx - cfg.armijo.slope * t * g_sq:
                accepted = (candidate, f_cand)
                break
            t *= cfg.armijo.shrink
        if accepted is None:
            reason = STOP_STAGNATION
            break
        x, fx = accepted
        residual = residual_of(x)
        rec.record(n, x, residual, fx)
        if check_discrepancy(residual, cfg.tau, delta):
            reason = STOP_DISCREPANCY
            break
        if stag.update(fx):
            reason = STOP_STAGNATION
            break
    return x, rec.finish(reason)


def _solve_normal_step(A, g_diag, rhs, shift, inner_tol):
    """CG on (G A^T A G + shift I) s = rhs; returns (s, converged)."""

    def op(s):
        return g_diag * A.transpose_matvec(A.matvec(g_diag * s)) + shift * s

    try:
        result = cg_solve(op, rhs, tol=inner_tol)
    except CurvatureError:
        return None, False
    return result.x, result.converged


def run_levenberg_marquardt(p: ProblemData, cfg: SolverConfig, delta: float, *,
                            x_true=None, callback=None, timer=time.perf_counter):
    """Levenberg-Marquardt on F(x~) = y with the schedule alpha_n = alpha_0 q^n.

    Each step solves (G A^T A G + alpha_n I) s = G A^T (y - F(x~)) by CG.  A
    failed inner solve is retried once with the shift doubled; a second
    failure stops with reason "stagnation".  alpha_0 defaults to delta and the
    shift never drops below lm_floor.
    """
    p = _effective_problem(p, cfg)
    A, y = p.A, p.y_delta
    eps = resolve_epsilon(cfg, delta, y, default=0.0)
    spec = TransformSpec(eps)
    alpha0 = cfg.lm_alpha0
    if alpha0 is None or alpha0 == "auto":
        alpha0 = delta
    alpha0 = float(alpha0)
    if alpha0 < 0.0:
        raise ValueError("lm_alpha0 must be >= 0")
    x = _initial_point(p, cfg, delta, transformed=True)
    rec = _Recorder(timer, lambda v: back_transform(v, spec), x_true, callback)
    stag = _Stagnation()
    Fx = A.matvec(back_transform(x, spec))
    residual = float(np.linalg.norm(Fx - y))
    rec.record(0, x, residual, eval_J(p, x, spec))
    reason = STOP_MAX_ITER
    if check_discrepancy(residual, cfg.tau, delta):
        return x, rec.finish(STOP_DISCREPANCY)
    stag.update(rec.trace.functionals[-1])
    for n in range(cfg.max_iter):
        shift = max(alpha0 * cfg.lm_decay ** n, cfg.lm_floor)
        g_diag = gradient_diag(spec, x).diagonal
        rhs = g_diag * A.transpose_matvec(y - Fx)
        s, ok = _solve_normal_step(A, g_diag, rhs, shift, cfg.inner_tol)
        if not ok:
            s, ok = _solve_normal_step(A, g_diag, rhs, 2.0 * shift, cfg.inner_tol)
        if not ok:
            reason = STOP_STAGNATION
            break
        x = x + s
        _check_finite(x)
        Fx = A.matvec(back_transform(x, spec))
        residual = float(np.linalg.norm(Fx - y))
        rec.record(n + 1, x, residual, eval_J(p, x, spec))
        if check_discrepancy(residual, cfg.tau, delta):
            reason = STOP_DISCREPANCY
            break
        if stag.update(rec.trace.functionals[-1]):
            reason = STOP_STAGNATION
            break
    return x, rec.finish(reason)


def run_newton(p: ProblemData, cfg: SolverConfig, delta: float, *,
               x_true=None, callback=None, timer=time.perf_counter):
    """Damped Newton on J_eps (epsilon > 0 required; "auto" by default).

    The Newton system is solved matrix-free by CG.  On non-positive curvature
    or a failed inner solve the step falls back to shifted systems
    (H + mu I) s = -g with mu doubling from the LM schedule value; persistent
    failure stops with reason "stagnation".  Steps are damped by Armijo
    backtracking with lambda = 1 tried first.
    """
    p = _effective_problem(p, cfg)
    A, y = p.A, p.y_delta
    eps = resolve_epsilon(cfg, delta, y, default="auto")
    if eps <= 0.0:
        raise ValueError("run_newton requires epsilon > 0; use run_gradient_descent for J")
    spec = TransformSpec(eps)
    alpha0 = cfg.lm_alpha0
    if alpha0 is None or alpha0 == "auto":
        alpha0 = delta
    alpha0 = float(alpha0)
    x = _initial_point(p, cfg, delta, transformed=True)
    rec = _Recorder(timer, lambda v: back_transform(v, spec), x_true, callback)
    stag = _Stagnation()
    J = lambda v: eval_J(p, v, spec)

    def residual_of(v):
        return float(np.linalg.norm(A.matvec(back_transform(v, spec)) - y))

    fx = J(x)
    residual = residual_of(x)
    rec.record(0, x, residual, fx)
    reason = STOP_MAX_ITER
    if check_discrepancy(residual, cfg.tau, delta):
        return x, rec.finish(STOP_DISCREPANCY)
    stag.update(fx)
    for n in range(cfg.max_iter):
        g = grad_J(p, x, spec)
        if float(np.linalg.norm(g)) <= cfg.grad_tol:
            reason = STOP_STAGNATION
            break
        H = hessian_operator(p, x, spec)
        s = None
        shift = 0.0
        for _ in range(MAX_BACKTRACKS + 1):
            op = H if shift == 0.0 else (lambda w, mu=shift: H(w) + mu * w)
            try:
                result = cg_solve(op, -g, tol=cfg.inner_tol)
            except CurvatureError:
                result = None
            if result is not None and result.converged and float(g @ result.x) < 0.0:
                s = result.x
                break
            shift = max(alpha0 * cfg.lm_decay ** n, cfg.lm_floor) if shift == 0.0 else 2.0 * shift
        if s is None:
            reason = STOP_STAGNATION
            break
        slope = float(g @ s)
        lam = 1.0
        accepted = None
        for _ in range(MAX_BACKTRACKS + 1):
            candidate = x + lam * s
            f_cand = J(candidate)
            if f_cand <= fx + cfg.armijo.slope * lam * slope:
                accepted = (candidate, f_cand)
                break
            lam *= cfg.armijo.shrink
        if accepted is None:
            reason = STOP_STAGNATION
            break
        x, fx = accepted
        _check_finite(x)
        residual = residual_of(x)
        rec.record(n + 1, x, residual, fx)
        if check_discrepancy(residual, cfg.tau, delta):
            reason = STOP_DISCREPANCY
            break
        if stag.update(fx):
            reason = STOP_STAGNATION
            break
    return x, rec.finish(reason)
