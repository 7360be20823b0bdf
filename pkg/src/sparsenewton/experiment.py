"""Experiment harness: runs solver x noise-level sweeps and writes results.

Outputs in the chosen directory (schemas frozen, first line ``# schema=1``):

* ``summary.csv`` with header solver,noise_rel,n_star,stop_reason,wall_s,residual,rel_error
* ``trace_<solver>_<noise>_<rep>.csv`` with header iter,residual,functional,rel_error,wall_s
* ``recon_<solver>_<noise>_<rep>.pgm`` reconstructions (plain PGM)

With ``timing = wall`` (the default) the wall_s columns hold monotonic-clock
seconds around the solver loop; those values are real measurements and differ
between runs.  ``timing = off`` records zeros instead, which makes repeated
runs with the same seed byte-identical.
"""

from __future__ import annotations

import concurrent.futures
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import SOLVER_NAMES, ExperimentConfig
from .functionals import ProblemData, back_transform
from .solvers import (
    ArmijoRule,
    SolverConfig,
    resolve_epsilon,
    run_fista,
    run_gradient_descent,
    run_ista,
    run_levenberg_marquardt,
    run_newton,
    run_transformed_ista,
)
from .transform import TransformSpec
from .tomo import NoiseModel, ProblemInstance, add_noise, build_parallel_tomo, shepp_logan, write_pgm

SCHEMA_LINE = "# schema=1"
SUMMARY_HEADER = "solver,noise_rel,n_star,stop_reason,wall_s,residual,rel_error"
TRACE_HEADER = "iter,residual,functional,rel_error,wall_s"

# Default regularization weight, as a fraction of the noise bound delta.
# Calibrated at desk scale so every method reaches the discrepancy stop;
# when delta == 0 the weight falls back to a fraction of ||y_delta||.
ALPHA_COEFF = 0.01

_COMMON_DEFAULTS = dict(alpha="auto", tau=1.1, omega="auto", beta=3.0,
                        max_iter=1000, inner_tol=1e-10, grad_tol=0.0,
                        warm_start=0, lm_alpha0="auto", lm_decay=0.6,
                        lm_floor=1e-14, armijo_t0=1.0, armijo_shrink=0.5,
                        armijo_slope=1e-4, variant="nesterov-t")

# Iterating on the substituted variable from exactly zero cannot move (the
# Jacobian diagonal vanishes there), so those methods warm start from a few
# FISTA sketch iterations by default.
_SOLVER_DEFAULTS = {
    "ista": dict(max_iter=50000),
    "fista": dict(max_iter=20000),
    "transformed-ista": dict(max_iter=20000, warm_start=5),
    "gd": dict(max_iter=2000, warm_start=5, epsilon=0.0),
    "lm": dict(max_iter=50, warm_start=5, epsilon=0.0),
    "newton": dict(max_iter=50, warm_start=5, epsilon="auto"),
}

_RUNNERS = {
    "ista": run_ista,
    "fista": run_fista,
    "gd": run_gradient_descent,
    "lm": run_levenberg_marquardt,
    "newton": run_newton,
    "transformed-ista": run_transformed_ista,
}
assert set(_RUNNERS) == set(SOLVER_NAMES)


def resolve_alpha(value, delta: float, y_delta) -> float:
    """"auto" regularization weight: ALPHA_COEFF * delta, or a small multiple
    of ||y_delta|| in the noise-free case."""
    if value != "auto":
        return float(value)
    if delta > 0.0:
        return ALPHA_COEFF * delta
    return 1e-8 * float(np.linalg.norm(y_delta))


def make_solver_config(name: str, overrides: dict, delta: float, y_delta):
    """SolverConfig for one sweep cell; returns (config, fista_variant)."""
    if name not in _RUNNERS:
        raise ValueError(f"unknown solver '{name}'; available: {', '.join(SOLVER_NAMES)}")
    opts = dict(_COMMON_DEFAULTS)
    opts.update(_SOLVER_DEFAULTS.get(name, {}))
    opts.update(overrides)
    variant = opts.pop("variant")
    armijo = ArmijoRule(opts.pop("armijo_t0"), opts.pop("armijo_shrink"),
                        opts.pop("armijo_slope"))
    alpha = resolve_alpha(opts.pop("alpha"), delta, y_delta)
    epsilon = opts.pop("epsilon", None)
    cfg = SolverConfig(alpha=alpha, epsilon=epsilon, armijo=armijo, **opts)
    return cfg, variant


def run_solver(name: str, p: ProblemData, cfg: SolverConfig, delta: float,
               variant: str = "nesterov-t", **kwargs):
    runner = _RUNNERS[name]
    if name == "fista":
        return runner(p, cfg, delta, variant=variant, **kwargs)
    return runner(p, cfg, delta, **kwargs)


@dataclass
class CellResult:
    solver: str
    noise_rel: float
    rep: int
    x_image: Optional[np.ndarray]
    trace: Optional[object]
    error: Optional[str]

    def summary_row(self) -> str:
        if self.error is not None:
            return (f"{self.solver},{self.noise_rel:g},0,error,{0.0:.17g},nan,nan")
        t = self.trace
        return (f"{self.solver},{self.noise_rel:g},{t.n_star},{t.stop_reason},"
                f"{t.wall_times[-1]:.17g},{t.residuals[-1]:.17g},{t.rel_errors[-1]:.17g}")


def _run_cell(name, overrides, instance: ProblemInstance, noise_rel, rep, timing):
    timer = time.perf_counter if timing == "wall" else (lambda: 0.0)
    try:
        cfg, variant = make_solver_config(name, overrides, instance.delta, instance.y_delta)
        p = ProblemData(instance.A, instance.y_delta, cfg.alpha)
        x, trace = run_solver(name, p, cfg, instance.delta, variant=variant,
                              x_true=instance.x_true, timer=timer)
    except Exception as exc:  # errored runs still get a summary row
        return CellResult(name, noise_rel, rep, None, None, f"{type(exc).__name__}: {exc}")
    if name in ("ista", "fista"):
        image = x
    else:
        # map the substituted-variable result back with the epsilon the runner used
        default = "auto" if name == "newton" else 0.0
        eps = resolve_epsilon(cfg, instance.delta, instance.y_delta, default)
        image = back_transform(x, TransformSpec(eps))
    return CellResult(name, noise_rel, rep, image, trace, None)


def noise_seed_for(base_seed: int, level_index: int, rep: int) -> int:
    """Deterministic per-cell noise seed."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(level_index, rep))
    return int(ss.generate_state(1)[0])


def build_instances(config: ExperimentConfig):
    """One ProblemInstance per (noise level, repetition); matrix built once."""
    A = build_parallel_tomo(config.geometry)
    x_true = shepp_logan(config.geometry.m)
    y = A.matvec(x_true)
    instances = {}
    for li, level in enumerate(config.noise_levels):
        for rep in range(config.repetitions):
            seed = noise_seed_for(config.seed, li, rep)
            y_delta, delta = add_noise(y, NoiseModel(level, seed))
            instances[(li, rep)] = ProblemInstance(config.geometry, A, x_true, y, y_delta, delta)
    return instances


def write_trace_csv(path, trace):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(SCHEMA_LINE + "\n" + TRACE_HEADER + "\n")
        for i in range(len(trace.iterations)):
            fh.write(f"{trace.iterations[i]},{trace.residuals[i]:.17g},"
                     f"{trace.functionals[i]:.17g},{trace.rel_errors[i]:.17g},"
                     f"{trace.wall_times[i]:.17g}\n")


def run_experiment(config: ExperimentConfig, threads: int = 1):
    """Run the full sweep; writes summary, traces and reconstructions.

    Returns the list of summary rows (strings, without the header).
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    instances = build_instances(config)

    tasks = []
    for li, level in enumerate(config.noise_levels):
        for rep in range(config.repetitions):
            for name in config.solvers:
                overrides = config.solver_overrides.get(name, {})
                tasks.append((name, overrides, instances[(li, rep)], level, rep))

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: _run_cell(*t, config.timing), tasks))
    else:
        results = [_run_cell(*t, config.timing) for t in tasks]

    rows = []
    for result in results:
        rows.append(result.summary_row())
        if result.error is None:
            stem = f"{result.solver}_{result.noise_rel:g}_{result.rep}"
            write_trace_csv(out / f"trace_{stem}.csv", result.trace)
            write_pgm(out / f"recon_{stem}.pgm", result.x_image, config.geometry.m)

    with open(out / "summary.csv", "w", encoding="ascii") as fh:
        fh.write(SCHEMA_LINE + "\n" + SUMMARY_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
    return rows
