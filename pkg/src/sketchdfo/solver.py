"""Trust-region DFO driver for nonlinear least squares with optional sketching.

Each iteration draws a fresh sketch S_k (unless sketching is off), builds the
linear residual model from the interpolation set, minimises the resulting
Gauss-Newton quadratic inside the trust region and accepts or rejects the
step from the ratio of true objective decrease to model decrease.
"""

from dataclasses import dataclass, field, replace
import math
from typing import Optional

import numpy as np

from .instrument import OpCounts, TaskTimers
from .interp_model import (
    KAPPA_GEOM,
    EvaluationError,
    GeometryError,
    InterpolationSet,
    assemble_system,
    build_model,
    init_set,
    solve_full_jacobian,
    solve_sketched_jacobian,
    update_set,
)
from .sketch import SketchConfig, make_sketch
from .trs import solve_trs

STATUSES = ("budget_exhausted", "time_exhausted", "radius_converged", "criticality", "eval_failure")
MAX_CONSECUTIVE_FAILURES = 10


@dataclass(frozen=True)
class SolverConfig:
    """Algorithm parameters.

    ``delta0=None`` resolves to 0.1 * max(||x0||_inf, 1) and
    ``max_evals=None`` to 100 (d + 1) once the problem is known.
    ``trs_tol`` overrides the default CG stopping tolerance of the
    subproblem solver. After a rejected step, interpolation points farther
    than ``far_factor * delta`` from the iterate are treated as the likely
    cause: the radius is kept and one of them is pulled in.
    """

    delta0: Optional[float] = None
    delta_max: float = 1e10
    delta_min: float = 1e-8
    eta1: float = 0.1
    eta2: float = 0.7
    gamma_dec: float = 0.5
    gamma_inc: float = 2.0
    max_evals: Optional[int] = None
    max_time: float = math.inf
    sketch: SketchConfig = field(default_factory=SketchConfig)
    seed: int = 0
    trs_tol: Optional[float] = None
    kappa_geom: float = KAPPA_GEOM
    far_factor: float = 10.0

    def resolved(self, problem):
        delta0 = self.delta0
        if delta0 is None:
            delta0 = 0.1 * max(float(np.max(np.abs(problem.x0))), 1.0)
        max_evals = self.max_evals
        if max_evals is None:
            max_evals = 100 * (problem.d + 1)
        cfg = replace(self, delta0=float(delta0), max_evals=int(max_evals))
        cfg.validate()
        return cfg

    def validate(self):
        if not 0 < self.delta_min < self.delta0 <= self.delta_max:
            raise ValueError(
                "need 0 < delta_min < delta0 <= delta_max, got "
                f"{self.delta_min}, {self.delta0}, {self.delta_max}"
            )
        if not 0 < self.eta1 < self.eta2 < 1:
            raise ValueError(f"need 0 < eta1 < eta2 < 1, got {self.eta1}, {self.eta2}")
        if not 0 < self.gamma_dec < 1 < self.gamma_inc:
            raise ValueError(f"need 0 < gamma_dec < 1 < gamma_inc, got {self.gamma_dec}, {self.gamma_inc}")
        if self.max_evals is not None and self.max_evals < 1:
            raise ValueError("max_evals must be positive")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.far_factor > 1:
            raise ValueError("far_factor must exceed 1")


@dataclass
class IterationRecord:
    k: int
    n_evals: int
    wall_time: float
    f_best: float
    delta: float
    rho: float
    step_norm: float
    task_times: dict
    accepted: bool = False


@dataclass
class SolveResult:
    x_final: np.ndarray
    f_final: float
    status: str
    trace: list
    n_evals: int = 0
    timings: dict = field(default_factory=dict)
    counts: OpCounts = field(default_factory=OpCounts)


@dataclass(eq=False)
class SolverState:
    problem: object
    config: SolverConfig
    rng: np.random.Generator
    timers: TaskTimers
    counts: OpCounts
    iset: InterpolationSet = None
    delta: float = 0.0
    k: int = 0
    n_evals: int = 0
    n_iter_evals: int = 0
    n_geometry_evals: int = 0
    consecutive_failures: int = 0
    x_best: np.ndarray = None
    f_best: float = math.inf
    status: Optional[str] = None
    trace: list = field(default_factory=list)

    @property
    def x(self):
        return self.iset.base_point


def compute_rho(f_old, f_new, predicted_decrease):
    """Actual over predicted decrease; None when the prediction is negligible."""
    if predicted_decrease <= 1e-15 * max(1.0, abs(f_old)):
        return None
    return (f_old - f_new) / predicted_decrease


def update_radius(delta, rho, config):
    if rho is not None and rho >= config.eta2:
        return min(config.gamma_inc * delta, config.delta_max)
    if rho is not None and rho >= config.eta1:
        return delta
    return config.gamma_dec * delta


def _evaluate(state, x):
    """One counted residual evaluation; tracks the best point seen."""
    with state.timers.task("eval"):
        r = np.asarray(state.problem.residual(x), dtype=float)
    state.n_evals += 1
    if np.all(np.isfinite(r)):
        f = 0.5 * float(r @ r)
        if f < state.f_best:
            state.f_best = f
            state.x_best = np.array(x, dtype=float)
    return r


def _record(state, rho=None, step_norm=0.0, accepted=False):
    state.trace.append(
        IterationRecord(
            k=state.k,
            n_evals=state.n_evals,
            wall_time=state.timers.elapsed(),
            f_best=state.f_best,
            delta=state.delta,
            rho=math.nan if rho is None else float(rho),
            step_norm=float(step_norm),
            task_times=state.timers.snapshot(),
            accepted=accepted,
        )
    )


def _new_state(problem, config):
    config = (config or SolverConfig()).resolved(problem)
    state = SolverState(
        problem=problem,
        config=config,
        rng=np.random.default_rng(config.seed),
        timers=TaskTimers(),
        counts=OpCounts(),
    )
    state.delta = config.delta0
    return state


def _build_initial_set(state):
    x0 = np.asarray(state.problem.x0, dtype=float)
    state.iset = init_set(state.problem, x0, state.config.delta0, lambda x: _evaluate(state, x))
    _record(state)


def init(problem, config=None):
    """Resolve the configuration and build the initial interpolation set.

    Raises EvaluationError if any initial residual is non-finite.
    """
    state = _new_state(problem, config)
    _build_initial_set(state)
    return state


def _reset_geometry(state):
    """Replace all non-base points by base + delta * e_i (d evaluations)."""
    iset = state.iset
    base = iset.base_point.copy()
    with state.timers.task("geometry"):
        for i, t in enumerate(iset.others):
            if state.n_evals >= state.config.max_evals:
                break
            p = base.copy()
            p[i] += state.delta
            r = _evaluate(state, p)
            state.n_geometry_evals += 1
            if np.all(np.isfinite(r)):
                iset.replace(t, p, r)


def _shrink_without_step(state):
    cfg = state.config
    if state.delta <= cfg.delta_min:
        state.status = "criticality"
    else:
        state.delta = cfg.gamma_dec * state.delta


def _revisit(state, t, pred, step_norm):
    """Finish an iteration whose trial point is stored point t; no evaluation."""
    iset = state.iset
    rho = compute_rho(float(iset.base_f), float(iset.fvals[t]), pred)
    accepted = rho is not None and rho >= state.config.eta1
    state.delta = update_radius(state.delta, rho, state.config)
    if accepted:
        iset.base = t
    _record(state, rho=rho, step_norm=step_norm, accepted=accepted)
    return state


def iterate(state):
    """Run one trust-region iteration in place and return the state."""
    cfg = state.config
    iset = state.iset
    timers, counts = state.timers, state.counts
    state.k += 1
    sketching = cfg.sketch.kind != "none"

    if sketching:
        with timers.task("sketch_build"):
            S = make_sketch(cfg.sketch, iset.n, state.rng)
    try:
        system = assemble_system(iset, timers, counts)
    except GeometryError:
        _reset_geometry(state)
        _record(state)
        return state

    if sketching:
        jac, resid = solve_sketched_jacobian(system, S, timers=timers, counts=counts)
        model = build_model(jac, resid, timers=timers, counts=counts)
    else:
        jac = solve_full_jacobian(system, timers, counts)
        model = build_model(jac, iset.base_residual, iset.base_f, timers, counts)

    with timers.task("trs"):
        step, pred = solve_trs(model, state.delta, tol=cfg.trs_tol)
    step_norm = float(np.linalg.norm(step))
    x_k = iset.base_point.copy()
    x_trial = x_k + step
    if step_norm == 0.0:
        _shrink_without_step(state)
        _record(state)
        return state
    stored = np.flatnonzero(np.all(iset.points == x_trial, axis=1))
    if stored.size:
        # the trial point is already in the set: reuse its residual
        return _revisit(state, int(stored[0]), pred, step_norm)

    r_new = _evaluate(state, x_trial)
    state.n_iter_evals += 1
    if not np.all(np.isfinite(r_new)):
        state.consecutive_failures += 1
        state.delta = update_radius(state.delta, None, cfg)
        if state.consecutive_failures >= MAX_CONSECUTIVE_FAILURES:
            state.status = "eval_failure"
        _record(state, rho=-math.inf, step_norm=step_norm)
        return state
    state.consecutive_failures = 0

    f_old = float(iset.base_f)
    f_new = 0.5 * float(r_new @ r_new)
    rho = compute_rho(f_old, f_new, pred)
    accepted = rho is not None and rho >= cfg.eta1
    far = np.max(np.linalg.norm(iset.points - x_k, axis=1))
    if accepted or far <= cfg.far_factor * state.delta:
        state.delta = update_radius(state.delta, rho, cfg)

    evaluator = None
    if state.n_evals < cfg.max_evals:
        evaluator = lambda x: _evaluate(state, x)  # noqa: E731
    try:
        update_set(iset, x_trial, r_new, accepted, state.delta, evaluator,
                   cfg.kappa_geom, cfg.far_factor, timers)
    except EvaluationError:
        # failed geometry point: the evaluation is spent, the set is unchanged
        state.n_geometry_evals += 1
    else:
        if iset.last_improved:
            state.n_geometry_evals += 1
    _record(state, rho=rho, step_norm=step_norm, accepted=accepted)
    return state


def _finish(state):
    trace = state.trace
    x = state.x_best if state.x_best is not None else np.asarray(state.problem.x0, dtype=float)
    return SolveResult(
        x_final=x,
        f_final=state.f_best,
        status=state.status,
        trace=trace,
        n_evals=state.n_evals,
        timings=state.timers.snapshot(),
        counts=state.counts,
    )


def run(problem, config=None):
    """Minimise 0.5 * ||problem.residual(x)||^2 from ``problem.x0``.

    Returns a SolveResult holding the best point seen over all
    evaluations, the termination status and the per-iteration trace.
    """
    state = _new_state(problem, config)
    try:
        _build_initial_set(state)
    except EvaluationError:
        state.status = "eval_failure"
        return _finish(state)
    cfg = state.config
    while state.status is None:
        if state.n_evals >= cfg.max_evals:
            state.status = "budget_exhausted"
        elif state.timers.elapsed() >= cfg.max_time:
            state.status = "time_exhausted"
        elif state.delta < cfg.delta_min:
            state.status = "radius_converged"
        else:
            iterate(state)
    return _finish(state)
