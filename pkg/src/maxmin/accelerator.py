"""Outer acceleration loop with momentum damping.

Each round maps the trust region through the interpolation
Phi(z) = (A x_t + a z) / (A + a), asks the restricted proximal oracle for
(z, w, c) around the mirror point v_t, and damps the update by the
returned multiplier: x <- Phi(z)/c + (1 - 1/c) x, A <- A + a/c.  The run
stops once the weight A passes 40 R^2 log(80 E0 / eps) / eps.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ball_oracle import (
    OracleConfig,
    OracleProfile,
    movement_bound,
    restricted_oracle,
    tau,
)
from .errors import GradientCallbackFailed, InvalidParams, IterationCapExceeded
from .geometry import GeometrySetup


def stopping_threshold(r_bound: float, e0: float, eps: float) -> float:
    """Target weight 40 R^2 log(80 E0 / eps) / eps for the outer loop."""
    if r_bound <= 0.0 or e0 <= 0.0 or eps <= 0.0:
        raise InvalidParams("R, E0 and eps must be positive")
    if eps >= 80.0 * e0:
        raise InvalidParams(f"eps = {eps:g} must be below 80 E0 = {80.0 * e0:g}")
    return 40.0 * r_bound**2 * math.log(80.0 * e0 / eps) / eps


@dataclass
class AccelParams:
    r: float
    r_bound: float  # R with V_{v0}(x*) <= R^2
    e0: float  # initial suboptimality bound
    eps: float
    gamma: float
    profile: OracleProfile
    lip: float  # L_f of the underlying family
    seed: int = 0
    iteration_cap_factor: float = 10.0
    record_trace: bool = False
    # practical-profile knob: stop at this fraction of the worst-case
    # weight threshold (1.0 reproduces the published stopping rule)
    stopping_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < 0.5):
            raise InvalidParams("gamma must lie in (0, 1/2)")
        if not (0.0 < self.r <= self.r_bound):
            raise InvalidParams("need 0 < r <= R")
        if not (0.0 < self.stopping_scale <= 1.0):
            raise InvalidParams("stopping_scale must lie in (0, 1]")


@dataclass
class IterationRecord:
    c: float
    a_weight: float
    oracle_queries: int
    oracle_movement: float
    lam: float
    rounds: int


@dataclass
class SolverReport:
    x: np.ndarray
    f_max_value: float
    outer_iterations: int
    iterations: list[IterationRecord]
    func_evals: int
    grad_evals: int
    mvm_rebuilds: int
    t_eval: float
    t_md: float
    wall_time: float
    seed: int
    profile_name: str
    status: str = "ok"
    error: str = ""
    rho: float = 0.0
    expected_iterations: float = 0.0
    trace: list[dict] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def c_history(self) -> list[float]:
        return [rec.c for rec in self.iterations]

    @property
    def a_history(self) -> list[float]:
        return [rec.a_weight for rec in self.iterations]

    def counters_dict(self) -> dict:
        return {
            "outer_iterations": self.outer_iterations,
            "func_evals": self.func_evals,
            "grad_evals": self.grad_evals,
            "mvm_rebuilds": self.mvm_rebuilds,
            "oracle_queries": [rec.oracle_queries for rec in self.iterations],
            "oracle_movement": [rec.oracle_movement for rec in self.iterations],
            "c_history": self.c_history,
            "a_history": self.a_history,
        }


EstimatorFactory = Callable[[np.ndarray, float, object], object]


def expected_iteration_bound(params: AccelParams) -> float:
    ratio = params.r_bound / (math.sqrt(params.gamma) * params.r)
    return 18.0 * ratio ** (2.0 / 3.0) * math.log(80.0 * params.e0 / params.eps)


def accelerate(
    problem,
    setup: GeometrySetup,
    x0: np.ndarray,
    v0: np.ndarray,
    params: AccelParams,
    oracle=restricted_oracle,
    estimator_factory: EstimatorFactory | None = None,
) -> SolverReport:
    """Minimize the problem's smoothed max via restricted oracle calls.

    ``estimator_factory(anchor, r_prime, seed)`` builds the per-round
    gradient estimator; ``oracle`` is called as
    ``oracle(grad_est, setup, y, rho, cfg)``.  A fresh estimator is
    anchored at Phi_t(v_t) each round, and its gradient is scaled by the
    round weight a_{t+1}.
    """
    start = time.perf_counter()
    threshold = params.stopping_scale * stopping_threshold(params.r_bound, params.e0, params.eps)
    beta = (math.sqrt(params.gamma) * params.r / params.r_bound) ** (2.0 / 3.0)
    rho = (1.0 + 1.0 / beta) * params.r
    expected = expected_iteration_bound(params)
    cap = math.ceil(params.iteration_cap_factor * expected)

    a_weight = params.r_bound**2 / params.e0
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    if isinstance(params.seed, np.random.SeedSequence):
        seed_entropy, seed_key = params.seed.entropy, params.seed.spawn_key
    else:
        seed_entropy, seed_key = params.seed, ()

    records: list[IterationRecord] = []
    trace: list[dict] = []
    func_evals = grad_evals = rebuilds = 0
    t_eval = 0.0
    oracle_wall = 0.0
    status, err = "ok", ""
    t = 0

    tau_val = tau(setup)

    while a_weight < threshold:
        t += 1
        if t > cap:
            raise IterationCapExceeded(
                f"outer loop passed {cap} iterations (expected about {expected:.1f})"
            )
        a_inc = beta * a_weight
        a_next = a_weight + a_inc
        anchor = (a_weight * x + a_inc * v) / a_next
        gamma_bound = a_inc * params.lip

        if params.profile.paper_step:
            delta_est = params.profile.delta if params.profile.delta is not None else 1e-3
            r_prime = 2.0 * (params.r / rho) * movement_bound(
                params.profile, rho, tau_val, gamma_bound, delta_est
            )
        else:
            r_prime = 8.0 * params.r
        round_seed = np.random.SeedSequence(entropy=seed_entropy, spawn_key=seed_key + (t,))
        est = estimator_factory(anchor, r_prime, round_seed)

        scale = a_inc / a_next

        def grad_h(z: np.ndarray) -> np.ndarray:
            point = anchor + scale * (z - v)
            _, grad, _ = est.estimate(point)
            return a_inc * grad

        cfg = OracleConfig(gamma_bound, _div_bound(setup, params), params.profile)
        t_oracle = time.perf_counter()
        result, stats = oracle(grad_h, setup, v, rho, cfg)
        oracle_wall += time.perf_counter() - t_oracle

        c = result.c
        phi_z = anchor + scale * (result.z - v)
        x = phi_z / c + (1.0 - 1.0 / c) * x
        a_weight = a_weight + a_inc / c
        v = result.w

        records.append(
            IterationRecord(c, a_weight, stats.total_queries, stats.total_movement,
                            stats.lam, stats.bisection_rounds)
        )
        if params.record_trace:
            trace.append({"x": x.copy(), "v": v.copy(), "A": a_weight, "c": c,
                          "rho": rho, "a_inc": a_inc})
        counters = est.counters
        func_evals += counters.func_evals
        grad_evals += counters.grad_evals
        rebuilds += counters.mvm_rebuilds
        t_eval += counters.eval_seconds

    wall = time.perf_counter() - start
    return SolverReport(
        x=x,
        f_max_value=problem.f_max(x),
        outer_iterations=t,
        iterations=records,
        func_evals=func_evals,
        grad_evals=grad_evals,
        mvm_rebuilds=rebuilds,
        t_eval=t_eval,
        t_md=max(oracle_wall - t_eval, 0.0),
        wall_time=wall,
        seed=params.seed,
        profile_name=params.profile.name,
        status=status,
        error=err,
        rho=rho,
        expected_iterations=expected,
        trace=trace,
    )


def _div_bound(setup: GeometrySetup, params: AccelParams) -> float:
    from .geometry import max_divergence_bound

    bound = max_divergence_bound(setup)
    if math.isinf(bound):
        bound = 2.0 * params.r_bound**2
    return bound


def phi_map(a_weight: float, a_inc: float, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """The interpolation Phi used by the outer loop; exposed for tests."""
    return (a_weight * x + a_inc * z) / (a_weight + a_inc)
