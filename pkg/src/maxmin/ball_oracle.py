"""Restricted proximal ball oracle.

``li_md`` runs last-iterate proximal mirror descent: gradients are
queried at the running average of the iterates, which keeps every query
within the working radius and bounds the total query movement by
O(rho log T).  ``lambda_bisection`` searches for a regularization weight
whose prox point sits at divergence Theta(rho^2) from the center, and
``restricted_oracle`` combines the two into the (z, w, c) output whose
in-expectation inequality the accelerator consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    BudgetExceeded,
    GradientCallbackFailed,
    InvalidParams,
    PreconditionViolated,
    RejectionStall,
)
from .geometry import (
    GeometrySetup,
    Kind,
    _prox_ball,
    _prox_simplex,
    _waterfill,
    bregman,
    tau,
)

GradEst = Callable[[np.ndarray], np.ndarray]

THEORY_STEP_CONSTANT = 66.0 * 2.0**12


@dataclass(frozen=True)
class OracleProfile:
    """Constant profile for the oracle's step sizes and thresholds.

    ``theory`` reproduces the published constants: step size
    rho^2 lam / (C log(16/delta) tau^5 Gamma^2) with C = 66 * 2^12 and the
    capped failure probability.  ``practical`` keeps every structural
    formula (T = 4 tau / (eta lam), bisection thresholds, K_max) but uses
    the step size rho^2 lam / (C Gamma^2) with a configurable C, since the
    worst-case tau^5 log(1/delta) factor makes desk-scale runs
    astronomically long.
    """

    name: str
    step_constant: float
    delta: float | None  # None: use the theory cap
    paper_step: bool
    upper_div: float = 64.0  # raise lambda_min when V_y(z) > rho^2/(upper_div tau)
    lower_div: float = 256.0  # lower lambda_max when V_y(z) < rho^2/(lower_div tau^3)
    gamma: float = 0.1  # oracle-quality parameter handed to the accelerator


def theory_profile() -> OracleProfile:
    return OracleProfile("theory", THEORY_STEP_CONSTANT, None, True, gamma=0.0)


def practical_profile(
    step_constant: float = 64.0,
    delta: float = 1e-3,
    upper_div: float = 64.0,
    lower_div: float = 256.0,
    gamma: float = 0.1,
) -> OracleProfile:
    return OracleProfile("practical", step_constant, delta, False, upper_div, lower_div, gamma)


def get_profile(name: str) -> OracleProfile:
    if name == "theory":
        return theory_profile()
    if name == "practical":
        return practical_profile()
    raise InvalidParams(f"unknown profile {name!r}")


@dataclass(frozen=True)
class OracleConfig:
    """Per-call inputs: gradient bound, divergence bound, constants."""

    gamma_bound: float  # Gamma: bound on the estimator's dual norms
    div_bound: float  # R^2: max pairwise divergence over the domain
    profile: OracleProfile

    def delta(self, rho: float, tau_val: float) -> float:
        if self.profile.delta is not None:
            return self.profile.delta
        r2 = self.div_bound
        cap = rho**2 / (2.0**14 * (math.sqrt(2.0 * r2) * self.gamma_bound + r2) * tau_val**5)
        return min(cap, 0.25)


@dataclass
class LimdParams:
    lam: float
    eta: float
    steps: int
    rho: float
    y: np.ndarray


@dataclass
class LimdResult:
    z: np.ndarray
    w: np.ndarray
    out_of_bound: bool
    movement: float
    queries: int


@dataclass
class BallOracleResult:
    z: np.ndarray
    w: np.ndarray
    c: float


@dataclass
class OracleStats:
    lam: float = 1.0
    c: float = 1.0
    bisection_rounds: int = 0
    limd_calls: int = 0
    total_queries: int = 0
    total_movement: float = 0.0
    k_max: int = 0
    out_of_bound_final: bool = False
    vy_z: float = 0.0
    initial_check_hit: bool = False
    eta: float = 0.0
    steps: int = 0


def step_plan(
    profile: OracleProfile,
    rho: float,
    lam: float,
    tau_val: float,
    gamma_bound: float,
    delta0: float,
) -> tuple[float, int]:
    """Step size and iteration count with eta * T = 4 tau / lam held exact.

    T is rounded up to an integer and eta rescaled down accordingly, so
    the returned multiplier c = lam + 1/(eta T) equals lam (1 + 1/(4 tau))
    identically.
    """
    if profile.paper_step:
        eta = (rho**2 * lam) / (
            profile.step_constant * math.log(16.0 / delta0) * tau_val**5 * gamma_bound**2
        )
    else:
        eta = (rho**2 * lam) / (profile.step_constant * gamma_bound**2)
    steps = max(1, math.ceil(4.0 * tau_val / (eta * lam)))
    eta = 4.0 * tau_val / (lam * steps)
    return eta, steps


def li_md(
    grad_est: GradEst,
    setup: GeometrySetup,
    params: LimdParams,
) -> LimdResult:
    """Last-iterate proximal mirror descent around center params.y.

    Aborts with the out-of-bound flag as soon as the running average
    leaves the rho-ball; on a clean run returns the average iterate and
    the mirror-averaged point.
    """
    y = params.y
    lam, eta, rho = params.lam, params.eta, params.rho
    el = eta * lam
    w = y.copy()
    x = y.copy()
    movement = 0.0
    queries = 0
    out_of_bound = False
    is_ball = setup.kind is Kind.BALL
    norm = setup.norm
    log_y = None if is_ball else np.log(y)
    log_w = log_y

    mirror_sum = np.zeros_like(y)
    steps_done = 0
    x_prev_in = y.copy()

    for t in range(1, params.steps + 1):
        if t > 1:
            step_vec = (w - x) / t
            movement += norm(step_vec)
            x_prev_in = x
            x = x + step_vec
        if norm(x - y) >= rho:
            out_of_bound = True
            break
        try:
            g = grad_est(x)
        except (RejectionStall, BudgetExceeded, PreconditionViolated) as exc:
            raise GradientCallbackFailed(str(exc)) from exc
        queries += 1
        if is_ball:
            w = _prox_ball(g, eta, el, y, w)
            mirror_sum += w
        else:
            w = _prox_simplex(g, eta, el, log_y, log_w, setup.nu)
            log_w = np.log(w)
            mirror_sum += log_w
        steps_done = t

    if out_of_bound:
        if is_ball:
            direction = x - y
            z = y + rho * direction / norm(direction)
        else:
            # the l1 ray point may leave the truncated simplex; the last
            # in-domain average (distance < rho from y) serves instead
            z = x_prev_in
        return LimdResult(z, z.copy(), True, movement, queries)

    last_weight = math.inf if lam == 0.0 or eta == 0.0 else 1.0 / (lam * eta)
    if math.isinf(last_weight):
        w_tilde = w.copy()
    elif is_ball:
        w_tilde = (mirror_sum + last_weight * w) / (steps_done + last_weight)
    else:
        log_xi = (mirror_sum + last_weight * log_w) / (steps_done + last_weight)
        w_tilde = _waterfill(log_xi, setup.nu)
    return LimdResult(x, w_tilde, False, movement, queries)


def bisection_round_limit(tau_val: float, gamma_bound: float, rho: float) -> int:
    arg = 9600.0 * tau_val**3 * gamma_bound**3 / rho**3
    return max(1, math.ceil(math.log2(max(arg, 2.0))))


def lambda_bisection(
    grad_est: GradEst,
    setup: GeometrySetup,
    y: np.ndarray,
    rho: float,
    cfg: OracleConfig,
    stats: OracleStats | None = None,
) -> float:
    """Find lam with the prox point at divergence ~rho^2 scale from y.

    Runs the mirror-descent probe at lam = 1 first; if the probe already
    stays close, 1 is returned.  Otherwise halves the bracket
    [1, 16 tau Gamma / rho], raising the floor when the probe escapes and
    lowering the ceiling when it collapses onto the center.
    """
    stats = stats if stats is not None else OracleStats()
    profile = cfg.profile
    tau_val = tau(setup)
    gamma_b = cfg.gamma_bound
    if gamma_b <= 0.0:
        raise InvalidParams("gradient bound must be positive")
    delta = cfg.delta(rho, tau_val)
    # the bracket floor is 1; tiny gradient bounds would otherwise invert it
    lam_max = max(16.0 * tau_val * gamma_b / rho, 1.0)
    lam_min = 1.0
    k_max = bisection_round_limit(tau_val, gamma_b, rho)
    stats.k_max = k_max
    upper = rho**2 / (profile.upper_div * tau_val)
    lower = rho**2 / (profile.lower_div * tau_val**3)

    eta0, steps0 = step_plan(profile, rho, lam_min, tau_val, gamma_b, delta)
    res = li_md(grad_est, setup, LimdParams(lam_min, eta0, steps0, rho, y))
    stats.limd_calls += 1
    stats.total_queries += res.queries
    stats.total_movement += res.movement
    if not res.out_of_bound and bregman(setup, y, res.z) < upper:
        stats.initial_check_hit = True
        return lam_min

    lam_k = lam_max
    for k in range(1, k_max + 1):
        lam_k = 0.5 * (lam_max + lam_min)
        delta_k = delta / (8.0 * k * k)
        eta_k, steps_k = step_plan(profile, rho, lam_k, tau_val, gamma_b, delta_k)
        res = li_md(grad_est, setup, LimdParams(lam_k, eta_k, steps_k, rho, y))
        stats.limd_calls += 1
        stats.total_queries += res.queries
        stats.total_movement += res.movement
        stats.bisection_rounds = k
        if res.out_of_bound or bregman(setup, y, res.z) > upper:
            lam_min = lam_k
        elif bregman(setup, y, res.z) < lower:
            lam_max = lam_k
        else:
            return lam_k
    # reached only on the low-probability bad event
    return lam_k


def restricted_oracle(
    grad_est: GradEst,
    setup: GeometrySetup,
    y: np.ndarray,
    rho: float,
    cfg: OracleConfig,
) -> tuple[BallOracleResult, OracleStats]:
    """(rho, gamma, c_max) restricted proximal oracle around y.

    Returns points z, w and a multiplier c in [1, 32 tau Gamma / rho]
    with c = lam (1 + 1/(4 tau)) for the bisected lam.
    """
    if rho <= 0.0:
        raise InvalidParams("rho must be positive")
    stats = OracleStats()
    tau_val = tau(setup)
    if not tau_val >= 4.0:
        raise PreconditionViolated("setup must satisfy a finite tau >= 4 triangle inequality")
    delta = cfg.delta(rho, tau_val)

    lam = lambda_bisection(grad_est, setup, y, rho, cfg, stats)
    eta, steps = step_plan(cfg.profile, rho, lam, tau_val, cfg.gamma_bound, delta)
    res = li_md(grad_est, setup, LimdParams(lam, eta, steps, rho, y))
    stats.limd_calls += 1
    stats.total_queries += res.queries
    stats.total_movement += res.movement
    stats.lam = lam
    stats.eta = eta
    stats.steps = steps
    stats.out_of_bound_final = res.out_of_bound
    stats.vy_z = bregman(setup, y, res.z)
    c = lam + 1.0 / (eta * steps)
    stats.c = c
    return BallOracleResult(res.z, res.w, c), stats


def movement_bound(
    profile: OracleProfile, rho: float, tau_val: float, gamma_bound: float, delta: float
) -> float:
    """Worst-case total query movement of one oracle call (the inner
    logarithm is twice the largest per-call iteration budget)."""
    k_max = bisection_round_limit(tau_val, gamma_bound, rho)
    c = profile.step_constant
    if profile.paper_step:
        inner = 4.0 * c * math.log(16.0 * k_max**2 / delta) * tau_val**6 * gamma_bound**2 / rho**2
    else:
        inner = 8.0 * c * tau_val * gamma_bound**2 / rho**2
    return rho * 2.0 * k_max * math.log(max(inner, math.e))


def query_budget_bound(
    profile: OracleProfile, rho: float, tau_val: float, gamma_bound: float, delta: float
) -> float:
    """Upper bound on the total gradient calls of one oracle call: the
    per-call budget at lam = 1 and the smallest per-round delta, summed
    over every possible bisection round."""
    k_max = bisection_round_limit(tau_val, gamma_bound, rho)
    delta_last = delta / (8.0 * k_max**2)
    if profile.paper_step:
        t_max = (
            4.0
            * profile.step_constant
            * math.log(16.0 / delta_last)
            * tau_val**6
            * (gamma_bound / rho) ** 2
        )
    else:
        t_max = 4.0 * profile.step_constant * tau_val * (gamma_bound / rho) ** 2
    return (k_max + 2.0) * (t_max + 1.0)
