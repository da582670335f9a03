"""Problem front ends: smooth max, matrix games, minimum enclosing ball,
and a plain subgradient baseline used as the long-run reference."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .accelerator import AccelParams, SolverReport, accelerate, expected_iteration_bound
from .ball_oracle import OracleProfile, get_profile, practical_profile, theory_profile
from .errors import InvalidParams
from .estimator import SoftmaxGradientEstimator
from .geometry import (
    GeometrySetup,
    Kind,
    ball_setup,
    domain_radius_bound,
    project,
    prox_step,
    simplex_setup,
    tau,
)
from .problems import (
    LinearMaxProblem,
    MatrixGameInstance,
    MaxProblem,
    MebInstance,
    QuadraticMaxProblem,
)
from . import refcheck
from .refcheck import duality_gap


def _resolve_profile(profile) -> OracleProfile:
    if isinstance(profile, OracleProfile):
        return profile
    return get_profile(profile)


def _log_n(n: int) -> float:
    return math.log(max(n, 2))


def smoothing_level(eps: float, n: int) -> float:
    """Softmax temperature eps' = eps / (2 log n)."""
    return eps / (2.0 * _log_n(n))


# Flop-equivalent cost of one f_i / grad f_i evaluation.  Interpreter
# dispatch makes even a d=3 evaluation cost a few hundred flop-equivalents,
# so the proxy is floored well above d.
EVAL_COST_PROXY = 512.0


def default_radius(problem: MaxProblem, eps: float, r_bound: float) -> float:
    """r = min( sqrt(eps / (L_g log n)), eps sqrt(T_eval + d) / L_f ), capped
    by the divergence radius."""
    terms = [r_bound]
    if problem.smooth > 0.0:
        terms.append(math.sqrt(eps / (problem.smooth * _log_n(problem.n))))
    terms.append(eps * math.sqrt(EVAL_COST_PROXY + problem.d) / problem.lip)
    return min(terms)


def auto_gamma(
    tau_val: float,
    step_constant: float,
    a_max: float,
    a_start: float,
    lip: float,
    r_bound: float,
    radius: float,
    overhead_steps: float = 12.0,
) -> float:
    """Oracle-quality parameter balancing inner-loop work against rounds.

    The lam = 1 probe costs ~4 tau C (Gamma/rho)^2 steps, and summed over
    a geometric weight schedule the probe total scales linearly in gamma,
    while the round count scales as gamma^{-1/3}; the minimizer of
    K1 gamma + K2 gamma^{-1/3} is (K2 / 3 K1)^{3/4}.  Small gamma is
    always admissible (the oracle contract only weakens), it just trades
    more outer rounds for cheaper inner loops.
    """
    k1 = 2.0 * tau_val * step_constant * (a_max * lip / r_bound) ** 2
    k2 = (
        math.log(max(a_max / a_start, 2.0))
        * (r_bound / radius) ** (2.0 / 3.0)
        * overhead_steps
    )
    gamma = (k2 / (3.0 * k1)) ** 0.75
    return min(max(gamma, 1e-10), 0.4)


def solve_smooth_max(
    problem: MaxProblem,
    eps: float,
    seed: int = 0,
    profile="practical",
    kind: Kind = Kind.BALL,
    nu: float | None = None,
    r: float | None = None,
    gamma: float | None = None,
    estimator_mode: str = "exact",
    record_trace: bool = False,
    e0: float | None = None,
    stopping_scale: float = 1.0,
) -> SolverReport:
    """Minimize max_i f_i over the chosen domain to expected accuracy eps.

    Applies the softmax smoothing at temperature eps/(2 log n), truncates
    the simplex at nu = eps/(4 d L_f), and runs the accelerated outer
    loop at accuracy eps/8 with the rejection-sampling gradient
    estimator rebuilt at each round's anchor.
    """
    if eps <= 0.0:
        raise InvalidParams("eps must be positive")
    prof = _resolve_profile(profile)
    d, n = problem.d, problem.n

    if kind is Kind.BALL:
        setup = ball_setup(d)
    else:
        level = eps / (4.0 * d * problem.lip) if nu is None else nu
        setup = simplex_setup(d, min(level, 0.5 / d))

    x0 = setup.center()
    r_bound = domain_radius_bound(setup, x0)
    eps_prime = smoothing_level(eps, n)
    radius = default_radius(problem, eps, r_bound) if r is None else min(r, r_bound)
    if e0 is None:
        e0 = problem.lip * r_bound
    eps_accel = eps / 8.0

    if gamma is None:
        if prof.paper_step:
            gamma = 1.0 / (2.0**13 * tau(setup) ** 5)
        else:
            from .accelerator import stopping_threshold

            a_max = stopping_scale * stopping_threshold(r_bound, e0, eps_accel)
            gamma = auto_gamma(
                tau(setup), prof.step_constant, a_max, r_bound**2 / e0,
                problem.lip, r_bound, radius,
            )
    params = AccelParams(
        r=radius,
        r_bound=r_bound,
        e0=e0,
        eps=eps_accel,
        gamma=gamma,
        profile=prof,
        lip=problem.lip,
        seed=seed,
        record_trace=record_trace,
        stopping_scale=stopping_scale,
    )
    if prof.delta is not None:
        est_delta = prof.delta
    else:
        est_delta = min(
            0.25, eps / (problem.lip * r_bound * 100.0 * expected_iteration_bound(params))
        )

    def factory(anchor, r_prime, child_seed):
        return SoftmaxGradientEstimator(
            problem,
            anchor,
            eps_prime,
            radius,
            r_prime,
            est_delta,
            rng_seed=child_seed,
            mode=estimator_mode,
            p=setup.p,
        )

    report = accelerate(problem, setup, x0, x0.copy(), params, estimator_factory=factory)
    report.x = project(setup, report.x)
    report.f_max_value = problem.f_max(report.x)
    report.extras["eps"] = eps
    report.extras["eps_prime"] = eps_prime
    report.extras["r"] = radius
    report.extras["gamma"] = gamma
    report.extras["nu"] = setup.nu
    return report


CERTIFICATE_DRAWS = 4096
CERTIFICATE_POLISH_STEPS = 200


def polish_dual(inst: MatrixGameInstance, y0: np.ndarray, steps: int, eta: float = 0.5):
    """Exponentiated-gradient ascent on the best-response lower bound.

    Starts from the sampled frequency vector and keeps the best feasible
    dual seen; every iterate is a valid certificate, so this only
    tightens the reported gap.
    """
    a = inst.matrix
    y = np.maximum(y0, 1e-12)
    y = y / y.sum()
    log_y = np.log(y)
    best = y.copy()
    best_val = refcheck.game_best_response_lower_bound(a, y, inst.is_ball)
    for _ in range(steps):
        ay = a @ y
        if inst.is_ball:
            grad = -(a.T @ ay) / max(float(np.linalg.norm(ay)), 1e-15)
        else:
            grad = a[int(np.argmin(ay))]
        log_y = log_y + eta * grad
        log_y -= log_y.max()
        y = np.exp(log_y)
        y /= y.sum()
        val = refcheck.game_best_response_lower_bound(a, y, inst.is_ball)
        if val > best_val:
            best_val = val
            best = y.copy()
    return best


def dual_from_samples(
    problem: MaxProblem,
    x: np.ndarray,
    eps_prime: float,
    draws: int,
    seed,
    p: int,
) -> np.ndarray:
    """Empirical accepted-index frequencies of the estimator at x."""
    r_cert = max(2.0 * eps_prime / problem.lip, 1e-9)
    est = SoftmaxGradientEstimator(
        problem, x, eps_prime, r_cert, 1.01 * r_cert, 1e-3, rng_seed=seed, mode="exact", p=p
    )
    counts = np.zeros(problem.n)
    for _ in range(draws):
        i, _, _ = est.estimate(x)
        counts[i] += 1.0
    return counts / draws


def solve_matrix_game(
    inst: MatrixGameInstance,
    eps: float,
    seed: int = 0,
    profile="practical",
    gamma: float | None = None,
    certificate_draws: int = CERTIFICATE_DRAWS,
) -> tuple[np.ndarray, SolverReport]:
    """Primal solver for min_x max_y x^T A y with a post-hoc gap certificate.

    The dual certificate vector is the empirical accepted-index frequency
    of the estimator at the final point; the reported gap is
    f_max(x) minus that vector's best-response lower bound.
    """
    if not (0.0 < eps < 1.0):
        raise InvalidParams("eps must lie in (0, 1)")
    problem = inst.problem()
    kind = Kind.BALL if inst.is_ball else Kind.TRUNCATED_SIMPLEX
    d = inst.d
    radius = min(1.0, math.sqrt(d) * eps)
    nu = None if inst.is_ball else eps / (4.0 * d)
    report = solve_smooth_max(
        problem, eps, seed=seed, profile=profile, kind=kind, nu=nu, r=radius, gamma=gamma
    )
    x = report.x
    y_hat = dual_from_samples(
        problem,
        x,
        smoothing_level(eps, inst.n),
        certificate_draws,
        np.random.SeedSequence([seed, 0xD0A1]),
        2 if inst.is_ball else 1,
    )
    gap_sampled = duality_gap(inst, x, y_hat)
    y_polished = polish_dual(inst, y_hat, CERTIFICATE_POLISH_STEPS)
    gap = min(gap_sampled, duality_gap(inst, x, y_polished))
    report.extras["value"] = report.f_max_value
    report.extras["gap"] = gap
    report.extras["gap_sampled"] = gap_sampled
    report.extras["certificate_draws"] = certificate_draws
    return x, report


def meb_level_count(eps: float) -> int:
    return max(1, math.ceil(math.log2(4.0 / eps)))


def meb_boost_repeats(levels: int) -> int:
    return max(1, math.ceil(math.log2(10.0 * levels)))


# Stopping fraction for the recursion's sub-solves.  The worst-case weight
# threshold overdelivers accuracy by several orders of magnitude at these
# scales; the boosting step still selects on the exact objective.
MEB_STOPPING_SCALE = 1.0 / 1024.0
MEB_PRACTICAL_REPEATS = 2


def solve_meb(
    inst: MebInstance,
    eps: float,
    seed: int = 0,
    profile="practical",
    repeats: int | None = None,
    gamma: float | None = None,
    stopping_scale: float = MEB_STOPPING_SCALE,
) -> tuple[np.ndarray, float, SolverReport]:
    """Minimum enclosing ball via the halving recursion.

    Level k solves the smooth-max problem restricted to the ball of
    radius 2^{-(k-1)/2} around the previous center, rescaled to the unit
    ball, at accuracy 2^{-(k+1)}; each level is boosted by keeping the
    best of several repetitions under the exact objective.  The previous
    level's accuracy guarantee seeds the next level's suboptimality
    bound.
    """
    if not (0.0 < eps < 1.0):
        raise InvalidParams("eps must lie in (0, 1)")
    prof = _resolve_profile(profile)
    if prof.paper_step:
        stopping_scale = 1.0
    pts = inst.points
    n, d = pts.shape
    base = QuadraticMaxProblem(pts)
    levels = meb_level_count(eps)
    if repeats is None:
        reps = MEB_PRACTICAL_REPEATS if not prof.paper_step else meb_boost_repeats(levels)
    else:
        reps = max(1, repeats)
    root = np.random.SeedSequence(seed)

    x = np.zeros(d)
    total = _CounterBag()
    start = time.perf_counter()
    last_report: SolverReport | None = None
    prev_err = 0.5  # f(x0) - f* <= f_max(0) <= 1/2 for normalized inputs
    for k in range(1, levels + 1):
        r_k = 2.0 ** (-(k - 1) / 2.0)
        eps_k = 2.0 ** (-(k + 1))
        scale_k = r_k * r_k
        scaled = QuadraticMaxProblem((pts - x) / r_k, scale=1.0)
        eps_hat = eps_k / scale_k
        e0_hat = min(scaled.lip, 2.0 * prev_err / scale_k)
        best_val = math.inf
        best_x = x
        for rep_seed in root.spawn(reps):
            rep = solve_smooth_max(
                scaled,
                eps_hat,
                seed=rep_seed,
                profile=prof,
                kind=Kind.BALL,
                gamma=gamma,
                e0=e0_hat,
                stopping_scale=stopping_scale,
            )
            cand = x + r_k * rep.x
            val = base.f_max(cand)
            total.add(rep)
            last_report = rep
            if val < best_val:
                best_val = val
                best_x = cand
        x = best_x
        prev_err = eps_k
    radius = math.sqrt(2.0 * base.f_max(x))
    center_in, radius_in = inst.to_input_coords(x, radius)

    report = total.to_report(last_report, x, base.f_max(x), seed, start)
    report.extras.update(
        {"radius": radius_in, "center": center_in.tolist(), "levels": levels, "repeats": reps}
    )
    return center_in, radius_in, report


class _CounterBag:
    def __init__(self) -> None:
        self.outer = 0
        self.func = 0
        self.grad = 0
        self.rebuilds = 0
        self.t_eval = 0.0
        self.t_md = 0.0
        self.records = []

    def add(self, rep: SolverReport) -> None:
        self.outer += rep.outer_iterations
        self.func += rep.func_evals
        self.grad += rep.grad_evals
        self.rebuilds += rep.mvm_rebuilds
        self.t_eval += rep.t_eval
        self.t_md += rep.t_md
        self.records.extend(rep.iterations)

    def to_report(self, template: SolverReport, x, fval, seed, start) -> SolverReport:
        return SolverReport(
            x=x,
            f_max_value=fval,
            outer_iterations=self.outer,
            iterations=self.records,
            func_evals=self.func,
            grad_evals=self.grad,
            mvm_rebuilds=self.rebuilds,
            t_eval=self.t_eval,
            t_md=self.t_md,
            wall_time=time.perf_counter() - start,
            seed=seed,
            profile_name=template.profile_name if template else "practical",
        )


def subgradient_baseline(
    problem: MaxProblem,
    setup: GeometrySetup,
    steps: int,
    step_rule: str = "sqrt",
    seed: int = 0,
) -> SolverReport:
    """Plain mirror descent on f_max with a max-achieving subgradient.

    Averaged-iterate output; serves as the long-run reference oracle and
    the comparison row in benchmarks.
    """
    if steps < 1:
        raise InvalidParams("steps must be >= 1")
    start = time.perf_counter()
    x = setup.center()
    avg = np.zeros_like(x)
    r_bound = domain_radius_bound(setup, x)
    scale = r_bound / max(problem.lip, 1e-12)
    for t in range(1, steps + 1):
        if step_rule == "sqrt":
            eta = scale / math.sqrt(t)
        elif step_rule == "fixed":
            eta = scale / math.sqrt(steps)
        else:
            raise InvalidParams(f"unknown step rule {step_rule!r}")
        g = problem.max_subgradient(x)
        x = prox_step(setup, g, eta, 0.0, x, x)
        avg += (x - avg) / t
    avg = project(setup, avg)
    return SolverReport(
        x=avg,
        f_max_value=problem.f_max(avg),
        outer_iterations=steps,
        iterations=[],
        func_evals=steps * problem.n,
        grad_evals=steps,
        mvm_rebuilds=0,
        t_eval=0.0,
        t_md=0.0,
        wall_time=time.perf_counter() - start,
        seed=seed,
        profile_name="baseline",
    )
