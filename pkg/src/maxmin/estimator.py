"""Rejection-sampling softmax gradient estimator.

Draws an index from the distribution proportional to
exp(f_i(x_t) / eps') using only the anchor values f_i(x0), a maintained
approximation y_t of <grad f_i(x0), x_t - x0>, and rejection sampling;
returns grad f_{i_t}(x_t).  On the maintainer's good event the accepted
index has exactly the softmax law, so the output is an unbiased
estimator of the smoothed-max gradient, and it is always bounded by the
family's Lipschitz constant.

Two independent random streams are used: one for the sampler and one for
the maintainer, so the output distribution carries no dependence on the
data structure's random bits.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import MovementBudgetExceeded, PreconditionViolated, RejectionStall
from .errors import BudgetExceeded
from .maintenance import MatVecMaintainer
from .problems import MaxProblem
from .sumtree import SumTree

# Rebuild the weight tree when the running max logit drifts this far from
# the stored offset; prevents exp underflow from skewing the weights.
_OFFSET_DRIFT = 30.0
_BATCH = 8


@dataclass
class EstimateStats:
    index: int
    draws: int
    accept_prob: float


@dataclass
class EstimatorCounters:
    func_evals: int = 0
    grad_evals: int = 0
    calls: int = 0
    draws: int = 0
    accepted: int = 0
    mvm_rebuilds: int = 0
    eval_seconds: float = 0.0

    @property
    def evaluations(self) -> int:
        return self.func_evals + self.grad_evals


class SoftmaxGradientEstimator:
    """Stateful estimator anchored at x0 with query radius r and total
    movement budget r_prime.

    Queries must stay within distance r of the anchor and be chosen as a
    deterministic function of previous outputs (the maintainer's
    obliviousness contract).  ``mode`` picks the maintainer backend:
    "exact" for the deterministic fallback, "sketch" for the real data
    structures.
    """

    def __init__(
        self,
        problem: MaxProblem,
        x0: np.ndarray,
        eps_prime: float,
        r: float,
        r_prime: float,
        delta: float,
        rng_seed=0,
        mode: str = "exact",
        p: int | None = None,
        auto_rebuild: bool = True,
        record_queries: bool = False,
    ):
        half_smooth = 0.5 * problem.smooth * r * r
        if half_smooth > eps_prime * (1.0 + 1e-9):
            raise PreconditionViolated(
                f"need (1/2) L_g r^2 <= eps': {half_smooth:.6g} > {eps_prime:.6g}"
            )
        if eps_prime > 0.5 * problem.lip * r_prime * (1.0 + 1e-9):
            raise PreconditionViolated(
                f"need eps' <= L_f r'/2: {eps_prime:.6g} > {0.5 * problem.lip * r_prime:.6g}"
            )

        self.problem = problem
        self.x0 = np.asarray(x0, dtype=float).copy()
        self.eps_prime = float(eps_prime)
        self.r = float(r)
        self.r_prime = float(r_prime)
        self.delta = float(delta)
        self.p = p if p is not None else 2
        self.mode = mode
        self.auto_rebuild = auto_rebuild
        self.record_queries = record_queries
        self.query_log: list[np.ndarray] = []
        self.max_consecutive_rejections = max(8, math.ceil(200.0 * math.log(1.0 / delta)))
        self.counters = EstimatorCounters()

        if isinstance(rng_seed, np.random.SeedSequence):
            ss = rng_seed
        else:
            ss = np.random.SeedSequence(rng_seed)
        # two independent streams: the sampler's output distribution must
        # not depend on the maintainer's random bits
        self._mvm_seed = np.random.SeedSequence(
            entropy=ss.entropy, spawn_key=ss.spawn_key + (101,)
        )
        sampler_seed = np.random.SeedSequence(
            entropy=ss.entropy, spawn_key=ss.spawn_key + (202,)
        )
        self.sampler_rng = np.random.Generator(np.random.Philox(sampler_seed))

        t0 = time.perf_counter()
        self.f0 = np.asarray(problem.values_all(self.x0), dtype=float)
        grads = np.asarray(problem.grad_matrix(self.x0), dtype=float)
        self.counters.func_evals += problem.n
        self.counters.grad_evals += problem.n
        self.counters.eval_seconds += time.perf_counter() - t0

        self.lip = problem.lip
        self._a = grads if self.lip == 1.0 else grads / self.lip
        self.x_prev = self.x0.copy()
        self._init_mvm(np.zeros(problem.d))
        self.y = np.zeros(problem.n)
        self.logits = (self.f0 + self.y) / self.eps_prime
        self._offset = float(self.logits.max())
        self.tree = SumTree(np.exp(self.logits - self._offset))

    def _init_mvm(self, v0: np.ndarray) -> None:
        if self.mode == "exact":
            seed = 0
        else:
            seed = self._mvm_seed.spawn(1)[0]
        # rows are gradients over lip, so the unit norm bound holds by the
        # problem's Lipschitz contract; skip the per-rebuild scan
        self.mvm = MatVecMaintainer(
            self._a,
            v0,
            r_budget=self.r_prime,
            eps=self.eps_prime / self.lip,
            delta=self.delta / 2.0,
            p=self.p,
            rng_seed=seed,
            mode=self.mode,
            check_norm=False,
        )

    def _refresh_logits(self, changed: np.ndarray) -> None:
        if changed.size == 0:
            return
        self.logits[changed] = (self.f0[changed] + self.y[changed]) / self.eps_prime
        top = float(self.logits.max())
        if abs(top - self._offset) > _OFFSET_DRIFT:
            self._offset = top
            self.tree.rebuild(np.exp(self.logits - self._offset))
        elif changed.size > max(8, self.problem.n // 8):
            self.tree.rebuild(np.exp(self.logits - self._offset))
        else:
            w = np.exp(self.logits[changed] - self._offset)
            for i, wi in zip(changed.tolist(), w.tolist()):
                self.tree.update(i, wi)

    def estimate(self, x_t: np.ndarray) -> tuple[int, np.ndarray, EstimateStats]:
        """Sample i ~ softmax(f(x_t)/eps') and return (i, grad f_i(x_t), stats)."""
        x_t = np.asarray(x_t, dtype=float)
        dist = self._pnorm(x_t - self.x0)
        if dist > self.r * (1.0 + 1e-9) + 1e-12:
            raise PreconditionViolated(f"query at distance {dist:.6g} > r = {self.r:.6g}")

        delta = x_t - self.x_prev
        try:
            raw, changed = self.mvm.query(delta)
        except BudgetExceeded as exc:
            if not self.auto_rebuild:
                raise MovementBudgetExceeded(str(exc)) from exc
            # fresh maintainer at the same anchor: budget resets, the new
            # reference products are exact, and the radius precondition is
            # untouched
            self.counters.mvm_rebuilds += 1
            self._init_mvm(self.x_prev - self.x0)
            raw, changed = self.mvm.query(delta)
            changed = np.arange(self.problem.n)
        if self.record_queries:
            self.query_log.append(delta.copy())

        self.y = self.lip * raw
        self._refresh_logits(changed)
        self.x_prev = x_t.copy()

        counters = self.counters
        f0 = self.f0
        y = self.y
        inv_eps = 1.0 / self.eps_prime
        value = self.problem.value
        draws = 0
        while True:
            batch = self.tree.sample_batch(self.sampler_rng, _BATCH)
            coins = self.sampler_rng.random(_BATCH)
            t0 = time.perf_counter()
            accepted = -1
            for pos, i in enumerate(batch.tolist()):
                draws += 1
                f_val = value(i, x_t)
                expo = (f_val - f0[i] - y[i]) * inv_eps - 2.0
                prob = math.exp(expo) if expo < 0.0 else 1.0
                if coins[pos] < prob:
                    accepted = i
                    counters.func_evals += pos + 1
                    break
            else:
                counters.func_evals += _BATCH
            if accepted >= 0:
                grad = self.problem.grad(accepted, x_t)
                counters.eval_seconds += time.perf_counter() - t0
                counters.calls += 1
                counters.draws += draws
                counters.accepted += 1
                counters.grad_evals += 1
                return accepted, grad, EstimateStats(accepted, draws, prob)
            counters.eval_seconds += time.perf_counter() - t0
            if draws > self.max_consecutive_rejections:
                raise RejectionStall(
                    f"{draws} consecutive rejections (threshold "
                    f"{self.max_consecutive_rejections}); treat this seed as failed"
                )

    def _pnorm(self, v: np.ndarray) -> float:
        if self.p == 2:
            return float(np.sqrt(np.dot(v, v)))
        return float(np.sum(np.abs(v)))


def estimator_init(
    problem: MaxProblem,
    x0: np.ndarray,
    eps_prime: float,
    r: float,
    r_prime: float,
    delta: float,
    rng_seed=0,
    **kwargs,
) -> SoftmaxGradientEstimator:
    return SoftmaxGradientEstimator(
        problem, x0, eps_prime, r, r_prime, delta, rng_seed, **kwargs
    )
