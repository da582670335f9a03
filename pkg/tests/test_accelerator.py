import math

import numpy as np
import pytest

from maxmin.accelerator import (
    AccelParams,
    accelerate,
    expected_iteration_bound,
    phi_map,
    stopping_threshold,
)
from maxmin.ball_oracle import BallOracleResult, OracleStats, practical_profile
from maxmin.errors import InvalidParams, IterationCapExceeded
from maxmin.geometry import Kind, ball_setup
from maxmin.problems import LinearMaxProblem


class TestStoppingThreshold:
    def test_basic_value(self):
        # 40 * 1 * ln(100) / 0.8 = 50 ln 100
        got = stopping_threshold(1.0, 1.0, 0.8)
        assert got == pytest.approx(50.0 * math.log(100.0), rel=1e-12)
        assert got == pytest.approx(230.25850929940456, abs=1e-9)

    def test_boundary_rejected(self):
        with pytest.raises(InvalidParams):
            stopping_threshold(1.0, 1.0, 80.0)  # log argument hits 1

    def test_second_value(self):
        # 40 * 4 * ln(400) / 0.1; an independent evaluation of the same
        # formula (the spec sheet's 958.68 figure dropped the 1/eps factor)
        got = stopping_threshold(2.0, 0.5, 0.1)
        assert got == pytest.approx(1600.0 * math.log(400.0), rel=1e-12)
        assert got == pytest.approx(9586.343275372771, abs=1e-6)

    def test_positivity_validation(self):
        with pytest.raises(InvalidParams):
            stopping_threshold(-1.0, 1.0, 0.1)


def stub_oracle_factory(c_value, pull=0.5):
    """Oracle stub: moves z, w halfway toward a fixed target, returns fixed c."""

    target = None

    def oracle(grad_est, setup, y, rho, cfg):
        z = y if target is None else y + pull * (target - y)
        return BallOracleResult(z.copy(), z.copy(), c_value), OracleStats(c=c_value)

    return oracle


class StubEstimator:
    class _C:
        func_evals = 0
        grad_evals = 0
        mvm_rebuilds = 0
        eval_seconds = 0.0

    counters = _C()

    def estimate(self, x):
        return 0, np.zeros_like(x), None


def run_accel(params, oracle, d=2):
    prob = LinearMaxProblem(np.zeros((1, d)))
    setup = ball_setup(d)
    return accelerate(
        prob, setup, np.zeros(d), np.zeros(d), params, oracle=oracle,
        estimator_factory=lambda anchor, r_prime, seed: StubEstimator(),
    )


class TestWeightRecursions:
    def test_formula_arithmetic(self):
        # (sqrt(gamma) r / R)^{2/3} = 0.25 with A = 1 gives a = 0.25,
        # A' = 1.25, rho = 5 r
        beta = 0.25
        a_weight = 1.0
        a_inc = beta * a_weight
        a_next = a_weight + a_inc
        assert a_inc == 0.25
        assert a_next == 1.25
        r = 0.17
        assert (a_next / a_inc) * r == pytest.approx(5.0 * r)
        assert (1.0 + 1.0 / beta) * r == pytest.approx(5.0 * r)

    def test_no_damping_at_unit_c(self):
        # c = 1 every round: A_{t+1} = A'_{t+1} and x_{t+1} = Phi_t(z_{t+1})
        prof = practical_profile()
        params = AccelParams(
            r=0.5, r_bound=1.0, e0=1.0, eps=0.25, gamma=0.25, profile=prof, lip=1.0
        )
        rep = run_accel(params, stub_oracle_factory(1.0))
        beta = (math.sqrt(0.25) * 0.5 / 1.0) ** (2.0 / 3.0)
        a = 1.0  # A_0 = R^2 / E0
        for rec in rep.iterations:
            a = a + beta * a  # c = 1: the damped and undamped weights agree
            assert rec.a_weight == pytest.approx(a, rel=1e-12)
            assert rec.c == 1.0

    def test_growth_identity_with_damping(self):
        prof = practical_profile()
        params = AccelParams(
            r=0.5, r_bound=1.0, e0=1.0, eps=0.25, gamma=0.25, profile=prof, lip=1.0
        )
        c = 3.0
        rep = run_accel(params, stub_oracle_factory(c))
        beta = (math.sqrt(0.25) * 0.5) ** (2.0 / 3.0)
        a = 1.0
        for rec in rep.iterations:
            a = a * (1.0 + beta / c)
            assert rec.a_weight == pytest.approx(a, rel=1e-12)

    def test_rho_constant_across_rounds(self):
        beta = (math.sqrt(0.1) * 0.3 / 1.2) ** (2.0 / 3.0)
        a = 7.3
        rho0 = (1.0 + 1.0 / beta) * 0.3
        for _ in range(60):
            a_inc = beta * a
            rho_t = (a + a_inc) / a_inc * 0.3
            assert rho_t == pytest.approx(rho0, rel=1e-12)
            a += a_inc / 2.2

    def test_phi_map(self):
        x = np.array([1.0, 0.0])
        z = np.array([0.0, 1.0])
        out = phi_map(3.0, 1.0, x, z)
        np.testing.assert_allclose(out, [0.75, 0.25])

    def test_iteration_cap_raises(self):
        prof = practical_profile()
        params = AccelParams(
            r=0.5, r_bound=1.0, e0=1.0, eps=0.25, gamma=0.25, profile=prof, lip=1.0,
            iteration_cap_factor=0.01,
        )
        with pytest.raises(IterationCapExceeded):
            run_accel(params, stub_oracle_factory(1e9))

    def test_stopping_scale_shortens_run(self):
        prof = practical_profile()
        kw = dict(r=0.5, r_bound=1.0, e0=1.0, eps=0.25, gamma=0.25, profile=prof, lip=1.0)
        full = run_accel(AccelParams(**kw), stub_oracle_factory(1.0))
        short = run_accel(AccelParams(**kw, stopping_scale=0.25), stub_oracle_factory(1.0))
        assert short.outer_iterations < full.outer_iterations

    def test_gamma_validation(self):
        prof = practical_profile()
        with pytest.raises(InvalidParams):
            AccelParams(r=0.5, r_bound=1.0, e0=1.0, eps=0.1, gamma=0.7, profile=prof, lip=1.0)
        with pytest.raises(InvalidParams):
            AccelParams(r=2.0, r_bound=1.0, e0=1.0, eps=0.1, gamma=0.1, profile=prof, lip=1.0)

    def test_expected_iteration_bound_scaling(self):
        prof = practical_profile()
        base = AccelParams(r=0.4, r_bound=1.0, e0=1.0, eps=0.1, gamma=0.1, profile=prof, lip=1.0)
        half = AccelParams(r=0.2, r_bound=1.0, e0=1.0, eps=0.1, gamma=0.1, profile=prof, lip=1.0)
        ratio = expected_iteration_bound(half) / expected_iteration_bound(base)
        assert ratio == pytest.approx(2.0 ** (2.0 / 3.0), rel=1e-12)


class TestPotentialDecrease:
    def test_mean_potential_step_nonpositive(self):
        # P_t = A_t (f_smax(x_t) - f*) + V_{v_t}(x*) against a brute-force
        # minimizer of the smoothed objective; averaged over 100 seeds the
        # oracle contract makes each step's increment at most the gamma
        # allowance
        import maxmin.refcheck as refcheck
        from maxmin.apps import smoothing_level, solve_smooth_max
        from maxmin.geometry import Kind, ball_setup

        rng = np.random.default_rng(99)
        rows = rng.standard_normal((4, 3))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        prob = LinearMaxProblem(rows * 0.8)
        eps = 0.2
        eps_prime = smoothing_level(eps, prob.n)
        setup = ball_setup(3)

        def smax_val(x):
            return prob.f_smax(x, eps_prime)

        def smax_grad(x):
            p = refcheck.exact_softmax_dist(prob, x, eps_prime)
            return p @ prob.rows

        x_star = refcheck.brute_minimize(
            setup, smax_val, smax_grad, np.zeros(3), refcheck.ReferenceBudget(tolerance=1e-11)
        )
        f_star = smax_val(x_star)

        increments = []
        for seed in range(100):
            rep = solve_smooth_max(
                prob, eps, seed=seed, profile="practical", record_trace=True,
                gamma=1e-4, stopping_scale=1.0 / 128.0,
            )
            gamma = rep.extras["gamma"]
            a_prev = 1.0  # A_0 = R^2 / E0 = R / L_f with R = 1, L_f = 1
            x_prev = np.zeros(3)
            v_prev = np.zeros(3)
            for rec in rep.trace[:40]:
                p_prev = a_prev * (smax_val(x_prev) - f_star) + 0.5 * np.sum(
                    (v_prev - x_star) ** 2
                )
                p_cur = rec["A"] * (smax_val(rec["x"]) - f_star) + 0.5 * np.sum(
                    (rec["v"] - x_star) ** 2
                )
                sign = 1.0 if rec["c"] >= 2.0 else -1.0
                increments.append(p_cur - p_prev + gamma * sign * rec["rho"] ** 2)
                a_prev, x_prev, v_prev = rec["A"], rec["x"], rec["v"]
        import maxmin.refcheck as rc

        ucb = rc.one_sided_upper_confidence(np.array(increments))
        assert ucb <= 0.0, f"potential increment UCB {ucb:.3e}"
