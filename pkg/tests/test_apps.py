import math

import numpy as np
import pytest

from maxmin import refcheck
from maxmin.apps import (
    auto_gamma,
    dual_from_samples,
    meb_boost_repeats,
    meb_level_count,
    polish_dual,
    smoothing_level,
    solve_matrix_game,
    solve_meb,
    solve_smooth_max,
    subgradient_baseline,
)
from maxmin.errors import InvalidParams, NormBoundViolated
from maxmin.geometry import Kind, ball_setup, simplex_setup
from maxmin.problems import (
    LinearMaxProblem,
    MatrixGameInstance,
    MebInstance,
    QuadraticMaxProblem,
)


class TestInstances:
    def test_game_norm_validation(self):
        with pytest.raises(NormBoundViolated):
            MatrixGameInstance(np.full((2, 2), 0.9), "l2l1")
        MatrixGameInstance(np.full((2, 2), 0.9), "l1l1")  # max entry fine

    def test_meb_normalization(self):
        inst = MebInstance(np.array([[1.0, 1.0], [3.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_array_equal(inst.points[0], [0.0, 0.0])
        assert np.max(np.linalg.norm(inst.points, axis=1)) == pytest.approx(1.0)
        c, r = inst.to_input_coords(np.array([0.5, 0.0]), 0.5)
        np.testing.assert_allclose(c, [2.0, 1.0])
        assert r == pytest.approx(1.0)

    def test_problem_values_and_grads(self):
        rng = np.random.default_rng(0)
        rows = rng.standard_normal((4, 3))
        p = LinearMaxProblem(rows)
        x = rng.standard_normal(3)
        np.testing.assert_allclose(p.values_all(x), rows @ x)
        assert p.value(2, x) == pytest.approx(float(rows[2] @ x))
        q = QuadraticMaxProblem(rows, np.arange(4.0), scale=2.0)
        np.testing.assert_allclose(q.grad(1, x), 2.0 * (x - rows[1]))
        assert q.f_max(x) == pytest.approx(np.max(q.values_all(x)))

    def test_smoothed_max_bounds(self):
        rng = np.random.default_rng(1)
        p = LinearMaxProblem(rng.standard_normal((6, 4)))
        x = rng.standard_normal(4)
        eps_prime = 0.05
        smax = p.f_smax(x, eps_prime)
        assert p.f_max(x) <= smax <= p.f_max(x) + eps_prime * math.log(6)


class TestSolveSmoothMax:
    def test_single_quadratic_recovers_center(self):
        b = np.array([0.3, -0.2, 0.1])
        rep = solve_smooth_max(QuadraticMaxProblem(b[None, :]), 0.05, seed=0)
        np.testing.assert_allclose(rep.x, b, atol=0.05)

    def test_identical_functions_match_single(self):
        # identical f_i: same minimizer as n = 1 up to the smoothing offset
        b = np.array([0.25, 0.1])
        single = solve_smooth_max(QuadraticMaxProblem(b[None, :]), 0.1, seed=1)
        many = solve_smooth_max(QuadraticMaxProblem(np.tile(b, (6, 1))), 0.1, seed=1)
        assert abs(single.f_max_value - many.f_max_value) <= 0.1
        np.testing.assert_allclose(many.x, b, atol=0.1)

    def test_output_feasible_on_truncated_simplex(self):
        rng = np.random.default_rng(2)
        rows = rng.standard_normal((5, 4))
        rows /= np.abs(rows).max()
        rep = solve_smooth_max(
            LinearMaxProblem(rows), 0.2, seed=0, kind=Kind.TRUNCATED_SIMPLEX
        )
        nu = rep.extras["nu"]
        assert nu == pytest.approx(0.2 / (4 * 4))
        assert np.all(rep.x >= nu - 1e-12)
        assert rep.x.sum() == pytest.approx(1.0, abs=1e-9)

    def test_reduction_soundness_pointwise(self):
        rng = np.random.default_rng(3)
        p = LinearMaxProblem(rng.standard_normal((8, 3)) * 0.4)
        eps = 0.1
        eps_prime = smoothing_level(eps, 8)
        for _ in range(50):
            x = rng.standard_normal(3)
            assert abs(p.f_smax(x, eps_prime) - p.f_max(x)) <= eps / 2 + 1e-12

    def test_eps_validation(self):
        with pytest.raises(InvalidParams):
            solve_smooth_max(QuadraticMaxProblem(np.zeros((1, 2))), -0.1)

    def test_auto_gamma_in_range(self):
        g = auto_gamma(4.0, 64.0, 6e4, 1.0, 1.0, 1.0, 0.45)
        assert 1e-10 <= g < 0.5


class TestMatrixGames:
    def test_zero_matrix_gap_zero(self):
        inst = MatrixGameInstance(np.zeros((3, 4)), "l2l1")
        x, rep = solve_matrix_game(inst, 0.1, seed=0)
        assert rep.extras["gap"] == pytest.approx(0.0, abs=1e-9)

    def test_eps_validation(self):
        inst = MatrixGameInstance(np.zeros((2, 2)), "l2l1")
        with pytest.raises(InvalidParams):
            solve_matrix_game(inst, 1.5)

    def test_dual_sampler_matches_softmax(self):
        rng = np.random.default_rng(4)
        rows = rng.standard_normal((6, 3))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        prob = LinearMaxProblem(rows)
        x = np.zeros(3)
        y = dual_from_samples(prob, x, 0.05, 4000, 1, 2)
        target = refcheck.exact_softmax_dist(prob, x, 0.05)
        assert refcheck.tv_distance(y, target) <= 0.06

    def test_polish_only_improves(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((5, 7))
        a /= np.linalg.norm(a, axis=0).max()
        inst = MatrixGameInstance(a, "l2l1")
        y0 = np.full(7, 1.0 / 7.0)
        y = polish_dual(inst, y0, steps=100)
        lb0 = refcheck.game_best_response_lower_bound(a, y0, True)
        lb1 = refcheck.game_best_response_lower_bound(a, y, True)
        assert lb1 >= lb0 - 1e-12
        assert y.min() >= 0 and y.sum() == pytest.approx(1.0)


class TestMeb:
    def test_level_and_repeat_counts(self):
        assert meb_level_count(0.01) == math.ceil(math.log2(400))
        assert meb_boost_repeats(9) == math.ceil(math.log2(90))

    def test_two_points(self):
        inst = MebInstance(np.array([[0.0, 0.0], [1.0, 0.0]]))
        c, r, _ = solve_meb(inst, 0.05, seed=0)
        np.testing.assert_allclose(c, [0.5, 0.0], atol=0.02)
        assert r == pytest.approx(0.5, abs=0.02)

    def test_single_point(self):
        c, r, _ = solve_meb(MebInstance(np.zeros((1, 3))), 0.1, seed=0)
        np.testing.assert_array_equal(c, np.zeros(3))
        assert r == 0.0

    def test_unnormalized_coordinates_roundtrip(self):
        pts = np.array([[5.0, 5.0], [9.0, 5.0], [7.0, 8.0]])
        inst = MebInstance(pts)
        c, r, _ = solve_meb(inst, 0.02, seed=1)
        wc, wr = refcheck.welzl_meb(inst.points)
        wc_in, wr_in = inst.to_input_coords(wc, wr)
        assert r <= 1.02 * wr_in
        assert np.max(np.linalg.norm(pts - c, axis=1)) <= r + 1e-6


class TestCrossMethodAgreement:
    def test_random_quadratics_against_long_baseline(self):
        rng = np.random.default_rng(30)
        centers = rng.standard_normal((10, 4)) * 0.4
        offsets = rng.random(10) * 0.2
        prob = QuadraticMaxProblem(centers, offsets)
        eps = 0.05
        rep = solve_smooth_max(prob, eps, seed=1)
        base = subgradient_baseline(prob, ball_setup(4), 400_000, seed=0)
        assert rep.f_max_value - base.f_max_value <= eps

    def test_game_value_matches_baseline(self):
        rng = np.random.default_rng(31)
        a = rng.standard_normal((40, 50))
        a /= np.linalg.norm(a, axis=0, keepdims=True)
        inst = MatrixGameInstance(a, "l2l1")
        eps = 0.1
        _, rep = solve_matrix_game(inst, eps, seed=2)
        base = subgradient_baseline(inst.problem(), ball_setup(40), 1_000_000, seed=0)
        assert abs(rep.f_max_value - base.f_max_value) <= 2 * eps


class TestBaseline:
    def test_norm_objective_reaches_origin(self):
        rows = np.vstack([np.eye(3), -np.eye(3)])
        rep = subgradient_baseline(LinearMaxProblem(rows), ball_setup(3), 30_000, seed=0)
        assert rep.f_max_value <= 0.01

    def test_identity_game_equalizer(self):
        prob = LinearMaxProblem(np.eye(2))
        rep = subgradient_baseline(prob, simplex_setup(2, 0.0), 40_000, seed=0)
        np.testing.assert_allclose(rep.x, [0.5, 0.5], atol=0.01)
        assert rep.f_max_value == pytest.approx(0.5, abs=0.01)

    def test_step_rule_validation(self):
        with pytest.raises(InvalidParams):
            subgradient_baseline(
                LinearMaxProblem(np.eye(2)), ball_setup(2), 10, step_rule="bogus"
            )
