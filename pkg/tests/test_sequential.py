import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lassoscreen import (HalfSpace, Sphere, dass_solve, dome_diameter,
                         geometric_schedule, make_dome, make_instance,
                         next_lambda_feedback, primal_objective, solve_lasso,
                         solve_screened)
from lassoscreen.screening import TestSpec, tht_test
from lassoscreen.sequential import TRACE_HEADER, halfspace_from_dual_solution

from helpers import random_problem, random_unit, tiny_instance


class TestGeometricSchedule:
    def test_three_point_example(self):
        lams = geometric_schedule(0.95, 0.095, 3)
        assert lams[0] == pytest.approx(0.95)
        assert lams[1] == pytest.approx(0.95 * np.sqrt(0.1))
        assert lams[-1] == pytest.approx(0.095)

    def test_two_points(self):
        assert np.allclose(geometric_schedule(1.0, 0.2, 2), [1.0, 0.2])

    @settings(max_examples=40, deadline=None, derandomize=True)
    @given(st.floats(0.01, 0.9), st.floats(1.0, 10.0), st.integers(2, 30))
    def test_constant_ratio(self, lt_frac, l1, n):
        lt = lt_frac * l1
        lams = geometric_schedule(l1, lt, n)
        ratios = lams[1:] / lams[:-1]
        assert np.all(np.abs(ratios - ratios[0]) <= 1e-12)
        assert lams[0] == l1 and lams[-1] == lt

    def test_validation(self):
        with pytest.raises(ValueError):
            geometric_schedule(0.5, 0.9, 3)
        with pytest.raises(ValueError):
            geometric_schedule(1.0, 0.1, 1)


class TestFeedbackRule:
    def test_orthogonal_example(self):
        y = np.array([1.0, 0.0])
        n = np.array([0.0, 1.0])
        assert next_lambda_feedback(1.0, n, y, 0.5) == pytest.approx(0.8)

    def test_monotone_in_radius(self):
        y = np.array([1.0, 0.0])
        n = np.array([0.0, 1.0])
        lams = [next_lambda_feedback(1.0, n, y, R)
                for R in (0.1, 1.0, 10.0, 1000.0)]
        assert all(a > b for a, b in zip(lams, lams[1:]))
        assert lams[-1] < 1e-2  # R -> infinity drives lambda to 0

    def test_parallel_fallback(self):
        y = np.array([2.0, 0.0])
        n = np.array([1.0, 0.0])
        assert next_lambda_feedback(1.0, n, y, 0.5,
                                    lambda_floor=0.07) == 0.07

    def test_diameter_guarantee(self, rng):
        # the dome built from (lambda_prev, lambda_next) has diameter <= R
        for _ in range(50):
            dim = int(rng.integers(2, 6))
            y = rng.normal(size=dim)
            n = random_unit(rng, dim)
            lam_prev = rng.uniform(0.3, 2.0)
            R = rng.uniform(0.05, 1.0)
            lam_next = next_lambda_feedback(lam_prev, n, y, R)
            if lam_next == 0.0:
                continue
            delta = 2.0 * (1.0 / lam_next - 1.0 / lam_prev) * np.sqrt(
                max(float(y @ y) - float(n @ y) ** 2, 0.0))
            assert delta <= R + 1e-9

    def test_validation(self):
        y = np.array([1.0, 0.0])
        with pytest.raises(ValueError):
            next_lambda_feedback(1.0, np.array([2.0, 0.0]), y, 0.5)
        with pytest.raises(ValueError):
            next_lambda_feedback(1.0, np.array([1.0, 0.0]), y, -1.0)


class TestDass:
    def test_two_steps_when_radius_large(self, rng):
        d, y = random_problem(rng, n=20, p=100)
        lmax = make_instance(d, y, ratio=1.0).lambda_max
        sol, trace = dass_solve(d, y, 0.1 * lmax, radius=20.0)
        assert trace.n_steps == 2
        assert trace.lambdas[0] == pytest.approx(0.95 * lmax)
        assert trace.lambdas[-1] == pytest.approx(0.1 * lmax)

    def test_tiny_instance_matches_full(self):
        d, inst = tiny_instance(lam=0.1)
        sol, trace = dass_solve(d, inst.y, 0.1, radius=0.2)
        full = solve_lasso(d, inst)
        a = primal_objective(d, inst, sol.w)
        b = primal_objective(d, inst, full.w)
        assert abs(a - b) <= 1e-6 * max(abs(b), 1e-12)
        assert trace.lambdas[-1] == pytest.approx(0.1)

    def test_diameters_bounded(self, rng):
        d, y = random_problem(rng, n=15, p=120)
        lmax = make_instance(d, y, ratio=1.0).lambda_max
        R = 0.3
        sol, trace = dass_solve(d, y, 0.07 * lmax, radius=R)
        assert trace.n_steps >= 2
        for diam in trace.dome_diameters[1:]:
            assert diam <= R + 1e-9
        assert all(a > b for a, b in zip(trace.lambdas, trace.lambdas[1:]))

    def test_lambda_t_above_lambda_max(self, rng):
        d, y = random_problem(rng, n=10, p=30)
        lmax = make_instance(d, y, ratio=1.0).lambda_max
        sol, trace = dass_solve(d, y, 1.5 * lmax, radius=0.2)
        assert np.allclose(sol.w, 0.0)
        assert trace.n_steps == 1

    def test_lambda_t_between_095_and_max(self, rng):
        d, y = random_problem(rng, n=10, p=30)
        lmax = make_instance(d, y, ratio=1.0).lambda_max
        sol, trace = dass_solve(d, y, 0.97 * lmax, radius=0.2)
        assert trace.n_steps == 1
        assert trace.lambdas[0] == pytest.approx(0.97 * lmax)

    def test_open_loop_same_final_solution(self, rng):
        # geometric schedule with sequential THT lands on the same optimum
        d, y = random_problem(rng, n=12, p=80)
        lmax = make_instance(d, y, ratio=1.0).lambda_max
        lambda_t = 0.15 * lmax
        sol_dass, _ = dass_solve(d, y, lambda_t, radius=0.4)
        lams = geometric_schedule(0.95 * lmax, lambda_t, 5)
        sol = None
        prev = None
        for lam in lams:
            inst = make_instance(d, y, lam=lam)
            spec = TestSpec("tht") if prev is None else TestSpec(
                "tht", dual_solution=prev[:2], dual_gap=prev[2])
            rep = tht_test(d, inst, spec)
            sol, _ = solve_screened(d, inst, rep)
            prev = (lam, sol.theta, max(sol.gap, 0.0))
        inst_t = make_instance(d, y, lam=lambda_t)
        a = primal_objective(d, inst_t, sol_dass.w)
        b = primal_objective(d, inst_t, sol.w)
        assert abs(a - b) <= 1e-6 * max(abs(b), 1e-12)

    def test_validation(self, rng):
        d, y = random_problem(rng, n=6, p=10)
        with pytest.raises(ValueError):
            dass_solve(d, y, 0.1, radius=0.0)
        with pytest.raises(ValueError):
            dass_solve(d, y, -0.1, radius=0.5)


class TestTrace:
    def test_csv_round_trip(self, rng, tmp_path):
        d, y = random_problem(rng, n=10, p=60)
        lmax = make_instance(d, y, ratio=1.0).lambda_max
        _, trace = dass_solve(d, y, 0.2 * lmax, radius=0.5)
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(TRACE_HEADER)
        assert len(lines) == trace.n_steps + 1
        first = lines[1].split(",")
        assert int(first[0]) == 1
        assert float(first[1]) == pytest.approx(trace.lambdas[0])

    def test_prop1_matches_lemma_diameter(self, rng):
        # the closed-form step diameter equals the generic dome diameter
        d, y = random_problem(rng, n=10, p=60)
        lam0 = 0.8 * make_instance(d, y, ratio=1.0).lambda_max
        prev = solve_lasso(d, make_instance(d, y, lam=lam0))
        lam1 = 0.6 * lam0
        hs = halfspace_from_dual_solution(y, lam0, prev.theta)
        q = y / lam1
        dome = make_dome(Sphere(q, float(np.linalg.norm(q - prev.theta))),
                         hs)
        n = hs.normal
        prop1 = 2.0 * (1.0 / lam1 - 1.0 / lam0) * np.sqrt(
            max(float(y @ y) - float(n @ y) ** 2, 0.0))
        assert dome_diameter(dome) == pytest.approx(prop1, rel=1e-9)
