import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import make_params, random_problem
from thermoflex.capability import provision_thresholds, thresholds_for_interval
from thermoflex.errors import ConfigurationError, ParameterError
from thermoflex.dispatch import (
    BuildingSnapshot,
    DispatchMethod,
    DispatchProblem,
    default_penalty,
    evaluate,
    feasible_box,
    proportional_dispatch,
    solve,
    solve_lifted,
    solve_oracle,
)
from thermoflex.fleet import DEFAULT_DT, Fleet, raw_step

DT = DEFAULT_DT


def snapshot(params=None, set_point=None, capacity=None, x=None):
    fleet = Fleet.from_params(params or make_params())
    x = fleet.steady_state() if x is None else x
    set_point = fleet.params.set_point if set_point is None else set_point
    capacity = 0.5 * fleet.baseline if capacity is None else capacity
    return BuildingSnapshot(x, set_point, fleet.params, fleet.rates, fleet.baseline, capacity,
                            float(fleet.mats.c_row @ x))


def dr_max_of(snap):
    return thresholds_for_interval(snap.x, snap.params.population, snap.rates, feasible_box(snap, DT))[1]


class TestProblem:
    def test_needs_buildings(self):
        with pytest.raises(ParameterError):
            DispatchProblem([], 0.0, DT)

    def test_penalty_positive(self):
        with pytest.raises(ParameterError):
            DispatchProblem([snapshot()], 0.0, DT, penalty=0.0)

    def test_default_penalty_scale(self):
        snap = snapshot()
        problem = DispatchProblem([snap], 0.0, DT)
        width_ref = snap.params.population * snap.rates.total
        assert default_penalty(problem) == pytest.approx(1e3 * width_ref / dr_max_of(snap) ** 2)


class TestWidth:
    def test_centered_width(self):
        snap = snapshot(make_params(set_band_width=50.0))
        x1 = raw_step(snap.x, 0.0, DT, snap.mats)
        sol = solve(DispatchProblem([snap], 0.0, DT))
        expected = snap.params.population * (x1[9] + x1[19]) * (snap.rates.beta + snap.rates.alpha)
        assert sol.width[0] == pytest.approx(expected, rel=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.0, 1.0))
    def test_width_is_next_threshold_span(self, seed, frac):
        rng = np.random.default_rng(seed)
        problem = random_problem(rng, 1)
        snap = problem.snapshots[0]
        lo, hi = feasible_box(snap, DT)
        u = lo + frac * (hi - lo)
        x1 = raw_step(snap.x, u, DT, snap.mats)
        p = snap.params
        t1 = min(max(snap.set_point + u * DT * p.bin_width, p.set_point_min), p.set_point_max)
        dr_min, dr_max = provision_thresholds(x1, t1, p, snap.rates, DT)
        # dispatching exactly the ramp that u produces leaves no spinning reserve, so the objective is the width
        ramp = thresholds_for_interval(snap.x, p.population, snap.rates, (u, u))[0]
        width = evaluate(DispatchProblem([snap], ramp, DT), [u])
        assert width == pytest.approx(dr_max - dr_min, rel=1e-9, abs=1e-9)


class TestSolve:
    def test_symmetric_zero(self):
        problem = DispatchProblem([snapshot(), snapshot()], 0.0, DT)
        sol = solve(problem)
        assert_allclose(sol.u, 0.0, atol=1e-9)
        assert_allclose(sol.delta_r, 0.0, atol=1e-6)
        assert abs(sol.p_spin) < 1e-6
        assert sol.method is DispatchMethod.OPTIMIZED

    def test_single_building_takes_everything(self):
        snap = snapshot()
        delta_p = 0.5 * dr_max_of(snap)
        sol = solve(DispatchProblem([snap], delta_p, DT))
        # the penalty leaves a residue far below one appliance per minute
        assert abs(sol.p_spin) < 1e-3
        assert sol.delta_r[0] == pytest.approx(delta_p, abs=1e-3)

    def test_heterogeneous_against_oracle(self):
        a = snapshot(make_params(n_bins=8, t_on=8.0, t_off=16.0))
        b = snapshot(make_params(n_bins=5, t_on=20.0, t_off=10.0, population=600.0), set_point=22.4)
        problem = DispatchProblem([a, b], 0.8 * (dr_max_of(a) + dr_max_of(b)), DT)
        opt, oracle = solve(problem), solve_oracle(problem)
        assert opt.objective == pytest.approx(oracle.objective, rel=1e-3)

    def test_deterministic(self, rng):
        problem = random_problem(rng, 3)
        first, second = solve(problem, seed=7), solve(problem, seed=7)
        assert_allclose(first.u, second.u, rtol=0, atol=0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 4))
    def test_invariants(self, seed, m):
        problem = random_problem(np.random.default_rng(seed), m)
        for sol in (solve(problem), proportional_dispatch(problem)):
            assert abs(sol.delta_r.sum() + sol.p_spin - problem.delta_p) < 1e-9 * max(1.0, abs(problem.delta_p))
            for snap, u in zip(problem.snapshots, sol.u):
                lo, hi = feasible_box(snap, DT)
                assert lo - 1e-12 <= u <= hi + 1e-12
                assert -snap.rates.beta - 1e-12 <= u <= snap.rates.alpha + 1e-12
                # the next consumption stays inside the sold band unless the band is out of reach
                if lo < hi:
                    nxt = snap.output + DT * (snap.params.population * (snap.rates.alpha * snap.x[snap.params.n_bins - 1]
                                              - snap.rates.beta * snap.x[-1]) - snap.params.population
                                              * (snap.x[snap.params.n_bins - 1] + snap.x[-1]) * u)
                    assert snap.baseline - snap.capacity - 1e-6 <= nxt <= snap.baseline + snap.capacity + 1e-6
        opt, prop = solve(problem), proportional_dispatch(problem)
        assert opt.objective >= prop.objective - 1e-9 * max(1.0, abs(prop.objective))

    @pytest.mark.filterwarnings("ignore:Values in x were outside bounds")
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 3))
    @example(seed=1097, m=2)  # flat ridge: a different u with the same objective
    def test_lifted_problem_same_optimum(self, seed, m):
        problem = random_problem(np.random.default_rng(seed), m)
        sol = solve(problem)
        lifted = solve_lifted(problem, sol.u)
        # starting with slack m variables, the lifted solve pushes each up to its min(); SLSQP only
        # meets the m <= min() constraints to its feasibility tolerance
        for snap, u, m1, m2 in zip(problem.snapshots, lifted["u"], lifted["m1"], lifted["m2"]):
            p = snap.params
            step = DT * p.bin_width
            assert m1 == pytest.approx(min((snap.set_point - p.set_point_min) / step + u, snap.rates.beta),
                                       rel=1e-5, abs=1e-5)
            assert m2 == pytest.approx(min((p.set_point_max - snap.set_point) / step - u, snap.rates.alpha),
                                       rel=1e-5, abs=1e-5)
        # the true objective at the lifted optimum cannot beat ours
        scale = max(1.0, abs(sol.objective))
        assert evaluate(problem, lifted["u"], sol.penalty) <= sol.objective + 1e-9 * scale
        assert lifted["objective"] <= sol.objective + 1e-4 * scale

    def test_strict_dominance_when_proportional_saturates(self):
        a = snapshot(make_params(n_bins=4, t_on=5.0, t_off=20.0, set_band_width=4.0), capacity=400.0)
        b = snapshot(make_params(n_bins=4, t_on=20.0, t_off=5.0, set_band_width=4.0), capacity=400.0)
        delta_p = 0.9 * (dr_max_of(a) + dr_max_of(b))
        problem = DispatchProblem([a, b], delta_p, DT)
        prop = proportional_dispatch(problem)
        assert abs(prop.p_spin) > 1.0
        assert solve(problem).objective > prop.objective


class TestOracle:
    def test_refuses_large(self, rng):
        with pytest.raises(ConfigurationError):
            solve_oracle(random_problem(rng, 4))

    def test_refuses_coarse(self, rng):
        with pytest.raises(ConfigurationError):
            solve_oracle(random_problem(rng, 1), grid_points=100)

    def test_grid_doubling_stable(self, rng):
        problem = random_problem(rng, 1)
        coarse = solve_oracle(problem, grid_points=201)
        fine = solve_oracle(problem, grid_points=401)
        assert abs(fine.objective - coarse.objective) < 1e-4 * max(1.0, abs(fine.objective))

    def test_symmetric_pair(self):
        problem = DispatchProblem([snapshot(), snapshot()], 20.0, DT)
        sol = solve_oracle(problem)
        assert sol.u[0] == pytest.approx(sol.u[1], abs=1e-3)

    def test_dominates_proportional(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            problem = random_problem(rng, int(rng.integers(1, 3)))
            oracle, prop = solve_oracle(problem), proportional_dispatch(problem)
            assert oracle.objective >= prop.objective - 1e-6 * max(1.0, abs(prop.objective))
            assert abs(oracle.balance_residual - problem.delta_p) < 1e-9 * max(1.0, abs(problem.delta_p))


class TestProportional:
    def test_equal_split(self):
        problem = DispatchProblem([snapshot(capacity=100.0), snapshot(capacity=100.0)], 60.0, DT)
        sol = proportional_dispatch(problem)
        assert_allclose(sol.delta_r, [30.0, 30.0], rtol=1e-12)
        assert sol.p_spin == pytest.approx(0.0, abs=1e-9)

    def test_capacity_weights(self):
        problem = DispatchProblem([snapshot(capacity=100.0), snapshot(capacity=300.0)], 40.0, DT)
        assert_allclose(proportional_dispatch(problem).delta_r, [10.0, 30.0], rtol=1e-12)

    def test_clamp_spills_to_spin(self):
        # set point at the floor: no upward ramp beyond the natural drift
        pinned = snapshot(set_point=21.0, capacity=100.0)
        free = snapshot(capacity=100.0)
        cap = dr_max_of(pinned)
        problem = DispatchProblem([pinned, free], 60.0, DT)
        sol = proportional_dispatch(problem)
        assert sol.delta_r[0] == pytest.approx(cap, abs=1e-9)
        assert sol.delta_r[1] == pytest.approx(30.0)
        assert sol.p_spin == pytest.approx(30.0 - cap)

    def test_zero(self):
        sol = proportional_dispatch(DispatchProblem([snapshot(), snapshot()], 0.0, DT))
        assert_allclose(sol.delta_r, 0.0, atol=1e-12)
        assert sol.p_spin == pytest.approx(0.0, abs=1e-12)
