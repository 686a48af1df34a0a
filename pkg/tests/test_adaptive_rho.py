"""Tests for the trial-penalty framework, Phase I and the solve dispatcher."""

import math

import numpy as np
import pytest

from proxal.adaptive_rho import (
    AdaptiveSchedule,
    adaptive_solve,
    phase1_feasibility,
    predicted_trials,
    schedule,
    solve,
)
from proxal.certify import check_1o
from proxal.errors import PreconditionError
from proxal.problems import ConstantsLedger
from proxal.proximal_al import InnerSettings, SolverConfig, rho_lower_bound


class TestSchedule:
    def test_eta_one(self):
        assert schedule(2, AdaptiveSchedule(q=10.0, T0=5, eta=1.0)) == (100.0, 501)

    def test_eta_zero(self):
        rho, T = schedule(1, AdaptiveSchedule(q=10.0, T0=5, eta=0.0, epsilon=0.1))
        assert rho == pytest.approx(1.0)
        assert T == 51

    def test_eta_two_keeps_the_floor(self):
        assert schedule(3, AdaptiveSchedule(q=2.0, T0=4, eta=2.0, epsilon=0.1)) == (8.0, 4)

    @pytest.mark.parametrize("eta", [0.0, 0.5, 1.0, 1.5, 2.0])
    @pytest.mark.parametrize("q", [1.0001, 2.0, 10.0])
    def test_monotone(self, eta, q):
        sched = AdaptiveSchedule(q=q, T0=3, eta=eta, epsilon=1e-3)
        values = [schedule(tau, sched) for tau in range(1, 15)]
        for (rho, T), (rho_next, T_next) in zip(values, values[1:]):
            assert rho_next >= rho
            assert T_next >= T

    @pytest.mark.parametrize("fields", [{"q": 1.0}, {"T0": 0}, {"eta": 2.5}, {"epsilon": 0.0}])
    def test_invalid_schedule(self, fields):
        with pytest.raises(PreconditionError):
            AdaptiveSchedule(**fields)

    def test_tau_starts_at_one(self):
        with pytest.raises(PreconditionError):
            schedule(0, AdaptiveSchedule())

    def test_predicted_trials(self):
        assert predicted_trials(1e-4, 1.0, 10.0) == pytest.approx(4.0)
        assert predicted_trials(1e-4, 2.0, 10.0) == pytest.approx(8.0)


class TestPhase1:
    def test_reaches_the_unit_circle(self, sphere):
        result = phase1_feasibility(sphere, np.array([2.0, 0.0]), 100.0, 1e-4, c0=1.0)
        assert result.feasible
        assert result.threshold == pytest.approx(0.1)
        assert result.c_norm**2 <= 0.01
        assert abs(float(result.x @ result.x) - 1.0) <= 0.1

    def test_feasible_start_returns_immediately(self, sphere):
        x_init = np.array([0.6, 0.8])
        result = phase1_feasibility(sphere, x_init, 10.0, 1e-3)
        assert result.feasible
        assert result.inner.iterations == 0
        np.testing.assert_array_equal(result.x, x_init)

    @pytest.mark.parametrize("x_init", [[0.0, 0.0], [0.3, -0.2]])
    def test_infeasible_critical_point(self, infeasible_problem, x_init):
        result = phase1_feasibility(infeasible_problem, np.array(x_init), 100.0, 1e-6)
        assert not result.feasible
        assert result.infeasible_critical
        assert result.c_norm == pytest.approx(1.0, abs=1e-6)
        assert abs(result.x[0]) <= 1e-3

    def test_inner_budget_is_not_infeasibility(self, sphere):
        result = phase1_feasibility(sphere, np.array([50.0, 0.0]), 100.0, 1e-4, inner=InnerSettings(max_iters=1))
        assert not result.feasible
        assert result.status == "budget_exhausted"
        assert not result.infeasible_critical

    def test_positive_parameters_required(self, sphere):
        with pytest.raises(PreconditionError):
            phase1_feasibility(sphere, np.zeros(2), 0.0, 1e-3)


class TestAdaptiveSolve:
    def test_sphere_linear_converges(self, sphere):
        config = SolverConfig(epsilon=1e-4, eta=1.0)
        sched = AdaptiveSchedule(q=10.0, T0=20, eta=1.0, epsilon=1e-4)
        result = adaptive_solve(sphere, config, sched, np.array([0.0, 1.0]))
        assert result.status == "converged_1o"
        assert 1 <= result.tau_final <= 60
        assert check_1o(sphere, result.record.x_final, result.record.lam_final, 1e-4).is_1o()

    def test_kkt_start_stops_in_first_trial(self, sphere):
        config = SolverConfig(epsilon=1e-6)
        sched = AdaptiveSchedule(eta=2.0, epsilon=1e-6, lambda0=(0.5,))
        result = adaptive_solve(sphere, config, sched, np.array([-1.0, 0.0]))
        assert result.tau_final == 1
        assert result.record.stop_index == 1

    def test_multipliers_reset_every_trial(self, sphere):
        config = SolverConfig(epsilon=1e-6)
        sched = AdaptiveSchedule(q=10.0, T0=1, eta=2.0, epsilon=1e-6)
        result = adaptive_solve(sphere, config, sched, np.array([0.0, 1.0]))
        assert len(result.trials) >= 2
        assert all(trial["lambda_start"] == [0.0] for trial in result.trials)
        assert result.aggregate.outer_iterations == sum(t["outer_iterations"] for t in result.trials)
        assert [t["rho"] for t in result.trials] == sorted(t["rho"] for t in result.trials)

    def test_start_points_from_provider(self, sphere):
        starts = []

        def provider(tau):
            starts.append(tau)
            return [0.0, 1.0]

        config = SolverConfig(epsilon=1e-4, eta=1.0)
        result = adaptive_solve(sphere, config, AdaptiveSchedule(eta=1.0, epsilon=1e-4), [5.0, 5.0], z_provider=provider)
        assert result.record.converged
        assert starts == list(range(1, result.tau_final + 1))
        np.testing.assert_array_equal(result.record.x0, [0.0, 1.0])

    def test_slow_growth_hits_the_cap(self, sphere):
        config = SolverConfig(epsilon=1e-6)
        sched = AdaptiveSchedule(q=1.0001, T0=1, eta=2.0, epsilon=1e-6)
        result = adaptive_solve(sphere, config, sched, np.array([0.0, 1.0]), trial_cap=4)
        assert result.status in ("converged_1o", "max_trials_reached")
        assert len(result.trials) <= 4
        rhos = [trial["rho"] for trial in result.trials]
        assert all(later > earlier for earlier, later in zip(rhos, rhos[1:]))

    def test_trial_cap(self, sphere):
        config = SolverConfig(epsilon=1e-6)
        sched = AdaptiveSchedule(q=10.0, T0=1, eta=2.0, epsilon=1e-6)
        result = adaptive_solve(sphere, config, sched, np.array([0.0, 1.0]), trial_cap=1)
        assert result.status == "max_trials_reached"
        assert result.tau_final == 1
        assert len(result.trials) == 1

    def test_infeasible_phase1_stops_the_framework(self, infeasible_problem):
        config = SolverConfig(epsilon=1e-4)
        result = adaptive_solve(infeasible_problem, config, AdaptiveSchedule(epsilon=1e-4), np.zeros(2))
        assert result.status == "phase1_infeasible"
        assert result.record is None
        assert result.aggregate.outer_iterations == 0

    def test_phase1_budget_stops_the_framework(self, sphere):
        config = SolverConfig(epsilon=1e-3, inner=InnerSettings(max_iters=1))
        result = adaptive_solve(sphere, config, AdaptiveSchedule(epsilon=1e-3), np.array([50.0, 0.0]))
        assert result.status == "phase1_budget_exhausted"
        assert result.record is None

    def test_inner_cap_grows_with_trials(self, sphere):
        config = SolverConfig(epsilon=1e-5)
        sched = AdaptiveSchedule(q=10.0, T0=20, eta=2.0, epsilon=1e-5)
        result = adaptive_solve(sphere, config, sched, np.array([0.0, 1.0]), inner_cap0=0.1)
        # trial τ allows ⌈0.1·10^τ⌉ inner iterations
        for trial in result.trials:
            assert trial["status"] in ("converged_1o", "inner_budget_exhausted", "max_outer_reached")
        assert result.record.converged

    @pytest.mark.slow
    def test_trial_count_grows_slowly(self, sphere):
        taus = []
        for epsilon in [1e-2, 1e-3, 1e-4, 1e-5]:
            config = SolverConfig(epsilon=epsilon, eta=1.0)
            result = adaptive_solve(sphere, config, AdaptiveSchedule(eta=1.0, epsilon=epsilon), np.array([0.0, 1.0]))
            assert result.record.converged
            assert check_1o(sphere, result.record.x_final, result.record.lam_final, epsilon).is_1o()
            taus.append(result.tau_final)
        assert all(later - earlier <= 2 for earlier, later in zip(taus, taus[1:]))


class TestSolveDispatcher:
    def test_fixed_penalty(self, sphere):
        result = solve(sphere, SolverConfig(epsilon=1e-4, rho=50.0), np.array([0.0, 1.0]))
        assert result.policy == "fixed"
        assert result.rho == 50.0
        assert result.adaptive is None

    def test_penalty_from_ledger(self, sphere):
        ledger = ConstantsLedger(M_f=1.0, L_f=0.0, M_c=2.0, L_c=2.0, sigma=2.0, rho0=0.0, R=1.0)
        config = SolverConfig(epsilon=0.1, eta=1.0)
        result = solve(sphere, config, np.array([0.0, 1.0]), ledger=ledger, d_s=2.0)
        assert result.policy == "ledger"
        assert result.rho == pytest.approx(rho_lower_bound(ledger, 0.1, 1.0, 0.05, 2.0))
        assert result.record.converged

    @pytest.mark.parametrize(
        "problem_fixture, x0, x_star, lam_star",
        [("sphere", [0.0, 1.0], [-1.0, 0.0], [0.5]), ("qp", [1.0, 0.0], [0.5, 0.5], [-0.5])],
    )
    def test_adaptive_kkt_recovery(self, request, problem_fixture, x0, x_star, lam_star):
        problem = request.getfixturevalue(problem_fixture)
        result = solve(problem, SolverConfig(epsilon=1e-6, eta=2.0), np.array(x0))
        assert result.policy == "adaptive"
        assert result.status == "converged_1o"
        np.testing.assert_allclose(result.record.x_final, x_star, atol=1e-5)
        np.testing.assert_allclose(result.record.lam_final, lam_star, atol=1e-3)
        assert math.isfinite(result.rho)
        assert result.certificate.is_1o()
