import numpy as np
import pytest

from e2b.data import BalancingProblem, Dataset, build_problem, demean
from e2b.solver import (
    SolverOptions,
    balance_residual,
    kl_to_base,
    solve_dual,
    weights_from_dual,
)

from conftest import grid_search_multipliers, random_problem, solve_tight


class TestSolveDual:
    def test_symmetric_instance(self):
        p = BalancingProblem(np.array([[1.0, -1.0]]), np.zeros(2))
        sol = solve_dual(p)
        assert sol.converged
        np.testing.assert_allclose(sol.multipliers, [0.0], atol=1e-12)
        np.testing.assert_allclose(sol.weights, [0.5, 0.5], atol=1e-12)

    def test_base_weights_shift_the_multiplier(self):
        p = BalancingProblem(np.array([[1.0, -1.0]]), np.array([np.log(3.0), 0.0]))
        sol = solve_dual(p)
        np.testing.assert_allclose(sol.multipliers, [np.log(3.0) / 2.0], atol=1e-10)
        np.testing.assert_allclose(sol.weights, [0.5, 0.5], atol=1e-10)

    def test_matches_grid_search_oracle(self, rng):
        p = random_problem(rng, n=6, k=1)
        sol = solve_tight(p)
        oracle = grid_search_multipliers(p)
        np.testing.assert_allclose(sol.multipliers, oracle, atol=2e-3)

    def test_weights_positive_and_normalized(self, rng):
        for _ in range(10):
            p = random_problem(rng)
            sol = solve_dual(p)
            assert sol.converged
            assert (sol.weights > 0).all()
            assert abs(sol.weights.sum() - 1.0) < 1e-12

    def test_converged_means_small_residual(self, rng):
        p = random_problem(rng)
        sol = solve_dual(p)
        assert sol.converged
        assert np.abs(balance_residual(p, sol.weights)).max() <= 1e-9

    def test_non_convergence_reported_not_raised(self):
        p = BalancingProblem(np.array([[1.0, 2.0, 3.0]]), np.zeros(3))
        sol = solve_dual(p, SolverOptions(max_iter=1))
        assert not sol.converged
        assert sol.grad_norm > 0

    def test_all_zero_row_warns(self):
        g = np.array([[1.0, -1.0], [0.0, 0.0]])
        with pytest.warns(UserWarning, match="all zero"):
            solve_dual(BalancingProblem(g, np.zeros(2)))

    def test_shift_in_base_weights_is_absorbed(self, rng):
        p = random_problem(rng)
        sol = solve_dual(p)
        shifted = solve_dual(p.with_log_base_weights(p.log_base_weights + 3.7))
        np.testing.assert_allclose(shifted.multipliers, sol.multipliers, atol=1e-8)
        np.testing.assert_allclose(shifted.weights, sol.weights, atol=1e-10)

    def test_bitwise_deterministic(self, rng):
        p = random_problem(rng)
        first = solve_dual(p)
        second = solve_dual(p)
        assert first.multipliers.tobytes() == second.multipliers.tobytes()
        assert first.weights.tobytes() == second.weights.tobytes()


class TestWeightsFromDual:
    def test_constant_logits_give_uniform(self):
        p = BalancingProblem(np.zeros((1, 4)), np.full(4, 2.5))
        np.testing.assert_allclose(weights_from_dual(p, np.zeros(1)), 0.25, atol=1e-15)

    def test_closed_form(self):
        p = BalancingProblem(np.zeros((1, 3)), np.log([1.0, 2.0, 5.0]))
        np.testing.assert_allclose(
            weights_from_dual(p, np.zeros(1)), [0.125, 0.25, 0.625], atol=1e-14
        )

    def test_shift_invariance(self, rng):
        p = random_problem(rng)
        lam = rng.standard_normal(p.n_constraints)
        w1 = weights_from_dual(p, lam)
        w2 = weights_from_dual(p.with_log_base_weights(p.log_base_weights + 11.0), lam)
        np.testing.assert_allclose(w1, w2, atol=1e-12)


class TestBalanceResidual:
    def test_uniform_weights_on_demeaned_data(self, rng):
        d = Dataset(
            x=rng.standard_normal((30, 2)), a=rng.standard_normal(30), y=rng.standard_normal(30)
        )
        centered, expansion = demean(d)
        p = build_problem(centered, expansion, np.zeros(30))
        res = balance_residual(p, np.full(30, 1.0 / 30.0))
        np.testing.assert_allclose(res[: expansion.K + 1], 0.0, atol=1e-10)

    def test_hand_instance(self):
        p = BalancingProblem(np.array([[1.0, -1.0]]), np.zeros(2))
        np.testing.assert_allclose(balance_residual(p, np.array([0.75, 0.25])), [0.5])


class TestKlToBase:
    def test_identical_distributions(self):
        assert kl_to_base(np.full(4, 0.25), np.full(4, 3.0)) == pytest.approx(0.0, abs=1e-14)

    def test_closed_form(self):
        value = kl_to_base(np.array([0.75, 0.25]), np.zeros(2))
        expected = 0.75 * np.log(1.5) + 0.25 * np.log(0.5)
        assert value == pytest.approx(expected, rel=1e-12)

    def test_solution_beats_feasible_perturbations(self, rng):
        """Project random perturbations back onto the constraints; KL must rise."""
        for _ in range(5):
            p = random_problem(rng, n=5, k=1)
            sol = solve_tight(p)
            base_kl = kl_to_base(sol.weights, p.log_base_weights)
            g_full = np.vstack([p.constraints, np.ones(p.n)])  # moments + normalization
            null_basis = np.linalg.svd(g_full)[2][np.linalg.matrix_rank(g_full):]
            assert null_basis.shape[0] > 0
            for _ in range(10):
                delta = 0.05 * (rng.standard_normal(null_basis.shape[0]) @ null_basis)
                cand = sol.weights + delta
                if (cand <= 0).any():
                    continue
                np.testing.assert_allclose(p.constraints @ cand, 0.0, atol=1e-8)
                assert kl_to_base(cand, p.log_base_weights) > base_kl
