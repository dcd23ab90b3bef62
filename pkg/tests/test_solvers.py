"""Sequential solver behavior: step algebra, degeneracies, convergence."""

import numpy as np
import pytest

from stoiht.model import EMPTY_SUPPORT, generate_instance
from stoiht.solvers import (
    SolverConfig,
    block_gradient_step,
    make_support_estimate,
    run_iht,
    run_stoiht,
    run_stoiht_oracle,
    sample_block,
)


class FixedDraws:
    """Stand-in rng producing a preset sequence of uniform draws."""

    def __init__(self, values):
        self._values = iter(values)

    def random(self):
        return next(self._values)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(s=-1)
    with pytest.raises(ValueError):
        SolverConfig(s=2, tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(s=2, max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(s=2, probs=np.array([0.5, -0.1, 0.6]))
    with pytest.raises(ValueError):
        SolverConfig(s=2, probs=np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        SolverConfig(s=2, probs=np.ones((2, 2)) / 4)


def test_block_probs_defaults_to_uniform_and_checks_length():
    cfg = SolverConfig(s=3)
    np.testing.assert_allclose(cfg.block_probs(4), np.full(4, 0.25))
    skew = SolverConfig(s=3, probs=np.array([0.7, 0.3]))
    np.testing.assert_allclose(skew.block_probs(2), [0.7, 0.3])
    with pytest.raises(ValueError):
        skew.block_probs(3)


def test_sample_block_boundaries_and_clamp():
    cumulative = np.array([0.2, 1.0])
    assert sample_block(FixedDraws([0.1999]), cumulative) == 0
    assert sample_block(FixedDraws([0.2]), cumulative) == 1
    assert sample_block(FixedDraws([0.9999]), cumulative) == 1
    # a draw above the last cumulative value (fp shortfall) clamps to the end
    short = np.array([0.3, 0.9999999999])
    assert sample_block(FixedDraws([0.99999999999]), short) == 1


def test_sample_block_never_picks_zero_probability_block():
    probs = np.array([0.0, 1.0])
    cumulative = np.cumsum(probs)
    rng = np.random.default_rng(0)
    draws = [sample_block(rng, cumulative) for _ in range(500)]
    assert set(draws) == {1}
    assert sample_block(FixedDraws([0.0]), cumulative) == 1


def test_block_gradient_step_rejects_zero_probability_block():
    problem = generate_instance(n=20, m=8, s=2, b=4, seed=0)
    probs = np.array([0.0, 1.0])
    with pytest.raises(ValueError):
        block_gradient_step(problem, np.zeros(20), 0, 1.0, probs)


def test_block_steps_average_to_full_gradient_step():
    # sum_i p_i * (x + gamma/(M p_i) A_i^T r_i) == x + (gamma/M) A^T (y - A x):
    # the importance weights cancel, leaving the full-gradient step at the
    # effective step size gamma/M regardless of the sampling distribution
    rng = np.random.default_rng(31)
    for trial in range(20):
        problem = generate_instance(n=40, m=20, s=4, b=5, noise_std=0.05,
                                    seed=trial)
        blocks = problem.num_blocks
        x = rng.standard_normal(40)
        gamma = float(rng.uniform(0.2, 2.0))
        if trial % 2 == 0:
            probs = np.full(blocks, 1.0 / blocks)
        else:
            raw = rng.uniform(0.1, 1.0, size=blocks)
            probs = raw / raw.sum()
        averaged = sum(probs[i] * block_gradient_step(problem, x, i, gamma, probs)
                       for i in range(blocks))
        full = x + (gamma / blocks) * (problem.A.T @ (problem.y - problem.A @ x))
        np.testing.assert_allclose(averaged, full, rtol=1e-10, atol=1e-12)


def test_single_block_instance_reduces_to_full_gradient_iht():
    problem = generate_instance(n=80, m=30, s=4, b=30, seed=2)
    cfg = SolverConfig(s=4, gamma=0.9, max_iters=200, seed=5)
    stochastic = run_stoiht(problem, cfg)
    full = run_iht(problem, cfg)
    assert stochastic.iterations == full.iterations
    assert np.array_equal(stochastic.residual_history, full.residual_history)
    assert np.array_equal(stochastic.x_hat, full.x_hat)


def test_oracle_with_empty_estimate_matches_plain_run_exactly():
    for seed in range(5):
        problem = generate_instance(n=100, m=40, s=5, b=8, seed=seed)
        cfg = SolverConfig(s=5, max_iters=60, seed=seed + 100)
        plain = run_stoiht(problem, cfg)
        assisted = run_stoiht_oracle(problem, cfg, EMPTY_SUPPORT)
        assert np.array_equal(plain.residual_history, assisted.residual_history)
        assert np.array_equal(plain.x_hat, assisted.x_hat)
        assert plain.converged == assisted.converged


def test_oracle_iterates_stay_within_two_s_nonzeros():
    problem = generate_instance(n=100, m=40, s=5, b=8, seed=3)
    cfg = SolverConfig(s=5, max_iters=40, seed=9)
    estimate = make_support_estimate(problem.true_support(), 0.0, 5, 100, seed=1)
    result = run_stoiht_oracle(problem, cfg, estimate)
    assert np.count_nonzero(result.x_hat) <= 10


def test_solvers_recover_noiseless_signal():
    problem = generate_instance(n=200, m=100, s=5, b=10, seed=8)
    cfg = SolverConfig(s=5, max_iters=800, seed=1)
    for runner in (run_stoiht, run_iht):
        result = runner(problem, cfg)
        assert result.converged, runner.__name__
        assert result.final_residual < cfg.tol
        assert result.final_error < 1e-5
        assert result.iterations == len(result.residual_history)
        assert result.final_residual == result.residual_history[-1]
        assert result.final_error == result.error_history[-1]


def test_runs_are_deterministic_and_seed_sensitive():
    problem = generate_instance(n=200, m=100, s=5, b=10, seed=8)
    cfg = SolverConfig(s=5, max_iters=400, seed=7)
    first = run_stoiht(problem, cfg)
    second = run_stoiht(problem, cfg)
    assert first.iterations == second.iterations
    assert np.array_equal(first.x_hat, second.x_hat)
    assert np.array_equal(first.residual_history, second.residual_history)
    other = run_stoiht(problem, SolverConfig(s=5, max_iters=400, seed=8))
    assert (other.iterations != first.iterations
            or not np.array_equal(other.residual_history, first.residual_history))


def test_run_stops_at_max_iters_without_convergence():
    problem = generate_instance(n=200, m=100, s=5, b=10, noise_std=0.5, seed=8)
    cfg = SolverConfig(s=5, max_iters=3, seed=0)
    result = run_stoiht(problem, cfg)
    assert not result.converged
    assert result.iterations == 3
    assert len(result.residual_history) == 3


def test_make_support_estimate_overlap_properties():
    problem = generate_instance(n=100, m=40, s=20, b=8, seed=0)
    true = problem.true_support()
    exact = make_support_estimate(true, 1.0, 20, 100, seed=1)
    assert np.array_equal(exact, true)
    miss = make_support_estimate(true, 0.0, 20, 100, seed=2)
    assert np.intersect1d(miss, true).size == 0
    assert miss.size == 20
    for seed in range(10):
        half = make_support_estimate(true, 0.5, 20, 100, seed=seed)
        assert half.size == 20
        assert np.unique(half).size == 20
        assert np.intersect1d(half, true).size == 10
        assert np.all(np.diff(half) > 0)


def test_make_support_estimate_rejects_bad_arguments():
    true = np.arange(20, dtype=np.intp)
    with pytest.raises(ValueError):
        make_support_estimate(true, 0.33, 20, 100, seed=0)   # 6.6 hits
    with pytest.raises(ValueError):
        make_support_estimate(np.arange(19), 1.0, 20, 100, seed=0)
    with pytest.raises(ValueError):
        make_support_estimate(true, 0.0, 20, 25, seed=0)     # complement too small
    # accuracy 0.25 * 20 = 5 is integral and fine
    est = make_support_estimate(true, 0.25, 20, 100, seed=0)
    assert np.intersect1d(est, true).size == 5
