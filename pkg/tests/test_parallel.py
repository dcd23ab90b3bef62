"""Threaded executor: sequential reduction, conservation, read instrumentation."""

import sys

import numpy as np
import pytest

from stoiht.model import generate_instance
from stoiht.parallel import (
    InstrumentedTally,
    ParallelResult,
    SharedTally,
    StopSignal,
    run_parallel,
    torn_read_stress,
)
from stoiht.solvers import SolverConfig
from stoiht.tally import Tally, make_cores, tally_iteration


def run_sequential_tally(problem, cfg):
    """Single-core tally loop, the deterministic twin of run_parallel(.., 1)."""
    core = make_cores(problem, cfg, 1)[0]
    tally = Tally(problem.n)
    while core.t <= cfg.max_iters:
        if tally_iteration(problem, core, tally, cfg):
            break
    return core, tally


def test_single_worker_matches_sequential_loop():
    problem = generate_instance(n=150, m=60, s=6, b=10, seed=3)
    cfg = SolverConfig(s=6, max_iters=800, seed=3)
    result = run_parallel(problem, cfg, workers=1)
    core, tally = run_sequential_tally(problem, cfg)
    assert result.converged
    assert result.winner == 0
    assert result.iterations == core.converged_at
    assert np.array_equal(result.x_hat, core.x)
    assert result.final_residual == core.residual_history[-1]
    assert result.worker_iterations == [core.completed]
    assert result.tally_total == tally.total()


def test_parallel_workers_converge_and_conserve_votes():
    for workers in (2, 4):
        problem = generate_instance(n=200, m=100, s=5, b=10, seed=workers)
        cfg = SolverConfig(s=5, max_iters=2000, seed=workers)
        result = run_parallel(problem, cfg, workers=workers)
        assert result.converged
        assert result.final_residual < cfg.tol
        assert result.winner is not None
        assert len(result.worker_iterations) == workers
        # quiescence: every vote matched by its retraction except the latest
        assert result.tally_total == cfg.s * sum(result.worker_iterations)
        assert np.count_nonzero(result.x_hat) <= 2 * cfg.s


def test_run_parallel_validates_arguments():
    problem = generate_instance(n=30, m=12, s=3, b=4, seed=0)
    cfg = SolverConfig(s=3)
    with pytest.raises(ValueError):
        run_parallel(problem, cfg, workers=0)
    with pytest.raises(ValueError):
        run_parallel(problem, cfg, workers=2, slow_fraction=0.3)


def test_wall_clock_guard_stops_hopeless_runs():
    # heavy noise keeps the residual far above tol; the guard must end the run
    problem = generate_instance(n=120, m=48, s=6, b=8, noise_std=2.0, seed=1)
    cfg = SolverConfig(s=6, max_iters=10**6, seed=1)
    result = run_parallel(problem, cfg, workers=2, wall_limit=0.3)
    assert not result.converged
    assert result.winner is None
    assert result.iterations == cfg.max_iters
    assert result.wall_ms < 30_000
    assert result.tally_total == cfg.s * sum(result.worker_iterations)


def test_slow_workers_complete_fewer_iterations():
    problem = generate_instance(n=200, m=100, s=5, b=10, seed=9)
    cfg = SolverConfig(s=5, max_iters=2000, seed=9)
    result = run_parallel(problem, cfg, workers=2, slow_fraction=0.5,
                          slow_delay=0.005)
    fast_done, slow_done = result.worker_iterations
    assert result.converged
    assert slow_done < fast_done


def test_shared_tally_is_a_tally():
    tally = SharedTally(8)
    tally.update(np.array([1, 2]), np.empty(0, dtype=np.intp), 1)
    tally.update(np.array([2, 3]), np.array([1, 2]), 2)
    assert tally.total() == 4
    expected = np.zeros(8, dtype=np.int64)
    expected[[2, 3]] = 2
    assert np.array_equal(tally.read(), expected)


def test_instrumented_tally_flags_impossible_totals():
    tally = InstrumentedTally(10, s=2)
    tally.update(np.array([0, 1]), np.empty(0, dtype=np.intp), 1)
    tally.read()
    assert tally.total_reads == 1
    assert tally.torn_reads == 0
    # fake a half-applied update: votes jump without a completed count
    tally.votes[[2, 3]] += 5
    tally.read()
    assert tally.torn_reads == 1     # even total, but no boundary matches it
    tally.votes[4] += 1
    tally.read()
    assert tally.torn_reads == 2     # total not divisible by s
    assert tally.total_reads == 3
    with pytest.raises(ValueError):
        InstrumentedTally(10, s=0)


def test_torn_stress_single_worker_sees_no_torn_reads():
    problem = generate_instance(n=150, m=60, s=6, b=10, seed=5)
    cfg = SolverConfig(s=6, max_iters=800, seed=5)
    before = sys.getswitchinterval()
    result = torn_read_stress(problem, cfg, workers=1)
    assert sys.getswitchinterval() == before
    assert result.converged
    assert result.torn_reads == 0
    # one read per completed iteration, no other readers
    assert result.total_reads == sum(result.worker_iterations)
    assert result.torn_fraction == 0.0


def test_torn_stress_multi_worker_reports_counts():
    problem = generate_instance(n=200, m=100, s=5, b=10, seed=7)
    cfg = SolverConfig(s=5, max_iters=2000, seed=7)
    result = torn_read_stress(problem, cfg, workers=4)
    assert result.total_reads >= sum(result.worker_iterations)
    assert 0 <= result.torn_reads <= result.total_reads
    assert result.tally_total == cfg.s * sum(result.worker_iterations)


def test_stop_signal_semantics():
    signal = StopSignal()
    assert not signal.is_set()
    signal.set()
    assert signal.is_set()
    signal.set()
    assert signal.is_set()


def test_torn_fraction_defaults_to_zero_without_instrumentation():
    result = ParallelResult(converged=True, winner=0, iterations=5,
                            x_hat=np.zeros(3), final_residual=0.0, wall_ms=1.0,
                            worker_iterations=[5], tally_total=15)
    assert result.torn_fraction == 0.0
    counted = ParallelResult(converged=True, winner=0, iterations=5,
                             x_hat=np.zeros(3), final_residual=0.0, wall_ms=1.0,
                             worker_iterations=[5], tally_total=15,
                             torn_reads=1, total_reads=4)
    assert counted.torn_fraction == 0.25
