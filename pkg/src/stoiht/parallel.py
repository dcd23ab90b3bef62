"""Threaded shared-memory executor for the tally-guided solver.

Workers run uncoordinated iterations against one shared vote vector.  Writes
are short locked critical sections (one per vote/retract), so no per-component
update is ever lost, while full-vector reads take no lock at all: a reader may
observe the gap between a vote and its matching retraction, or a mix of
several workers' updates -- states that never existed at any update boundary.
The solver is expected to tolerate those inconsistent reads; the stress
harness measures how often they occur.
"""

from __future__ import annotations

import sys
import threading
import time
from dataclasses import dataclass

import numpy as np

from .model import residual_norm
from .tally import Tally, make_cores, tally_iteration

# One iteration takes on the order of 0.1 ms, while the interpreter's default
# thread slice is 5 ms, which would serialize workers into ~50-iteration solo
# bursts; a finer slice interleaves them the way concurrent cores would run.
_SWITCH_INTERVAL = 1e-4


class SharedTally(Tally):
    """Vote vector safe for concurrent writers; readers are unsynchronized."""

    def __init__(self, n):
        super().__init__(n)
        self._write_lock = threading.Lock()

    def update(self, new_support, old_support, t):
        # two separate critical sections: readers may see the vote without
        # the retraction, which is the inconsistency the solver must tolerate
        with self._write_lock:
            self.votes[new_support] += t
        if t > 1:
            with self._write_lock:
                self.votes[old_support] -= t - 1

    def read(self):
        return self.votes.copy()   # deliberately lock-free


class InstrumentedTally(SharedTally):
    """SharedTally that flags reads provably unequal to any boundary state.

    Every completed update nets exactly +s votes, so any state at an update
    boundary has total s * (updates completed so far).  A read whose total
    does not match s * C for any C passed during the copy must have observed
    a half-applied or interleaved update.  Detection is sound but not
    complete: an inconsistent read whose total coincides with a valid
    boundary total goes uncounted.
    """

    def __init__(self, n, s):
        super().__init__(n)
        if s < 1:
            raise ValueError("instrumentation needs s >= 1")
        self._s = s
        self._completed = 0
        self._stats_lock = threading.Lock()
        self.total_reads = 0
        self.torn_reads = 0

    def update(self, new_support, old_support, t):
        super().update(new_support, old_support, t)
        with self._write_lock:
            self._completed += 1

    def read(self):
        before = self._completed
        votes = self.votes.copy()
        after = self._completed
        total = int(votes.sum())
        torn = total % self._s != 0 or not before <= total // self._s <= after
        with self._stats_lock:
            self.total_reads += 1
            if torn:
                self.torn_reads += 1
        return votes


class StopSignal:
    """Once-settable exit broadcast; setting publishes before any observer."""

    def __init__(self):
        self._event = threading.Event()

    def set(self):
        self._event.set()

    def is_set(self):
        return self._event.is_set()


@dataclass
class ParallelResult:
    converged: bool
    winner: int | None
    iterations: int                # winner's local count; max_iters on failure
    x_hat: np.ndarray
    final_residual: float
    wall_ms: float
    worker_iterations: list        # completed iterations per worker
    tally_total: int               # vote total after quiescence
    torn_reads: int | None = None
    total_reads: int | None = None

    @property
    def torn_fraction(self):
        if not self.total_reads:
            return 0.0
        return self.torn_reads / self.total_reads


def run_parallel(problem, cfg, workers, slow_fraction=0.0, slow_delay=0.002,
                 wall_limit=60.0, _tally=None):
    """Run `workers` uncoordinated threads until the first one converges.

    The interpreter switch interval is lowered for the duration of the run
    (and restored afterwards) so workers interleave at iteration granularity
    instead of long scheduler bursts.  Slow workers (the highest ids,
    slow_fraction of the total) sleep slow_delay seconds between iterations.
    The first worker below tolerance raises the stop signal; everyone else
    finishes the iteration in flight, including its tally update, so the vote
    total still balances afterwards.  Ties within the stop window go to the
    lowest worker id.  A wall-clock guard aborts pathological runs as
    non-converged; there is nothing to deadlock on.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    raw = slow_fraction * workers
    if abs(raw - round(raw)) > 1e-9:
        raise ValueError(f"slow_fraction * workers = {raw!r} is not integral")

    tally = SharedTally(problem.n) if _tally is None else _tally
    stop = StopSignal()
    cores = make_cores(problem, cfg, workers, slow_count=int(round(raw)))
    start = time.perf_counter()
    deadline = start + wall_limit

    def work(core):
        while core.t <= cfg.max_iters:
            if stop.is_set() or time.perf_counter() > deadline:
                return
            if tally_iteration(problem, core, tally, cfg):
                stop.set()
                return
            if core.slow and slow_delay > 0:
                time.sleep(slow_delay)

    threads = [threading.Thread(target=work, args=(core,), name=f"worker-{core.id}")
               for core in cores]
    previous_switch = sys.getswitchinterval()
    sys.setswitchinterval(_SWITCH_INTERVAL)
    try:
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    finally:
        sys.setswitchinterval(previous_switch)
    wall_ms = (time.perf_counter() - start) * 1e3

    arrived = [c for c in cores if c.converged_at is not None]
    extra = {}
    if isinstance(tally, InstrumentedTally):
        extra = {"torn_reads": tally.torn_reads, "total_reads": tally.total_reads}
    if arrived:
        winner = min(arrived, key=lambda c: c.id)
        return ParallelResult(
            converged=True,
            winner=winner.id,
            iterations=winner.converged_at,
            x_hat=winner.x,
            final_residual=winner.residual_history[-1],
            wall_ms=wall_ms,
            worker_iterations=[c.completed for c in cores],
            tally_total=tally.total(),
            **extra,
        )
    best = min(cores, key=lambda c: (c.residual_history or [residual_norm(problem, c.x)])[-1])
    return ParallelResult(
        converged=False,
        winner=None,
        iterations=cfg.max_iters,
        x_hat=best.x,
        final_residual=(best.residual_history or [residual_norm(problem, best.x)])[-1],
        wall_ms=wall_ms,
        worker_iterations=[c.completed for c in cores],
        tally_total=tally.total(),
        **extra,
    )


def torn_read_stress(problem, cfg, workers, slow_fraction=0.0, slow_delay=0.002,
                     wall_limit=60.0):
    """run_parallel against an instrumented tally that detects torn reads.

    Returns the ParallelResult with torn_reads / total_reads filled in; the
    executor's fine-grained thread switching already provokes the
    interleavings the instrumentation is there to catch.
    """
    tally = InstrumentedTally(problem.n, cfg.s)
    return run_parallel(problem, cfg, workers, slow_fraction=slow_fraction,
                        slow_delay=slow_delay, wall_limit=wall_limit,
                        _tally=tally)
