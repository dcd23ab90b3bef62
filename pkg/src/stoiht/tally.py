"""Support-vote bookkeeping shared by concurrent solvers, plus a deterministic
multi-core time-step simulator.

Each core votes for its current support estimate with weight equal to its
local iteration count and retracts the weight it placed one iteration earlier,
so the vote vector always holds exactly the latest opinion of every core.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import EMPTY_SUPPORT, project_onto, residual_norm, top_support
from .solvers import SolverConfig, block_gradient_step, sample_block

# odd 64-bit multiplier; core 0 keeps the master seed unchanged so a
# single-core run replays the matching sequential solver stream
_SEED_MIX = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

# Vote weights are iteration counts, so a reader at iteration t can tell how
# stale another vote is.  Votes more than STALE_WINDOW iterations behind the
# reader come from a worker frozen by the scheduler, not a live peer; adopting
# such a support drags the iterate back toward an old estimate.  Lockstep
# execution always has staleness 1, so the bound never engages there.
STALE_WINDOW = 8


def core_seed(master_seed, core_id):
    """Per-core RNG seed, invariant to scheduling order; core 0 = master seed."""
    return (master_seed ^ (core_id * _SEED_MIX)) & _MASK64


def top_votes(votes, s, empty_when_zero=False):
    """Support read of the vote vector: indices of the s largest tallies.

    Ties at the boundary are broken by lowest index, so an all-zero vector
    tie-fills to the lowest s indices unless empty_when_zero asks for an
    empty set instead.
    """
    votes = np.asarray(votes)
    if empty_when_zero and not votes.any():
        return EMPTY_SUPPORT
    return top_support(votes, s)


def settled_votes(votes, s):
    """Top-s vote read without arbitrary tie-breaking.

    Equals the plain top-s whenever the boundary is unambiguous.  When
    several components tie at the cutoff value, the tied group enters only
    if it fits within s; otherwise just the components strictly above the
    cutoff are returned (possibly fewer than s, empty on an all-zero vector).
    Index-order tie picks turn out to act as correlated noise shared by
    every core, which is why this read is the solver default.
    """
    votes = np.asarray(votes)
    if s == 0:
        return EMPTY_SUPPORT
    if s >= votes.size:
        return np.arange(votes.size, dtype=np.intp)
    cutoff = np.partition(votes, votes.size - s)[votes.size - s]
    above = np.flatnonzero(votes > cutoff)
    at = np.flatnonzero(votes == cutoff)
    if above.size + at.size <= s:
        return np.sort(np.concatenate([above, at])).astype(np.intp)
    return above.astype(np.intp)


class Tally:
    """Integer vote vector over signal components.

    Single-threaded flavor; the executor module subclasses it with locked
    per-update writes and unsynchronized reads.
    """

    def __init__(self, n):
        self.votes = np.zeros(n, dtype=np.int64)

    def update(self, new_support, old_support, t):
        """Vote: +t on the new support, retract t-1 from the previous one.

        old_support must be the same core's target from iteration t-1 (empty
        when t == 1, where there is nothing to retract).
        """
        self.votes[new_support] += t
        if t > 1:
            self.votes[old_support] -= t - 1

    def top(self, s, empty_when_zero=False):
        return top_votes(self.read(), s, empty_when_zero)

    def settled(self, s, now=None):
        """Settled top-s read.

        Without `now` the raw weights are ranked as-is (the lockstep read,
        where all cores share one iteration count and singleton votes tie
        exactly).  With `now` (the reader's own iteration count) the weights
        are first cleaned for concurrent drift: votes more than STALE_WINDOW
        iterations behind the reader are dropped, then the rest are
        normalized to backer counts (weight / now, rounded).  Workers a few
        iterations apart then tie exactly the way equally-paced cores do, so
        the settling rule can drop ambiguous singletons and return only
        multi-worker consensus, instead of ranking one worker's idiosyncratic
        picks above another's just because it is an iteration ahead.
        """
        votes = self.read()
        if now is not None:
            if now - STALE_WINDOW > 1:
                votes = np.where(votes >= now - STALE_WINDOW, votes, 0)
            votes = np.rint(votes / now).astype(np.int64)
        return settled_votes(votes, s)

    def read(self):
        return self.votes.copy()

    def total(self):
        return int(self.votes.sum())


@dataclass
class CoreState:
    """One worker's private solver state; everything here is core-local."""

    id: int
    x: np.ndarray
    rng: np.random.Generator
    t: int = 1
    last_support: np.ndarray = field(default=EMPTY_SUPPORT)
    slow: bool = False
    residual_history: list = field(default_factory=list)
    converged_at: int | None = None

    @property
    def completed(self):
        return self.t - 1


def make_cores(problem, cfg, cores, slow_count=0):
    """Fresh core states with order-invariant per-core RNG streams.

    Fast cores get the low ids; the last slow_count cores are slow.
    """
    return [
        CoreState(
            id=k,
            x=np.zeros(problem.n),
            rng=np.random.default_rng(core_seed(cfg.seed, k)),
            slow=k >= cores - slow_count,
        )
        for k in range(cores)
    ]


def tally_iteration(problem, core, tally, cfg, read_support=None):
    """One tally-guided iteration of a single core; returns the exit flag.

    Sample a block, take the weighted gradient step, keep the union of the
    step's top-s support and the tally's settled vote (cleaned for concurrent
    drift: stale votes dropped and weights normalized to backer counts, see
    Tally.settled), then publish the new support to the tally and advance the
    local counter.  With the tally read forced empty this is exactly one
    plain stochastic-IHT iteration.
    """
    probs = cfg.block_probs(problem.num_blocks)
    i = sample_block(core.rng, np.cumsum(probs))
    bt = block_gradient_step(problem, core.x, i, cfg.gamma, probs)
    new_support = top_support(bt, cfg.s)
    if read_support is not None:
        voted = read_support(tally, cfg.s)
    else:
        voted = tally.settled(cfg.s, now=core.t)
    core.x = project_onto(bt, np.union1d(new_support, voted))
    tally.update(new_support, core.last_support, core.t)
    res = residual_norm(problem, core.x)
    core.residual_history.append(res)
    if res < cfg.tol and core.converged_at is None:
        core.converged_at = core.t
    core.last_support = new_support
    core.t += 1
    return res < cfg.tol


@dataclass(frozen=True)
class SimConfig:
    """Time-step simulator settings wrapped around a solver config.

    A time step is one iteration of the fastest core; slow cores complete an
    iteration only on steps divisible by slow_period.
    """

    solver: SolverConfig
    cores: int = 1
    slow_fraction: float = 0.0
    slow_period: int = 4
    read_mode: str = "settled"        # or "lowest_index" tie-breaking
    empty_until_votes: bool = False   # lowest_index mode: zero tally reads empty
    check_conservation: bool = True
    record_tally: bool = False
    audit: bool = False

    def __post_init__(self):
        if self.cores < 1:
            raise ValueError("cores must be at least 1")
        if self.slow_period < 1:
            raise ValueError("slow_period must be at least 1")
        if not 0.0 <= self.slow_fraction <= 1.0:
            raise ValueError("slow_fraction must lie in [0, 1]")
        if self.read_mode not in ("settled", "lowest_index"):
            raise ValueError(f"unknown read_mode {self.read_mode!r}")
        raw = self.slow_fraction * self.cores
        if abs(raw - round(raw)) > 1e-9:
            raise ValueError(f"slow_fraction * cores = {raw!r} is not integral")

    @property
    def slow_count(self):
        return int(round(self.slow_fraction * self.cores))


@dataclass
class SimResult:
    time_steps: int                 # winner's local iteration count (== global steps for fast winners)
    winning_core: int | None
    converged: bool
    x_hat: np.ndarray
    final_residual: float
    global_steps: int
    core_iterations: list           # completed iterations per core
    core_supports: list             # each core's latest published support
    residual_history: np.ndarray    # winner's per-iteration residuals
    final_tally: np.ndarray
    tally_snapshots: list | None = None
    audit_log: list | None = None


def simulate(problem, config, read_support=None):
    """Deterministic lockstep simulation of concurrent tally-guided cores.

    Per step: pick the active cores, let every active core read the same
    start-of-step vote vector, compute all iterations, then apply all tally
    updates.  The run stops on the first step where an active core passes the
    exit test, reporting that core's local iteration count (lowest core id
    wins a same-step tie), or after max_iters steps.

    read_support overrides the vote read (a callable (votes, s) -> support);
    forcing it empty with a single core reproduces the sequential solver.
    """
    cfg = config.solver
    probs = cfg.block_probs(problem.num_blocks)
    cumulative = np.cumsum(probs)
    cores = make_cores(problem, cfg, config.cores, config.slow_count)
    tally = Tally(problem.n)
    snapshots = [] if config.record_tally else None
    audit = [] if config.audit else None
    winner = None
    winner_steps = 0
    step = 0

    for step in range(1, cfg.max_iters + 1):
        active = [c for c in cores if not c.slow or step % config.slow_period == 0]
        if read_support is not None:
            voted = read_support(tally.votes, cfg.s)
        elif config.read_mode == "settled":
            voted = tally.settled(cfg.s)
        else:
            voted = tally.top(cfg.s, config.empty_until_votes)
        updates = []
        arrived = []
        for core in active:
            i = sample_block(core.rng, cumulative)
            bt = block_gradient_step(problem, core.x, i, cfg.gamma, probs)
            new_support = top_support(bt, cfg.s)
            core.x = project_onto(bt, np.union1d(new_support, voted))
            updates.append((core, new_support))
            res = residual_norm(problem, core.x)
            core.residual_history.append(res)
            if res < cfg.tol:
                arrived.append(core)
                if core.converged_at is None:
                    core.converged_at = core.t
        for core, new_support in updates:
            tally.update(new_support, core.last_support, core.t)
            core.last_support = new_support
            core.t += 1
        if config.check_conservation:
            expected = cfg.s * sum(c.completed for c in cores)
            if tally.total() != expected or (tally.votes < 0).any():
                raise RuntimeError(
                    f"vote conservation violated at step {step}: "
                    f"total {tally.total()} expected {expected}")
        if snapshots is not None:
            snapshots.append(tally.read())
        if audit is not None:
            ids = ";".join(str(c.id) for c in active)
            audit.append(f"{step},{ids},{tally.total()},{int(bool(arrived))}")
        if arrived:
            winner = min(arrived, key=lambda c: c.id)
            winner_steps = winner.converged_at
            break

    if winner is None:
        # report the best effort at the step cap
        best = min(cores, key=lambda c: (c.residual_history or [residual_norm(problem, c.x)])[-1])
        return SimResult(
            time_steps=cfg.max_iters,
            winning_core=None,
            converged=False,
            x_hat=best.x,
            final_residual=(best.residual_history or [residual_norm(problem, best.x)])[-1],
            global_steps=step,
            core_iterations=[c.completed for c in cores],
            core_supports=[c.last_support for c in cores],
            residual_history=np.array(best.residual_history),
            final_tally=tally.read(),
            tally_snapshots=snapshots,
            audit_log=audit,
        )
    return SimResult(
        time_steps=winner_steps,
        winning_core=winner.id,
        converged=True,
        x_hat=winner.x,
        final_residual=winner.residual_history[-1],
        global_steps=step,
        core_iterations=[c.completed for c in cores],
        core_supports=[c.last_support for c in cores],
        residual_history=np.array(winner.residual_history),
        final_tally=tally.read(),
        tally_snapshots=snapshots,
        audit_log=audit,
    )
