"""Sequential solvers: full-gradient IHT, stochastic block IHT, and a
support-assisted variant that projects onto the union with a fixed estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    block_residual,
    project_onto,
    residual_norm,
    signal_error,
    top_support,
)

_PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Shared knobs for every solver; seed pins the block-selection stream."""

    s: int
    gamma: float = 1.0
    probs: np.ndarray | None = None   # block distribution, None = uniform
    tol: float = 1e-7
    max_iters: int = 1500
    seed: int = 0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("s must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.probs is not None:
            p = np.asarray(self.probs, dtype=float)
            if p.ndim != 1 or p.size == 0:
                raise ValueError("probs must be a nonempty vector")
            if p.min() < 0:
                raise ValueError("probs must be nonnegative")
            if abs(p.sum() - 1.0) > _PROB_SUM_TOL:
                raise ValueError(f"probs must sum to 1 (got {p.sum()!r})")
            object.__setattr__(self, "probs", p)

    def block_probs(self, num_blocks):
        """Resolved distribution over the instance's blocks."""
        if self.probs is None:
            return np.full(num_blocks, 1.0 / num_blocks)
        if self.probs.size != num_blocks:
            raise ValueError(f"probs has length {self.probs.size}, "
                             f"instance has {num_blocks} blocks")
        return self.probs


@dataclass
class RunResult:
    x_hat: np.ndarray
    iterations: int
    converged: bool
    residual_history: np.ndarray   # ||y - A x^t||, one entry per iteration
    error_history: np.ndarray      # ||x^t - x_true||, same length

    @property
    def final_residual(self):
        return float(self.residual_history[-1])

    @property
    def final_error(self):
        return float(self.error_history[-1])


def sample_block(rng, cumulative):
    """Draw a block index from a precomputed cumulative distribution."""
    i = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return min(i, cumulative.size - 1)


def block_gradient_step(problem, x, i, gamma, probs):
    """One importance-weighted block gradient step from x.

    Returns x + gamma / (M p_i) * A_i^T (y_i - A_i x).  Averaged over i with
    weights p_i this equals the full-gradient step x + gamma A^T (y - A x).
    """
    if probs[i] <= 0:
        raise ValueError(f"block {i} has zero probability and must never be sampled")
    rows = problem.block_rows(i)
    r = block_residual(problem, x, i)
    scale = gamma / (problem.num_blocks * probs[i])
    return x + scale * (problem.A[rows].T @ r)


def _finish(problem, x, residuals, errors, converged):
    return RunResult(
        x_hat=x,
        iterations=len(residuals),
        converged=converged,
        residual_history=np.array(residuals),
        error_history=np.array(errors),
    )


def _run_stochastic(problem, cfg, extra_support):
    probs = cfg.block_probs(problem.num_blocks)
    cumulative = np.cumsum(probs)
    rng = np.random.default_rng(cfg.seed)
    x = np.zeros(problem.n)
    residuals, errors = [], []
    for _ in range(cfg.max_iters):
        i = sample_block(rng, cumulative)
        bt = block_gradient_step(problem, x, i, cfg.gamma, probs)
        support = top_support(bt, cfg.s)
        if extra_support is not None:
            support = np.union1d(support, extra_support)
        x = project_onto(bt, support)
        res = residual_norm(problem, x)
        residuals.append(res)
        errors.append(signal_error(problem, x))
        if res < cfg.tol:
            return _finish(problem, x, residuals, errors, True)
    return _finish(problem, x, residuals, errors, False)


def run_stoiht(problem, cfg):
    """Stochastic block IHT from x = 0.

    Each iteration samples one block, takes the weighted block gradient step,
    and hard-thresholds to the top-s support.  Stops once ||y - A x|| < tol or
    after max_iters completed iterations.
    """
    return _run_stochastic(problem, cfg, None)


def run_stoiht_oracle(problem, cfg, support_estimate):
    """Stochastic block IHT that also keeps a fixed support estimate.

    Identical to run_stoiht except the thresholding step projects onto the
    union of the top-s support and support_estimate, so iterates may carry up
    to 2s nonzeros.  With an empty estimate the trajectory matches run_stoiht
    bit for bit under the same seed.
    """
    support_estimate = np.asarray(support_estimate, dtype=np.intp)
    return _run_stochastic(problem, cfg, support_estimate)


def run_iht(problem, cfg):
    """Full-gradient IHT baseline: x <- H_s(x + gamma A^T (y - A x))."""
    x = np.zeros(problem.n)
    residuals, errors = [], []
    for _ in range(cfg.max_iters):
        bt = x + cfg.gamma * (problem.A.T @ (problem.y - problem.A @ x))
        x = project_onto(bt, top_support(bt, cfg.s))
        res = residual_norm(problem, x)
        residuals.append(res)
        errors.append(signal_error(problem, x))
        if res < cfg.tol:
            return _finish(problem, x, residuals, errors, True)
    return _finish(problem, x, residuals, errors, False)


def make_support_estimate(true_support, accuracy, s, n, seed):
    """Random size-s support overlapping the true support in accuracy * s spots.

    accuracy * s must be integral; the overlap is drawn uniformly without
    replacement from the true support, the remainder from its complement.
    """
    true_support = np.asarray(true_support, dtype=np.intp)
    if true_support.size != s:
        raise ValueError(f"true support has {true_support.size} indices, expected {s}")
    hits_f = accuracy * s
    hits = int(round(hits_f))
    if abs(hits_f - hits) > 1e-9:
        raise ValueError(f"accuracy * s = {hits_f!r} is not an integer")
    if not 0 <= hits <= s:
        raise ValueError("accuracy must lie in [0, 1]")
    if (s - hits) > n - true_support.size:
        raise ValueError("not enough off-support indices to fill the estimate")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(true_support, size=hits, replace=False)
    complement = np.setdiff1d(np.arange(n, dtype=np.intp), true_support)
    filler = rng.choice(complement, size=s - hits, replace=False)
    return np.sort(np.concatenate([chosen, filler])).astype(np.intp)
