"""Benchmark harness: trial orchestration, statistics, and CSV emission.

Every experiment is a pure function of its configuration, master seed
included.  Per-trial seeds come from numpy's SeedSequence so runs are
reproducible byte for byte, trials are paired (every algorithm in a trial
sees the same instance and the same block-selection stream), and trial-level
parallelism cannot change any output.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import generate_instance, signal_error
from .parallel import run_parallel, torn_read_stress
from .solvers import (
    SolverConfig,
    make_support_estimate,
    run_iht,
    run_stoiht,
    run_stoiht_oracle,
)
from .tally import SimConfig, simulate

RAW_SCHEMA = "# stoiht-raw v1"
SUMMARY_SCHEMA = "# stoiht-summary v1"
CURVES_SCHEMA = "# stoiht-curves v1"

RAW_FIELDS = ("trial", "algorithm", "alpha", "cores", "steps", "converged",
              "final_residual", "final_signal_error")
EXTRA_FIELDS = ("wall_ms", "worker_iters", "torn_reads")
SUMMARY_FIELDS = ("algorithm", "alpha", "cores", "trials", "mean_steps",
                  "std_steps", "converged_rate", "mean_final_residual",
                  "mean_final_error")

# spawn-key tags so the per-purpose seed streams never collide
_TAG_INSTANCE = 0
_TAG_SOLVER = 1
_TAG_ESTIMATE = 2


def derive_seed(master_seed, *path):
    """Stable 64-bit seed for (master, path); distinct paths never collide."""
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a benchmark run depends on."""

    n: int = 1000
    m: int = 300
    s: int = 20
    b: int = 15
    gamma: float = 1.0
    tol: float = 1e-7
    max_iters: int = 1500
    noise_std: float = 0.0
    trials: int = 50
    alphas: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    cores_grid: tuple = (1, 2, 4, 8, 16)
    slow_fraction: float = 0.5
    slow_period: int = 4
    master_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if self.b < 1 or self.m % self.b != 0:
            raise ValueError(
                f"block size {self.b} must evenly divide m = {self.m}")
        for alpha in self.alphas:
            if not 0.0 <= alpha <= 1.0:
                raise ValueError(f"alpha {alpha!r} outside [0, 1]")
            hits = alpha * self.s
            if abs(hits - round(hits)) > 1e-9:
                raise ValueError(
                    f"alpha {alpha!r} does not give a whole support overlap "
                    f"(alpha * s = {hits!r})")
        for c in self.cores_grid:
            if c < 1:
                raise ValueError(f"core count {c!r} must be at least 1")

    def solver_config(self, seed):
        return SolverConfig(s=self.s, gamma=self.gamma, tol=self.tol,
                            max_iters=self.max_iters, seed=seed)

    def make_instance(self, seed):
        return generate_instance(n=self.n, m=self.m, s=self.s, b=self.b,
                                 noise_std=self.noise_std, seed=seed)

    def trial_seeds(self, trial):
        """(instance_seed, solver_seed) for one trial; shared by all arms."""
        return (derive_seed(self.master_seed, _TAG_INSTANCE, trial),
                derive_seed(self.master_seed, _TAG_SOLVER, trial))


@dataclass
class TrialRecord:
    """One raw datum: a single algorithm run inside a single trial."""

    trial: int
    algorithm: str
    alpha: float | None
    cores: int | None
    steps: int
    converged: bool
    final_residual: float
    final_signal_error: float
    wall_ms: float | None = None
    worker_iters: list | None = None
    torn_reads: int | None = None


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return ";".join(str(int(v)) for v in value)
    return str(float(value))


def record_row(record, extra=False):
    row = [_fmt(record.trial), record.algorithm, _fmt(record.alpha),
           _fmt(record.cores), _fmt(record.steps), _fmt(record.converged),
           _fmt(record.final_residual), _fmt(record.final_signal_error)]
    if extra:
        row += [_fmt(record.wall_ms), _fmt(record.worker_iters),
                _fmt(record.torn_reads)]
    return row


def write_raw(path, records, extra=False):
    fields = RAW_FIELDS + EXTRA_FIELDS if extra else RAW_FIELDS
    with open(path, "w", newline="") as fh:
        fh.write(RAW_SCHEMA + "\n")
        writer = csv.writer(fh)
        writer.writerow(fields)
        for record in records:
            writer.writerow(record_row(record, extra))


def read_raw(path):
    """Parse a raw CSV back into TrialRecords (base columns only)."""
    records = []
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    for row in rows[1:]:
        records.append(TrialRecord(
            trial=int(row[0]),
            algorithm=row[1],
            alpha=float(row[2]) if row[2] else None,
            cores=int(row[3]) if row[3] else None,
            steps=int(row[4]),
            converged=bool(int(row[5])),
            final_residual=float(row[6]),
            final_signal_error=float(row[7]),
        ))
    return records


def summarize(records):
    """Aggregate records by (algorithm, alpha, cores), first-seen order.

    Standard deviations are population ones: the trials at hand are the
    whole population being described, not a sample from a larger one.
    """
    groups = {}
    for record in records:
        key = (record.algorithm, record.alpha, record.cores)
        groups.setdefault(key, []).append(record)
    rows = []
    for (algorithm, alpha, cores), members in groups.items():
        steps = np.array([r.steps for r in members], dtype=float)
        rows.append({
            "algorithm": algorithm,
            "alpha": alpha,
            "cores": cores,
            "trials": len(members),
            "mean_steps": float(steps.mean()),
            "std_steps": float(steps.std()),
            "converged_rate": float(np.mean([r.converged for r in members])),
            "mean_final_residual": float(np.mean([r.final_residual for r in members])),
            "mean_final_error": float(np.mean([r.final_signal_error for r in members])),
        })
    return rows


def write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(SUMMARY_SCHEMA + "\n")
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for row in rows:
            writer.writerow([_fmt(row[name]) if name != "algorithm" else row[name]
                             for name in SUMMARY_FIELDS])


def write_curves(path, curves):
    """curves: mapping series name -> per-iteration mean error array.

    All series are written out to the same global iteration count, so the
    row count is len(curves) * max_iterations.
    """
    with open(path, "w", newline="") as fh:
        fh.write(CURVES_SCHEMA + "\n")
        writer = csv.writer(fh)
        writer.writerow(("series", "iteration", "mean_error"))
        for name, values in curves.items():
            for i, value in enumerate(values, start=1):
                writer.writerow((name, i, _fmt(float(value))))


def _pad_hold(histories, length):
    """Stack per-trial histories, holding each one's final value to length."""
    out = np.empty((len(histories), length))
    for k, h in enumerate(histories):
        h = np.asarray(h, dtype=float)
        out[k, :len(h)] = h
        out[k, len(h):] = h[-1]
    return out


def mean_curves(history_map):
    """Per-iteration mean of each series, padded to one shared length.

    history_map: series name -> list of per-trial error histories.  Trials
    that stopped early hold their final value, so post-convergence
    iterations keep contributing their last error to the mean.
    """
    length = max(len(h) for hs in history_map.values() for h in hs)
    return {name: _pad_hold(hs, length).mean(axis=0)
            for name, hs in history_map.items()}


def _alpha_label(alpha):
    return f"alpha={alpha:g}"


def _fig1_trial(payload):
    cfg, trial = payload
    instance_seed, solver_seed = cfg.trial_seeds(trial)
    problem = cfg.make_instance(instance_seed)
    scfg = cfg.solver_config(solver_seed)
    runs = [("stoiht", None, run_stoiht(problem, scfg))]
    for k, alpha in enumerate(cfg.alphas):
        estimate = make_support_estimate(
            problem.true_support(), alpha, cfg.s, cfg.n,
            seed=derive_seed(cfg.master_seed, _TAG_ESTIMATE, trial, k))
        runs.append(("stoiht-oracle", alpha,
                     run_stoiht_oracle(problem, scfg, estimate)))
    records, histories = [], []
    for algorithm, alpha, result in runs:
        records.append(TrialRecord(
            trial=trial, algorithm=algorithm, alpha=alpha, cores=None,
            steps=result.iterations, converged=result.converged,
            final_residual=result.final_residual,
            final_signal_error=result.final_error,
        ))
        histories.append(list(result.error_history))
    return records, histories


def _fig2_trial(payload):
    cfg, trial, slow = payload
    instance_seed, solver_seed = cfg.trial_seeds(trial)
    problem = cfg.make_instance(instance_seed)
    scfg = cfg.solver_config(solver_seed)
    baseline = run_stoiht(problem, scfg)
    records = [TrialRecord(
        trial=trial, algorithm="stoiht", alpha=None, cores=None,
        steps=baseline.iterations, converged=baseline.converged,
        final_residual=baseline.final_residual,
        final_signal_error=baseline.final_error,
    )]
    for cores in cfg.cores_grid:
        # round to a whole slow-core count per grid entry; a single core
        # cannot be half slow, so c=1 runs all-fast in slow mode
        slow_count = round(cfg.slow_fraction * cores) if slow else 0
        sim_cfg = SimConfig(solver=scfg, cores=cores,
                            slow_fraction=slow_count / cores,
                            slow_period=cfg.slow_period)
        sim = simulate(problem, sim_cfg)
        records.append(TrialRecord(
            trial=trial, algorithm="async-sim", alpha=None, cores=cores,
            steps=sim.time_steps, converged=sim.converged,
            final_residual=sim.final_residual,
            final_signal_error=signal_error(problem, sim.x_hat),
        ))
    return records


def _run_trials(worker, payloads, jobs):
    if jobs <= 1:
        return [worker(p) for p in payloads]
    # results are reassembled in submission order, so parallel execution
    # cannot change a single output byte
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, payloads))


def run_fig1(cfg):
    """Oracle-support comparison: standard vs fixed support estimates.

    Returns (records, curves): raw per-trial records and per-iteration mean
    recovery-error curves keyed by series name.
    """
    payloads = [(cfg, trial) for trial in range(cfg.trials)]
    outcomes = _run_trials(_fig1_trial, payloads, cfg.jobs)
    names = ["standard"] + [_alpha_label(a) for a in cfg.alphas]
    records = []
    history_map = {name: [] for name in names}
    for trial_records, trial_histories in outcomes:
        records.extend(trial_records)
        for name, history in zip(names, trial_histories):
            history_map[name].append(history)
    return records, mean_curves(history_map)


def run_fig2(cfg, slow):
    """Core-count scaling of the simulated tally solver vs the sequential
    baseline; slow=True makes half the cores iterate once per slow_period."""
    payloads = [(cfg, trial, bool(slow)) for trial in range(cfg.trials)]
    outcomes = _run_trials(_fig2_trial, payloads, cfg.jobs)
    records = []
    for trial_records in outcomes:
        records.extend(trial_records)
    return records


def run_single(cfg, algorithm, problem=None, alpha=1.0, cores=4, workers=4,
               stress=False, trial=0):
    """One end-to-end run of any algorithm; returns a TrialRecord."""
    instance_seed, solver_seed = cfg.trial_seeds(trial)
    if problem is None:
        problem = cfg.make_instance(instance_seed)
    scfg = cfg.solver_config(solver_seed)
    start = time.perf_counter()
    if algorithm == "iht":
        result = run_iht(problem, scfg)
    elif algorithm == "stoiht":
        result = run_stoiht(problem, scfg)
    elif algorithm == "stoiht-oracle":
        estimate = make_support_estimate(
            problem.true_support(), alpha, problem.s, problem.n,
            seed=derive_seed(cfg.master_seed, _TAG_ESTIMATE, trial, 0))
        result = run_stoiht_oracle(problem, scfg, estimate)
    elif algorithm == "async-sim":
        sim = simulate(problem, SimConfig(
            solver=scfg, cores=cores, slow_fraction=cfg.slow_fraction,
            slow_period=cfg.slow_period))
        return TrialRecord(
            trial=trial, algorithm=algorithm, alpha=None, cores=cores,
            steps=sim.time_steps, converged=sim.converged,
            final_residual=sim.final_residual,
            final_signal_error=signal_error(problem, sim.x_hat),
            wall_ms=(time.perf_counter() - start) * 1e3)
    elif algorithm == "async-parallel":
        runner = torn_read_stress if stress else run_parallel
        res = runner(problem, scfg, workers, slow_fraction=cfg.slow_fraction)
        return TrialRecord(
            trial=trial, algorithm=algorithm, alpha=None, cores=workers,
            steps=res.iterations, converged=res.converged,
            final_residual=res.final_residual,
            final_signal_error=signal_error(problem, res.x_hat),
            wall_ms=res.wall_ms, worker_iters=res.worker_iterations,
            torn_reads=res.torn_reads)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return TrialRecord(
        trial=trial, algorithm=algorithm,
        alpha=alpha if algorithm == "stoiht-oracle" else None, cores=None,
        steps=result.iterations, converged=result.converged,
        final_residual=result.final_residual,
        final_signal_error=result.final_error,
        wall_ms=(time.perf_counter() - start) * 1e3)
