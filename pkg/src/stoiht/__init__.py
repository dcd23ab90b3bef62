"""Sparse recovery by stochastic block iterative hard thresholding, with a
tally-coordinated multi-core variant (simulated and genuinely threaded)."""

from .experiments import ExperimentConfig, TrialRecord, run_fig1, run_fig2
from .model import (
    ProblemInstance,
    generate_instance,
    hard_threshold,
    load_instance,
    residual_norm,
    save_instance,
    signal_error,
    top_support,
)
from .parallel import ParallelResult, run_parallel, torn_read_stress
from .solvers import (
    RunResult,
    SolverConfig,
    make_support_estimate,
    run_iht,
    run_stoiht,
    run_stoiht_oracle,
)
from .tally import SimConfig, SimResult, Tally, core_seed, simulate

__all__ = [
    "ExperimentConfig",
    "ParallelResult",
    "ProblemInstance",
    "RunResult",
    "SimConfig",
    "SimResult",
    "SolverConfig",
    "Tally",
    "TrialRecord",
    "core_seed",
    "generate_instance",
    "hard_threshold",
    "load_instance",
    "make_support_estimate",
    "residual_norm",
    "run_fig1",
    "run_fig2",
    "run_iht",
    "run_parallel",
    "run_stoiht",
    "run_stoiht_oracle",
    "save_instance",
    "signal_error",
    "simulate",
    "torn_read_stress",
]

__version__ = "0.1.0"
