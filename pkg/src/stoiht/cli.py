"""Command-line harness.

Subcommands: fig1 (oracle-support comparison), fig2 --fast|--slow
(core-count scaling), single (one run of any algorithm), gen-instance
(write a problem file), bench (quick wall-clock comparison).

A config file of `key = value` lines may set any flag of the chosen
subcommand; flags given on the command line override the file.  Exit codes:
0 success, 1 the requested run(s) did not converge, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import (
    EXTRA_FIELDS,
    ExperimentConfig,
    RAW_FIELDS,
    RAW_SCHEMA,
    record_row,
    run_fig1,
    run_fig2,
    run_single,
    summarize,
    write_curves,
    write_raw,
    write_summary,
)
from .model import generate_instance, load_instance, save_instance
from .plotting import fig1_chart, fig2_chart

ALGORITHMS = ("iht", "stoiht", "stoiht-oracle", "async-sim", "async-parallel")


class UsageError(Exception):
    pass


def _float_list(text):
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _int_list(text):
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _bool(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"bad boolean {text!r}")


def _add_problem_flags(p):
    p.add_argument("--n", type=int, default=1000, help="signal dimension")
    p.add_argument("--m", type=int, default=300, help="measurement count")
    p.add_argument("--s", type=int, default=20, help="sparsity level")
    p.add_argument("--b", type=int, default=15, help="rows per block")
    p.add_argument("--noise-std", type=float, default=0.0,
                   help="measurement noise standard deviation")
    p.add_argument("--seed", type=int, default=0, help="master seed")


def _add_solver_flags(p):
    p.add_argument("--gamma", type=float, default=1.0, help="step size")
    p.add_argument("--tol", type=float, default=1e-7,
                   help="exit residual tolerance")
    p.add_argument("--max-iters", type=int, default=1500,
                   help="iteration cap per run")


def _add_common_flags(p):
    p.add_argument("--config", type=str, default=None,
                   help="key = value file supplying defaults for this command")
    _add_problem_flags(p)
    _add_solver_flags(p)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stoiht",
        description="Sparse-recovery solvers and the benchmark harness "
                    "around them.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("fig1", help="oracle-support comparison experiment")
    _add_common_flags(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--alphas", type=_float_list,
                   default=(0.0, 0.25, 0.5, 0.75, 1.0),
                   help="comma-separated support-estimate accuracies")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes for trial-level parallelism")
    p.add_argument("--out", type=str, default="fig1-results")
    p.set_defaults(func=cmd_fig1)
    subs["fig1"] = p

    p = sub.add_parser("fig2", help="core-count scaling experiment")
    _add_common_flags(p)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--fast", action="store_true",
                      help="all cores iterate every time step")
    mode.add_argument("--slow", action="store_true",
                      help="half the cores iterate once per slow period")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--cores", type=_int_list, default=(1, 2, 4, 8, 16),
                   help="comma-separated core counts")
    p.add_argument("--slow-fraction", type=float, default=0.5)
    p.add_argument("--slow-period", type=int, default=4)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=str, default=None,
                   help="output directory (default fig2-<mode>-results)")
    p.set_defaults(func=cmd_fig2)
    subs["fig2"] = p

    p = sub.add_parser("single", help="run one algorithm once, print the row")
    _add_common_flags(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    p.add_argument("--alpha", type=float, default=1.0,
                   help="support-estimate accuracy (stoiht-oracle)")
    p.add_argument("--cores", type=int, default=4, help="cores (async-sim)")
    p.add_argument("--workers", type=int, default=4,
                   help="threads (async-parallel)")
    p.add_argument("--slow-fraction", type=float, default=0.0)
    p.add_argument("--slow-period", type=int, default=4)
    p.add_argument("--stress", action="store_true",
                   help="instrument tally reads (async-parallel)")
    p.add_argument("--instance", type=str, default=None,
                   help="load the problem from this file instead of generating")
    p.add_argument("--save-instance", type=str, default=None,
                   help="write the problem to this file")
    p.set_defaults(func=cmd_single)
    subs["single"] = p

    p = sub.add_parser("gen-instance", help="generate and save a problem file")
    p.add_argument("--config", type=str, default=None)
    _add_problem_flags(p)
    p.add_argument("--out", type=str, required=True, help="destination path")
    p.set_defaults(func=cmd_gen_instance)
    subs["gen-instance"] = p

    p = sub.add_parser("bench", help="wall-clock comparison of all algorithms")
    _add_common_flags(p)
    p.add_argument("--cores", type=int, default=4, help="cores for async-sim")
    p.add_argument("--workers", type=int, default=4,
                   help="threads for async-parallel")
    p.add_argument("--out", type=str, default=None,
                   help="also write raw.csv to this directory")
    p.set_defaults(func=cmd_bench)
    subs["bench"] = p

    return parser, subs


def _experiment_config(args, **overrides):
    settings = dict(
        n=args.n, m=args.m, s=args.s, b=args.b, gamma=args.gamma,
        tol=args.tol, max_iters=args.max_iters, noise_std=args.noise_std,
        master_seed=args.seed)
    settings.update(overrides)
    return ExperimentConfig(**settings)


def _print_record(record, extra=False):
    # wall-clock columns only where timing is the point: deterministic
    # algorithms must print identical rows on repeated invocation
    print(RAW_SCHEMA)
    print(",".join(RAW_FIELDS + EXTRA_FIELDS if extra else RAW_FIELDS))
    print(",".join(record_row(record, extra=extra)))


def cmd_fig1(args):
    cfg = _experiment_config(args, trials=args.trials,
                             alphas=tuple(args.alphas), jobs=args.jobs)
    records, curves = run_fig1(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_raw(out / "raw.csv", records)
    write_summary(out / "summary.csv", summarize(records))
    write_curves(out / "curves.csv", curves)
    (out / "plot.svg").write_text(fig1_chart(curves))
    print(f"fig1: {len(records)} records over {cfg.trials} trials -> "
          f"{out}/raw.csv, summary.csv, curves.csv, plot.svg")
    return 0


def cmd_fig2(args):
    slow = bool(args.slow)
    out = Path(args.out or f"fig2-{'slow' if slow else 'fast'}-results")
    cfg = _experiment_config(args, trials=args.trials,
                             cores_grid=tuple(args.cores),
                             slow_fraction=args.slow_fraction,
                             slow_period=args.slow_period, jobs=args.jobs)
    records = run_fig2(cfg, slow)
    summary = summarize(records)
    out.mkdir(parents=True, exist_ok=True)
    write_raw(out / "raw.csv", records)
    write_summary(out / "summary.csv", summary)
    (out / "plot.svg").write_text(fig2_chart(summary, slow))
    print(f"fig2 ({'slow' if slow else 'fast'}): {len(records)} records over "
          f"{cfg.trials} trials -> {out}/raw.csv, summary.csv, plot.svg")
    return 0


def cmd_single(args):
    cfg = _experiment_config(args, slow_fraction=args.slow_fraction,
                             slow_period=args.slow_period)
    if args.instance:
        problem = load_instance(args.instance)
    else:
        problem = cfg.make_instance(cfg.trial_seeds(0)[0])
    if args.save_instance:
        save_instance(problem, args.save_instance)
    record = run_single(cfg, args.algorithm, problem=problem,
                        alpha=args.alpha, cores=args.cores,
                        workers=args.workers, stress=args.stress)
    _print_record(record, extra=args.algorithm == "async-parallel")
    return 0 if record.converged else 1


def cmd_gen_instance(args):
    problem = generate_instance(n=args.n, m=args.m, s=args.s, b=args.b,
                                noise_std=args.noise_std, seed=args.seed)
    save_instance(problem, args.out)
    print(f"wrote {args.out} (n={args.n} m={args.m} s={args.s} b={args.b} "
          f"noise_std={args.noise_std} seed={args.seed})")
    return 0


def cmd_bench(args):
    cfg = _experiment_config(args, slow_fraction=0.0)
    records = []
    print(RAW_SCHEMA)
    print(",".join(RAW_FIELDS + EXTRA_FIELDS))
    for algorithm in ALGORITHMS:
        if algorithm == "stoiht-oracle":
            continue   # needs an accuracy parameter; see the fig1 experiment
        record = run_single(cfg, algorithm, cores=args.cores,
                            workers=args.workers)
        records.append(record)
        print(",".join(record_row(record, extra=True)))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_raw(out / "raw.csv", records, extra=True)
    return 0 if all(r.converged for r in records) else 1


def _parse_config_file(path):
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in body.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config_file(argv, parser, subs):
    """Inject config-file values as subcommand defaults before parsing.

    Explicit flags win automatically because argparse only falls back to the
    defaults we set here.
    """
    command = next((tok for tok in argv if tok in subs), None)
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a path")
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None or command is None:
        return
    sub = subs[command]
    converters = {}
    flags = {}
    for action in sub._actions:
        if action.option_strings:
            converters[action.dest] = action.type
            flags[action.dest] = action
    file_values = _parse_config_file(path)
    defaults = {}
    for key, raw in file_values.items():
        if key not in converters or key == "config":
            raise UsageError(f"config file key {key!r} is not a flag of "
                             f"'{command}'")
        action = flags[key]
        try:
            if isinstance(action, (argparse._StoreTrueAction,
                                   argparse._StoreFalseAction)):
                defaults[key] = _bool(raw)
            elif action.choices is not None and raw not in action.choices:
                raise argparse.ArgumentTypeError(
                    f"must be one of {', '.join(action.choices)}")
            else:
                defaults[key] = converters[key](raw) if converters[key] else raw
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"config file value for {key!r}: {exc}")
        except ValueError:
            raise UsageError(f"config file value for {key!r}: bad literal {raw!r}")
    sub.set_defaults(**defaults)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        _apply_config_file(argv, parser, subs)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
