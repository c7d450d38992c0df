"""Command-line front end: `solve`, `sweep` and `check` on a JSON experiment config.

Exit codes: 0 pass, 1 acceptance failure, 2 usage or config error,
3 solver failure.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from absl import app, flags
from immutabledict import immutabledict

from .config import LOG_LEVEL, OUTPUT_DIR, THREADS
from .core.alm import StoppingKind
from .core.index_functions import IndexFunction
from .core.operators import LinearOperator, make_test_operator
from .errors import (
    ConfigError,
    DimensionMismatchError,
    InnerSolverError,
    OperatorSpecError,
    SafetyCapReached,
    SourceConditionError,
)
from .experiments.battery import all_passed, run_battery
from .experiments.problems import Problem, build_problem, variational_spec
from .experiments.rates import ErrorMeasure
from .experiments.sweep import RunPlan, iterate_rows, solve_cell, summarize, sweep
from .schemas import ExperimentConfig, load_config
from .utils.utils import format_table, write_table

FLAGS = flags.FLAGS
flags.DEFINE_string("config", None, "Path to the JSON experiment config.")
flags.DEFINE_string("out", None, "Output directory (overrides output.directory).")
flags.DEFINE_integer("threads", None, "Worker threads for sweep cells.")
flags.DEFINE_integer("seed-override", None, "Replaces the operator, source and noise seeds.")

logger = logging.getLogger(__name__)

EXIT_CODES = immutabledict({"pass": 0, "acceptance": 1, "usage": 2, "solver": 3})
COMMANDS = ("solve", "sweep", "check")
USAGE = "usage: alm-rates {solve|sweep|check} --config PATH [--out DIR] [--threads N] [--seed-override S]"


def build_experiment(cfg: ExperimentConfig) -> Tuple[Problem, RunPlan]:
    """The problem and run plan described by a config."""
    operator = make_test_operator(cfg.problem.operator_spec())
    problem = build_problem(operator, cfg.build_regularizer(), cfg.source_spec())
    f: Optional[IndexFunction] = cfg.index_function_override()
    if f is None:
        f = variational_spec(problem).index_function
    stop = cfg.stopping
    plan = RunPlan(
        index_function=f,
        stopping=StoppingKind(stop.kind),
        schedule=cfg.schedule(),
        rho=stop.rho if stop.rho is not None else math.nan,
        iterations=stop.iterations or 0,
        monitors=cfg.monitors.names(),
        dual_samples=cfg.monitors.dual_samples,
        probes=cfg.monitors.probes,
        inner_tol=cfg.solver.inner_tol,
        max_inner_iterations=cfg.solver.max_inner_iterations,
        max_outer_iterations=cfg.solver.max_outer_iterations,
    )
    logger.info("Index function Phi(s) = %.6g s^%.6g", f.c, f.p)
    return problem, plan


def output_dir(cfg: ExperimentConfig, out: Optional[str] = None) -> Path:
    return Path(out or cfg.output.directory or OUTPUT_DIR)


def cmd_solve(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Single run; writes iterates.csv."""
    deltas = cfg.noise.delta_values()
    if len(deltas) != 1:
        raise ConfigError([f"solve requires exactly one noise level, got {len(deltas)}"])
    problem, plan = build_experiment(cfg)
    delta, seed = deltas[0], cfg.noise.seeds[0]
    try:
        _, records = solve_cell(problem, plan, delta, seed)
    except SafetyCapReached as e:
        write_table(iterate_rows(problem, e.records), out_dir, "iterates", cfg.output.formats)
        raise
    write_table(iterate_rows(problem, records), out_dir, "iterates", cfg.output.formats)
    last = records[-1]
    summary = {
        "n_stop": last.k,
        "t_stop": last.t,
        "residual": last.residual,
        "bregman": problem.bregman_to_truth(last.u),
    }
    print(format_table([summary]))
    return EXIT_CODES["pass"]


def cmd_sweep(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    """Delta sweep; writes records.csv and summary.csv."""
    problem, plan = build_experiment(cfg)
    records = sweep(problem, plan, cfg.noise.delta_values(), cfg.noise.seeds, threads=threads)
    write_table([r.as_row() for r in records], out_dir, "records", cfg.output.formats)
    summary = summarize(
        records,
        problem,
        plan,
        ErrorMeasure(cfg.distance()),
        ratio_limit=cfg.analysis.bound_ratio_limit,
        slope_tolerance=cfg.analysis.slope_tolerance,
    )
    rows = []
    for rule in summary.rules:
        row = {
            "measure": summary.measure.value,
            "slope": summary.slope,
            "r_squared": summary.r_squared,
            "theoretical_exponent": summary.theoretical,
        }
        row.update(rule.as_row())
        rows.append(row)
    write_table(rows, out_dir, "summary", cfg.output.formats)
    print(format_table([rule.as_row() for rule in summary.rules]))
    if not summary.passed:
        logger.warning("Sweep %s failed at least one acceptance rule", cfg.name)
        return EXIT_CODES["acceptance"]
    return EXIT_CODES["pass"]


def cmd_check(cfg: ExperimentConfig, out_dir: Path, operator: Optional[LinearOperator] = None) -> int:
    """Invariant battery; writes checks.csv. `operator` replaces the
    problem's operator in the operator-level checks."""
    problem, plan = build_experiment(cfg)
    delta = max(cfg.noise.delta_values())
    results = run_battery(
        problem,
        plan.schedule,
        plan.stopping_rule(delta),
        delta,
        seed=cfg.noise.seeds[0],
        dual_samples=cfg.monitors.dual_samples,
        probes=cfg.monitors.probes,
        vi_samples=cfg.monitors.vi_samples,
        inner_tol=cfg.solver.inner_tol,
        operator=operator,
    )
    rows = [r.as_row() for r in results]
    write_table(rows, out_dir, "checks", cfg.output.formats)
    print(format_table(rows))
    return EXIT_CODES["pass"] if all_passed(results) else EXIT_CODES["acceptance"]


def run_command(
    command: str,
    cfg: ExperimentConfig,
    out_dir: Path,
    threads: int = 1,
    operator: Optional[LinearOperator] = None,
) -> int:
    """Dispatch a subcommand and map failures onto exit codes."""
    try:
        if command == "solve":
            return cmd_solve(cfg, out_dir)
        if command == "sweep":
            return cmd_sweep(cfg, out_dir, threads)
        if command == "check":
            return cmd_check(cfg, out_dir, operator)
        logger.error("Unknown command %r. %s", command, USAGE)
        return EXIT_CODES["usage"]
    except (ConfigError, OperatorSpecError) as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CODES["usage"]
    except (
        InnerSolverError,
        SafetyCapReached,
        SourceConditionError,
        DimensionMismatchError,
        np.linalg.LinAlgError,
    ) as e:
        logger.error("Solver failure (%s): %s", type(e).__name__, e)
        return EXIT_CODES["solver"]
    except ValueError as e:
        # invalid schedules and noise levels that slipped past the schema
        logger.error("Invalid input: %s", e)
        return EXIT_CODES["usage"]


def main(argv: List[str]) -> int:
    """absl entry point; argv[1] is the subcommand."""
    logging.basicConfig(level=LOG_LEVEL)
    args = argv[1:]
    if len(args) != 1 or args[0] not in COMMANDS:
        logger.error(USAGE)
        return EXIT_CODES["usage"]
    if not FLAGS.config:
        logger.error("--config is required. %s", USAGE)
        return EXIT_CODES["usage"]
    try:
        cfg = load_config(FLAGS.config)
    except ConfigError as e:
        for violation in e.violations:
            logger.error("Config violation: %s", violation)
        return EXIT_CODES["usage"]
    seed_override = FLAGS["seed-override"].value
    if seed_override is not None:
        cfg = cfg.with_seed(seed_override)
    threads = FLAGS.threads if FLAGS.threads is not None else THREADS
    if threads < 1:
        logger.error("--threads must be positive, got %d", threads)
        return EXIT_CODES["usage"]
    return run_command(args[0], cfg, output_dir(cfg, FLAGS.out), threads)


def run() -> None:
    app.run(main)


if __name__ == "__main__":
    run()
