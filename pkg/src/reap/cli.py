"""cli.py — ``reap`` command-line front door.

Usage:
    reap [--config PATH] [--seed N] [--out DIR] [--format {csv,json}] [--log-level L] COMMAND

Commands:
    design    solve the configured regime and write menu.json
    verify    check a menu (the designed one, or --menu PATH) and write verify.json
    simulate  Monte Carlo reporting rounds; writes trials.<fmt> and monte_carlo.json
    sweep     budget / k / lambda-grid sweep; writes sweep.<fmt>
    figure    plot data for fig2..fig6; writes <id>.csv

Exit codes:
    0  success
    1  invalid input (bad flag, config, scenario or menu)
    2  constraint verification failed
    3  internal numerical failure
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import NoReturn

import structlog
from pydantic import ValidationError

from reap.config import ExperimentConfig, OutputFormat, SweepParameter, SweepSpec, load_config
from reap.discrete import check_constraints
from reap.exceptions import (
    ConfigError,
    ConstraintViolationError,
    DomainError,
    NumericalError,
)
from reap.experiments import (
    FIGURE_IDS,
    design,
    figure_frame,
    run_sweep,
    sweep_frame,
    verify_continuous_menu,
    verify_menu,
)
from reap.io import atomic_write_text, write_model, write_table
from reap.logging_setup import configure_logging, set_log_level
from reap.models import ContinuousMenu, ContractMenu, Regime
from reap.simulator import build_population, simulate

logger: structlog.BoundLogger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFY_FAILED = 2
EXIT_NUMERICAL = 3

Handler = Callable[[argparse.Namespace, ExperimentConfig], int]

_DEFAULT_SWEEPS = {
    SweepParameter.BUDGET: SweepSpec(parameter=SweepParameter.BUDGET, start=500.0, stop=1000.0, steps=6),
    SweepParameter.K: SweepSpec(parameter=SweepParameter.K, start=5.0, stop=20.0, steps=4),
    SweepParameter.LAMBDA_GRID: SweepSpec(parameter=SweepParameter.LAMBDA_GRID),
}


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as ``ConfigError`` instead of exiting 2."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _out_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir)


def _load_menu(path: Path) -> ContractMenu | ContinuousMenu:
    if not path.is_file():
        raise ConfigError(f"menu file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if '"grid"' in text:
        return ContinuousMenu.from_json(text)
    return ContractMenu.from_json(text)


def cmd_design(args: argparse.Namespace, config: ExperimentConfig) -> int:
    menu, summary = design(config)
    path = atomic_write_text(_out_dir(config) / "menu.json", menu.to_json())
    print(f"regime={summary.regime} types={summary.types}")
    print(f"alpha={summary.alpha:.9g} objective={summary.objective:.9g}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, config: ExperimentConfig) -> int:
    menu = _load_menu(args.menu) if args.menu is not None else design(config)[0]
    if isinstance(menu, ContinuousMenu):
        report = verify_continuous_menu(menu, config.continuous_scenario(), seed=config.seed)
    else:
        report = verify_menu(menu, config)
    path = write_model(report, _out_dir(config) / "verify.json")

    for check in report.checks:
        tag = "PASS" if check.passed else "FAIL"
        detail = f"  ({check.detail})" if check.detail else ""
        print(f"  {tag}  {check.name:<12} residual={check.residual:.3e} tol={check.tolerance:.0e}{detail}")
    if report.oracle_skipped:
        print(f"  SKIP  {report.oracle_skipped}")
    print(f"wrote {path}")

    if report.passed:
        print("\nAll checks passed.")
        return EXIT_OK
    for failed in report.failures:
        logger.error("reap.verify.failed", check=failed.name, residual=failed.residual, detail=failed.detail)
    print(f"\nVerification failed: {len(report.failures)} check(s).")
    return EXIT_VERIFY_FAILED


def cmd_simulate(args: argparse.Namespace, config: ExperimentConfig) -> int:
    menu = _load_menu(args.menu) if args.menu is not None else design(config)[0]
    if isinstance(menu, ContinuousMenu):
        continuous = config.continuous_scenario()
        agents = build_population(continuous, config.raw_data, config.seed)
        run = simulate(agents, menu, continuous, config.trials, config.seed)
    else:
        violations = check_constraints(menu, menu.scenario()).violations()
        if violations:
            raise ConstraintViolationError(violations[0].constraint, violations[0].residual)
        discrete = menu.scenario()
        agents = build_population(discrete, config.raw_data, config.seed)
        run = simulate(agents, menu, discrete, config.trials, config.seed)

    out = _out_dir(config)
    trials_path = write_table(run.trials, out, "trials", config.format)
    report_path = write_model(run.report, out / "monte_carlo.json")
    r = run.report
    print(f"predicted alpha={r.predicted_alpha:.9g} trials={r.trials}")
    print(
        f"violation rate={r.violation_rate:.4f} vs 1-delta={r.chebyshev_bound:.4f} "
        f"(se={r.binomial_se:.4f}) within_bound={r.within_bound}"
    )
    print(f"wrote {trials_path}")
    print(f"wrote {report_path}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: ExperimentConfig) -> int:
    if args.parameter is not None:
        wanted = SweepParameter(args.parameter)
        if config.sweep is None or config.sweep.parameter is not wanted:
            config = config.with_overrides(sweep=_DEFAULT_SWEEPS[wanted].model_dump(mode="json"))
    result = run_sweep(config)
    path = write_table(sweep_frame(result), _out_dir(config), "sweep", config.format)
    print(f"sweep parameter={result.parameter} rows={len(result.rows)}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_figure(args: argparse.Namespace, config: ExperimentConfig) -> int:
    frame = figure_frame(args.figure_id, config)
    path = write_table(frame, _out_dir(config), args.figure_id, OutputFormat.CSV)
    print(f"{args.figure_id}: {len(frame)} rows")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = _Parser(
        prog="reap",
        description="Design, verify and simulate privacy-payment contract menus.",
    )
    parser.add_argument("--config", type=Path, default=None, help="JSON config file.")
    parser.add_argument("--seed", type=int, default=None, help="Master random seed (u64).")
    parser.add_argument("--out", default=None, help="Output directory for artifacts.")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], default=None)
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR.")

    sub = parser.add_subparsers(dest="command", required=True)
    regimes = [r.value for r in Regime]

    p = sub.add_parser("design", help="Solve for the optimal menu.")
    p.add_argument("--regime", choices=regimes, default=None)
    p.set_defaults(handler=cmd_design)

    p = sub.add_parser("verify", help="Check constraints, optimality and (k <= 3) the oracle.")
    p.add_argument("--menu", type=Path, default=None, help="Menu JSON to verify.")
    p.add_argument("--regime", choices=regimes, default=None)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo accuracy check.")
    p.add_argument("--menu", type=Path, default=None, help="Menu JSON to simulate.")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--regime", choices=regimes, default=None)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sweep", help="Parameter sweep of both regimes.")
    p.add_argument("--parameter", choices=[s.value for s in SweepParameter], default=None)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("figure", help="Plot data for one figure.")
    p.add_argument("figure_id", choices=FIGURE_IDS)
    p.set_defaults(handler=cmd_figure)

    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    try:
        args = _parse_args(argv)
        config = load_config(args.config).with_overrides(
            seed=args.seed,
            output_dir=args.out,
            format=args.format,
            log_level=args.log_level,
            regime=getattr(args, "regime", None),
            trials=getattr(args, "trials", None),
        )
        set_log_level(config.log_level)
        handler: Handler = args.handler
        return handler(args, config)
    except ConstraintViolationError as exc:
        logger.error("reap.cli.constraint_violation", constraint=exc.constraint, residual=exc.residual)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    except (ConfigError, DomainError, ValidationError) as exc:
        logger.error("reap.cli.invalid_input", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        logger.error("reap.cli.numerical_failure", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
