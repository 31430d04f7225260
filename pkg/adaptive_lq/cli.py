# File: adaptive_lq/cli.py
"""
Command-line entry point.

    alq run --preset sec4_1 --out runs/sec4_1
    alq run --config my_run.yaml --decimate 10
    alq table1
    alq spectra
    alq riccati-check --preset sec4_2 --tau 0.5,1,2
    alq ideal-sweep --preset sec4_1 --tau-inf 0.5,1,3,7

Exit codes: 0 success, 1 usage/validation/config/I-O error, 2 numeric error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .config import settings
from .core.tuning import review_scenario
from .exceptions import (
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_VALIDATION,
    AdaptiveLqError,
    UsageError,
    exit_code_for,
)
from .schemas.enums import NormKind, Subcommand
from .schemas.run_config import RunConfig
from .schemas.scenario import Scenario
from .simulation import (
    DEFAULT_IDEAL_TAUS,
    build_system,
    reproduce_spectra,
    reproduce_table1,
    riccati_check,
    run_closed_loop,
    run_ideal_lq,
)
from .utils import trace_io
from .utils.config_loader import load_config_file, resolve_scenario

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting with argparse's own code 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", type=str, default=None, help="Built-in scenario: sec4_1 or sec4_2")
    p.add_argument("--config", type=Path, default=None, help="YAML config document")
    p.add_argument("--dt", type=float, default=None, help="Override the Euler step (s)")
    p.add_argument("--duration", type=float, default=None, help="Override the simulated time (s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alq", description="Adaptive LQ self-tuning regulator experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser(Subcommand.RUN.value, help="Simulate the adaptive closed loop")
    _add_scenario_args(run)
    run.add_argument("--out", type=Path, default=None, help="Output directory")
    run.add_argument("--decimate", type=int, default=None, help="Keep every k-th trace sample")
    run.add_argument("--full-rate", action="store_true", help="Write every tick")

    table1 = sub.add_parser(Subcommand.TABLE1.value, help="Taylor truncation error grid")
    table1.add_argument("--out", type=Path, default=None)
    table1.add_argument("--norm", choices=[k.value for k in NormKind], default=None)

    spectra = sub.add_parser(Subcommand.SPECTRA.value, help="Hamiltonian eigenvalues of the presets")
    spectra.add_argument("--out", type=Path, default=None)

    riccati = sub.add_parser(Subcommand.RICCATI_CHECK.value, help="Analytical vs differential Riccati")
    _add_scenario_args(riccati)
    riccati.add_argument("--vartheta", type=float, default=None)
    riccati.add_argument("--tau", type=_float_list, default=None, help="Comma-separated horizons")
    riccati.add_argument("--out", type=Path, default=None)

    ideal = sub.add_parser(Subcommand.IDEAL_SWEEP.value, help="Fixed optimal law over tau_inf values")
    _add_scenario_args(ideal)
    ideal.add_argument("--tau-inf", type=_float_list, default=None, help="Comma-separated tau_inf values")
    ideal.add_argument("--out", type=Path, default=None)
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """RunConfig from --config and/or --preset, with --dt/--duration folded into overrides."""
    if args.config is not None:
        config = load_config_file(args.config)
        if args.preset is not None:
            config = config.model_copy(update={"preset": args.preset, "scenario": None})
    elif args.preset is not None:
        config = RunConfig(preset=args.preset)
    else:
        raise UsageError("select a scenario with --preset or --config")

    overrides = dict(config.overrides)
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.duration is not None:
        overrides["duration"] = args.duration
    if overrides != config.overrides:
        config = RunConfig.model_validate({**config.model_dump(exclude_none=True), "overrides": overrides})
    return config


def _output_dir(args: argparse.Namespace, config: Optional[RunConfig] = None) -> Path:
    if getattr(args, "out", None) is not None:
        return args.out
    if config is not None and config.output_dir is not None:
        return config.output_dir
    return settings.OUTPUT_DIR


def cmd_run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    scenario = resolve_scenario(config)
    review_scenario(scenario)

    trace, summary = run_closed_loop(scenario)

    out_dir = _output_dir(args, config)
    if args.full_rate or config.full_rate:
        decimation = 1
    else:
        decimation = args.decimate or config.decimation or settings.TRACE_DECIMATION
    if decimation < 1:
        raise UsageError(f"--decimate must be >= 1, got {decimation}")

    if config.emit.trace:
        trace_io.write_trace_csv(trace, out_dir / trace_io.TRACE_FILENAME, decimation)
    if config.emit.summary:
        trace_io.write_summary(summary, out_dir / trace_io.SUMMARY_FILENAME)
    if config.emit.table1:
        trace_io.write_table1_csv(reproduce_table1(), out_dir / trace_io.TABLE1_FILENAME)
    if config.emit.spectra:
        trace_io.write_spectra_report(reproduce_spectra(), out_dir / trace_io.SPECTRA_FILENAME)

    print("\n".join(trace_io.summary_lines(summary)))
    if summary.overflow_flag:
        logger.error(f"Run stopped early: {summary.overflow_message}")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_table1(args: argparse.Namespace) -> int:
    cells = reproduce_table1(NormKind(args.norm) if args.norm else None)
    trace_io.write_table1_csv(cells, _output_dir(args) / trace_io.TABLE1_FILENAME)
    print(trace_io.format_table1(cells))
    return EXIT_OK


def cmd_spectra(args: argparse.Namespace) -> int:
    reports = reproduce_spectra()
    trace_io.write_spectra_report(reports, _output_dir(args) / trace_io.SPECTRA_FILENAME)
    for report in reports:
        values = ", ".join(f"{re:.4f}{im:+.4f}i" for re, im in zip(report.real, report.imag))
        print(f"{report.label} (vartheta={report.vartheta:g}): {values}")
    return EXIT_OK


def _scenario_or_default(args: argparse.Namespace, default_preset: str) -> Scenario:
    if args.config is None and args.preset is None:
        args.preset = default_preset
    return resolve_scenario(load_run_config(args))


def cmd_riccati_check(args: argparse.Namespace) -> int:
    scenario = _scenario_or_default(args, "sec4_1")
    if args.vartheta is not None:
        scenario = scenario.with_overrides(vartheta=args.vartheta)
    sys_, w = build_system(scenario)
    taus = args.tau or [scenario.pipeline.tau_inf]
    rows = riccati_check(sys_, w, taus)
    trace_io.write_riccati_check_csv(rows, _output_dir(args) / trace_io.RICCATI_FILENAME)
    for row in rows:
        if row.singular:
            print(f"tau={row.tau:g}: singular (cond(Phi11)={trace_io.format_value(row.cond_phi11)})")
        else:
            print(
                f"tau={row.tau:g}: rel_gap={row.rel_gap:.3e} steady_gap={row.steady_gap:.3e} "
                f"ARE residual={row.are_residual:.3e} cond(Phi11)={row.cond_phi11:.3e}"
            )
    if all(row.singular for row in rows):
        logger.warning("Every requested tau is singular: lower tau or raise vartheta")
    return EXIT_OK


def cmd_ideal_sweep(args: argparse.Namespace) -> int:
    scenario = _scenario_or_default(args, "sec4_1")
    taus = args.tau_inf or list(DEFAULT_IDEAL_TAUS)
    results = [result for result, _trace in run_ideal_lq(scenario, taus)]
    trace_io.write_ideal_sweep_csv(results, _output_dir(args) / trace_io.IDEAL_SWEEP_FILENAME)
    for result in results:
        if result.singular:
            print(f"tau_inf={result.tau_inf:g}: singular")
        else:
            print(f"tau_inf={result.tau_inf:g}: J={result.cost:.6g} stabilizing={result.stabilizing}")
    return EXIT_OK


COMMANDS = {
    Subcommand.RUN.value: cmd_run,
    Subcommand.TABLE1.value: cmd_table1,
    Subcommand.SPECTRA.value: cmd_spectra,
    Subcommand.RICCATI_CHECK.value: cmd_riccati_check,
    Subcommand.IDEAL_SWEEP.value: cmd_ideal_sweep,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, dispatch the subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"alq: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:
        # --help / --version
        return EXIT_OK if not e.code else EXIT_VALIDATION

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.LOG_LEVEL,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler()],
    )

    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_VALIDATION

    try:
        return COMMANDS[args.command](args)
    except AdaptiveLqError as e:
        logger.error(str(e))
        return exit_code_for(e)
    except ArithmeticError as e:
        logger.error(f"Numeric failure: {e}", exc_info=True)
        return EXIT_NUMERIC
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_VALIDATION
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
