#!/usr/bin/env python3
"""
QuatTrack CLI Tool

Command-line interface for running attitude-tracking simulations, the
benchmark case studies, parameter sweeps and the property verification suites.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical abort.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from core.config import settings
from core.exceptions import ConfigError, NumericalAbortError
from core.logging_setup import configure_logging
from core.models.schemas import load_scenario_file
from core.services.batch_service import BatchService
from core.services.output_service import OutputService
from core.services.verification_service import SUITES, VerificationService
from core.simulation.scenarios import BENCHMARK_K_DELTA, SWEEPABLE_PARAMS, ScenarioConfig, case_study
from core.simulation.sim_engine import RunMetrics, simulate

logger = logging.getLogger("quattrack.cli")

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ABORT = 3

CASE_PRESETS = {"case1": 1, "case2": 2, "case3": 3}


def print_metrics(cfg: ScenarioConfig, metrics: RunMetrics):
    """Print the run summary."""
    print(f"Scenario: {cfg.name} ({cfg.controller_mode.value})")
    print("=" * 50)
    print(f"  final |e_q|:           {metrics.final_eq_norm:.3e}")
    print(f"  final |e_W|:           {metrics.final_eomega_norm:.3e}")
    print(f"  final |D - D_bar|:     {metrics.final_delta_err_norm:.3e}")
    if metrics.rms_eomega is not None:
        lo, hi = metrics.rms_window
        print(f"  RMS |e_W| [{lo:g}, {hi:g}] s: {metrics.rms_eomega:.3e}")
    settle = "not settled" if metrics.settle_time_eq is None else f"{metrics.settle_time_eq:.3f} s"
    print(f"  settle time |e_q|<{metrics.settle_threshold:g}: {settle}")
    print(f"  max ||q| - 1|:         {metrics.max_s3_drift:.3e}")
    print(f"  Lyapunov increases:    {metrics.vk1_monotonicity_violations}")
    if metrics.region_entry_time is not None:
        print(f"  region entered at:     {metrics.region_entry_time:.3f} s "
              f"({metrics.region_violations} exits afterwards)")


def run_scenario(cfg: ScenarioConfig, out_dir: Path, fmt: str = "csv", plot_data: bool = False) -> RunMetrics:
    """Simulate one scenario and write its trace and metrics."""
    trace, metrics = simulate(cfg)
    output = OutputService(out_dir)
    output.write_trace(trace, fmt)
    output.write_metrics(cfg, metrics)
    if plot_data:
        output.write_plot_data(trace)
    print_metrics(cfg, metrics)
    print(f"\nResults written to {out_dir}")
    return metrics


def simulate_command(args) -> int:
    cfg = load_scenario_file(args.config)
    run_scenario(cfg, Path(args.out), fmt=args.format)
    return EXIT_OK


def case_study_command(args) -> int:
    overrides = dict(k_delta=args.k_delta, dt=args.dt, t_end=args.t_end)
    out_dir = Path(args.out)

    if not args.compare:
        run_scenario(case_study(args.n, **overrides), out_dir, plot_data=args.plot_data)
        return EXIT_OK

    if args.n == 1:
        raise ConfigError("--compare applies to case studies 2 and 3", field="compare")
    robust = run_scenario(case_study(2, **overrides), out_dir / "case_study_2", plot_data=args.plot_data)
    non_robust = run_scenario(case_study(3, **overrides), out_dir / "case_study_3", plot_data=args.plot_data)
    try:
        document = OutputService(out_dir).write_comparison(robust, non_robust)
    except ValueError as e:
        raise ConfigError(str(e), field="t_end") from e
    print(f"\nRMS |e_W| robust / non-robust: {document.robust_vs_non_robust_ratio:.4f}")
    return EXIT_OK


def verify_command(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    reports = VerificationService().run(suites)

    all_passed = True
    for report in reports:
        print(f"\nSuite: {report.suite}")
        print("=" * 50)
        for result in report.results:
            status = "PASS" if result.passed else "FAIL"
            print(f"  {status}  {result.name}: residual={result.residual:.3e} tolerance={result.tolerance:.1e}")
            if result.detail:
                print(f"        {result.detail}")
        all_passed = all_passed and report.passed

    print(f"\nVerification {'passed' if all_passed else 'FAILED'}")
    return EXIT_OK if all_passed else EXIT_VERIFICATION_FAILED


def parse_values(text: str) -> List[float]:
    """Comma-separated list of numbers."""
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"values must be comma-separated numbers, got '{text}'", field="values") from e


def load_base(base: str) -> ScenarioConfig:
    if base in CASE_PRESETS:
        return case_study(CASE_PRESETS[base])
    return load_scenario_file(base)


def sweep_command(args) -> int:
    service = BatchService(Path(args.out), max_workers=args.workers)
    job = service.create_sweep_job(args.param, parse_values(args.values))
    base = load_base(args.base)

    print(f"Sweeping {job.param} over {len(job.values)} values on {base.name}")
    job = service.run_sweep(base, job)

    print("=" * 50)
    for row in job.rows:
        if row is not None:
            print(f"  {row['param']}={row['value']:g}: |e_q|={row['final_eq_norm']:.3e} "
                  f"|e_D|={row['final_delta_err_norm']:.3e} drift={row['max_s3_drift']:.1e}")
    for error in job.errors:
        print(f"  {job.param}={error['value']:g}: failed ({error['error']})")
    print(f"\nSummary written to {Path(args.out) / 'sweep_summary.csv'}")
    return EXIT_OK if not job.errors else EXIT_NUMERICAL_ABORT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="QuatTrack CLI Tool",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s simulate --config data/scenarios/case_study_1.json --out output/case1
  %(prog)s case-study --n 1 --plot-data
  %(prog)s case-study --n 2 --compare --out output/compare
  %(prog)s verify --suite algebra
  %(prog)s sweep --param k_delta --values 10,100,1000 --base case1 --out output/sweep
        """
    )
    parser.add_argument('--version', action='version', version=f"{settings.APP_NAME} {settings.VERSION}")
    parser.add_argument('--log-level', type=str.upper, default=None,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                        help='Logging level (default: LOG_LEVEL setting)')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    # Simulate command
    simulate_parser = subparsers.add_parser('simulate', help='Run a scenario file')
    simulate_parser.add_argument('--config', required=True, help='JSON scenario file')
    simulate_parser.add_argument('--out', default=settings.DEFAULT_OUTPUT_DIR, help='Output directory')
    simulate_parser.add_argument('--format', choices=['csv', 'json'], default='csv', help='Trace format')

    # Case study command
    case_parser = subparsers.add_parser('case-study', help='Run a benchmark case study')
    case_parser.add_argument('--n', type=int, choices=[1, 2, 3], required=True, help='Case study number')
    case_parser.add_argument('--out', default=settings.DEFAULT_OUTPUT_DIR, help='Output directory')
    case_parser.add_argument('--plot-data', action='store_true', help='Also write per-panel plot data files')
    case_parser.add_argument('--compare', action='store_true',
                             help='Run case studies 2 and 3 and compare their velocity errors')
    case_parser.add_argument('--k-delta', type=float, default=BENCHMARK_K_DELTA, help='Estimator gain')
    case_parser.add_argument('--dt', type=float, default=settings.DEFAULT_DT, help='RK4 step (s)')
    case_parser.add_argument('--t-end', type=float, default=settings.DEFAULT_T_END, help='Horizon (s)')

    # Verify command
    verify_parser = subparsers.add_parser('verify', help='Run the property verification suites')
    verify_parser.add_argument('--suite', choices=list(SUITES) + ['all'], default='all', help='Suite to run')

    # Sweep command
    sweep_parser = subparsers.add_parser('sweep', help='Sweep one tunable over a list of values')
    sweep_parser.add_argument('--param', required=True, help=f"One of: {', '.join(SWEEPABLE_PARAMS)}")
    sweep_parser.add_argument('--values', required=True, help='Comma-separated values')
    sweep_parser.add_argument('--base', required=True, help='Scenario file or case1|case2|case3')
    sweep_parser.add_argument('--out', default=settings.DEFAULT_OUTPUT_DIR, help='Output directory')
    sweep_parser.add_argument('--workers', type=int, default=None,
                              help='Worker threads (default: QUATTRACK_THREADS or CPU count)')

    return parser


COMMANDS = {
    'simulate': simulate_command,
    'case-study': case_study_command,
    'verify': verify_command,
    'sweep': sweep_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors and 0 after --help
        return e.code if isinstance(e.code, int) else EXIT_CONFIG_ERROR

    configure_logging(args.log_level)

    if not args.command:
        parser.print_help()
        return EXIT_CONFIG_ERROR

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"Error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except NumericalAbortError as e:
        print(f"Error: numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERICAL_ABORT


if __name__ == "__main__":
    sys.exit(main())
