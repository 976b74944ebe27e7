"""
Experiment runner.

    python cli.py recover-fixed --alpha 1 --iters 2000 --nx 65 --ny 65
    python cli.py recover-fixed --curl off
    python cli.py recover-moving
    python cli.py ablation [--moving]
    python cli.py sweep-alpha --alphas 0.1,1,10
    python cli.py generate --monitors f0.csv [--curl-monitor g0.csv]
    python cli.py gradcheck --nx 17 --ny 17
    python cli.py report runs/ablation_3 runs/recover-fixed_4
    python cli.py config show | config set KEY VALUE
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from grid.field import GridSpec, ScalarField, check_same_spec, weighted_l2_inner
from grid.field_io import read_field_csv
from grid.grid_constants import DEFAULT_FD_EPS, DEFAULT_GRADCHECK_PROBES, GRADCHECK_TOLERANCE
from grid.grid_errors import FieldFormatError, GridGenError, InfeasibleMonitorError
from grid.metrics import ComparisonReport, format_report_table, read_report_csv
from grid.objective import MonitorPair
from services.config_service.config_service import DEFAULT_DB_PATH, RUN_DEFAULTS, ConfigService
from services.experiment_worker.experiment_worker import ExperimentOutcome, ExperimentParams, ExperimentWorker
from services.experiment_worker.experiment_worker_constants import (
    COMMAND_ABLATION,
    COMMAND_GENERATE,
    COMMAND_GRADCHECK,
    COMMAND_RECOVER_FIXED,
    COMMAND_RECOVER_MOVING,
    COMMAND_SWEEP_ALPHA,
    DEFAULT_SWEEP_ALPHAS,
)
from services.run_service.run_service import RunService

logger = logging.getLogger('gridgen')

ERROR_PLAIN_DESCENT_TSTEP = '--plain-descent requires --tstep'
ERROR_UNKNOWN_CONFIG_KEY = 'Unknown config key'
ERROR_NO_REPORT = 'No report.csv found under'

REPORT_FILE = 'report.csv'


def normalize_monitor(f0: ScalarField, spec: GridSpec) -> ScalarField:
    """
    Scale f0 so its interior quadrature equals the quadrature area of the
    grid, the compatibility condition for a fixed-boundary map

    Args:
        f0: Prescribed Jacobian determinant (positive at interior nodes)
        spec: Grid the monitor lives on

    Returns:
        Scaled monitor
    """
    check_same_spec(f0.spec, spec)
    if (f0.interior <= 0.0).any():
        raise InfeasibleMonitorError('Jacobian monitor must be positive at every interior node')
    ones = ScalarField.full(spec, 1.0)
    scale = weighted_l2_inner(ones, ones) / weighted_l2_inner(f0, ones)
    return ScalarField(spec, f0.values * scale)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma separated numbers, got {text!r}')


def _zoom(text: str):
    values = _float_list(text)
    if len(values) != 4 or values[0] >= values[1] or values[2] >= values[3]:
        raise argparse.ArgumentTypeError('zoom window must be X0,X1,Y0,Y1 with X0<X1 and Y0<Y1')
    return tuple(values)


def resolve_db_path(argv: Sequence[str]) -> str:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('--db')
    known, _ = pre.parse_known_args(argv)
    return known.db or os.getenv('GRIDGEN_DB', DEFAULT_DB_PATH)


def build_parser(defaults: Dict) -> argparse.ArgumentParser:
    """Argument parser whose defaults come from the stored configuration"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--db', help='run registry / config database (default $GRIDGEN_DB or gridgen.json)')
    common.add_argument('--verbose', '-v', action='store_true', help='debug logging')

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument('--nx', type=int, default=defaults['nx'])
    experiment.add_argument('--ny', type=int, default=defaults['ny'])
    experiment.add_argument('--alpha', type=float, default=defaults['alpha'])
    experiment.add_argument('--iters', type=int, default=defaults['iters'])
    experiment.add_argument('--tstep', type=float, default=None,
                            help=f'(initial) step size, default {defaults["tstep"]:g}')
    experiment.add_argument('--plain-descent', action='store_true',
                            help='fixed step, no line search (requires --tstep)')
    experiment.add_argument('--curl', choices=('on', 'off'), default='on',
                            help='off drops the curl term from the objective')
    experiment.add_argument('--amplitude', type=float, default=None)
    experiment.add_argument('--noise', type=float, default=0.0, help='std. deviation of monitor noise')
    experiment.add_argument('--seed', type=int, default=0)
    experiment.add_argument('--record-every', type=int, default=1)
    experiment.add_argument('--zoom', type=_zoom, action='append', default=[],
                            help='extra enlarged SVG view X0,X1,Y0,Y1 (repeatable)')
    experiment.add_argument('--out', default=None, help='output directory')

    parser = argparse.ArgumentParser(prog='gridgen', description=__doc__.strip().splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest='command', required=True)
    parents = [common, experiment]
    sub.add_parser(COMMAND_RECOVER_FIXED, parents=parents, help='recover a fixed-boundary map')
    sub.add_parser(COMMAND_RECOVER_MOVING, parents=parents, help='recover a moving-boundary map')
    ablation = sub.add_parser(COMMAND_ABLATION, parents=parents, help='Jacobian-only vs Jacobian+curl')
    ablation.add_argument('--moving', action='store_true')
    sweep = sub.add_parser(COMMAND_SWEEP_ALPHA, parents=parents, help='Jacobian+curl runs for several alphas')
    sweep.add_argument('--alphas', type=_float_list, default=list(DEFAULT_SWEEP_ALPHAS))
    sweep.add_argument('--moving', action='store_true')
    generate = sub.add_parser(COMMAND_GENERATE, parents=parents, help='grid for user supplied monitors')
    generate.add_argument('--monitors', required=True, help='field CSV of the Jacobian monitor f0')
    generate.add_argument('--curl-monitor', default=None, help='field CSV of the curl monitor g0 (default 0)')
    gradcheck = sub.add_parser(COMMAND_GRADCHECK, parents=parents, help='adjoint vs finite-difference gradient')
    gradcheck.add_argument('--probes', type=int, default=DEFAULT_GRADCHECK_PROBES)
    gradcheck.add_argument('--eps', type=float, default=DEFAULT_FD_EPS)

    report = sub.add_parser('report', parents=[common], help='table of the reports of finished runs')
    report.add_argument('run_dirs', nargs='+', help='run directories (ablation and sweep case folders are found)')

    config = sub.add_parser('config', parents=[common], help='show or change stored defaults')
    config_sub = config.add_subparsers(dest='config_command', required=True)
    config_sub.add_parser('show', parents=[common])
    config_set = config_sub.add_parser('set', parents=[common])
    config_set.add_argument('key')
    config_set.add_argument('value')
    return parser


def params_from_args(args: argparse.Namespace, defaults: Dict) -> ExperimentParams:
    moving = args.command == COMMAND_RECOVER_MOVING or getattr(args, 'moving', False)
    # the stored amplitude belongs to the fixed map; the moving map has its own default
    amplitude = args.amplitude
    if amplitude is None and not moving:
        amplitude = defaults['amplitude']
    return ExperimentParams(
        nx=args.nx,
        ny=args.ny,
        alpha=args.alpha,
        iters=args.iters,
        tstep=args.tstep if args.tstep is not None else defaults['tstep'],
        plain_descent=args.plain_descent,
        curl=args.curl == 'on',
        amplitude=amplitude,
        noise=args.noise,
        seed=args.seed,
        record_every=args.record_every,
        zoom=list(args.zoom),
        out_dir=args.out,
    )


def _print_outcome(outcome: ExperimentOutcome):
    reports = {case.label: case.report for case in outcome.cases if case.report is not None}
    if reports:
        print(format_report_table(reports))
    for case in outcome.cases:
        print(f'{case.label}: {case.result.stop_reason} after {case.result.iterations_run} iterations, '
              f'{case.result.elapsed:.2f}s')
    print(f'run {outcome.run_id}: {outcome.message} -> {outcome.out_dir}')


def collect_reports(run_dirs: Sequence[str]) -> Dict[str, ComparisonReport]:
    """
    Read report.csv of each run directory, or of its case subdirectories
    for ablation and sweep runs

    Returns:
        Reports keyed by directory label, in argument order
    """
    reports = {}
    for run_dir in map(Path, run_dirs):
        if (run_dir / REPORT_FILE).exists():
            reports[run_dir.name] = read_report_csv(run_dir / REPORT_FILE)
            continue
        case_files = sorted(run_dir.glob(f'*/{REPORT_FILE}'))
        if not case_files:
            raise FieldFormatError(f'{ERROR_NO_REPORT} {run_dir}')
        for path in case_files:
            reports[f'{run_dir.name}/{path.parent.name}'] = read_report_csv(path)
    return reports


def _config_command(args: argparse.Namespace, config_service: ConfigService) -> int:
    if args.config_command == 'set':
        if args.key not in RUN_DEFAULTS:
            print(f'{ERROR_UNKNOWN_CONFIG_KEY}: {args.key} (known: {", ".join(RUN_DEFAULTS)})', file=sys.stderr)
            return 1
        config_service.set_config(args.key, args.value)
    for key, value in config_service.get_run_defaults().items():
        print(f'{key}={value}')
    return 0


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run the requested command and write its artifacts

    Returns:
        Process exit status: 0 on success, 1 on divergence, infeasible input
        or a failed gradient check (argparse exits with 2 on bad flags)
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    db_path = resolve_db_path(argv)
    config_service = ConfigService(db_path)
    defaults = config_service.get_run_defaults()
    parser = build_parser(defaults)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='[%(levelname)s] %(message)s')

    if args.command == 'config':
        return _config_command(args, config_service)

    if args.command == 'report':
        try:
            print(format_report_table(collect_reports(args.run_dirs)))
        except GridGenError as e:
            print(f'error: {e}', file=sys.stderr)
            return 1
        return 0

    if args.plain_descent and args.tstep is None:
        parser.error(ERROR_PLAIN_DESCENT_TSTEP)

    worker = ExperimentWorker(RunService(db_path), base_out_dir=defaults['out_dir'])
    params = params_from_args(args, defaults)
    try:
        if args.command == COMMAND_RECOVER_FIXED:
            outcome = worker.recover(params, moving=False)
        elif args.command == COMMAND_RECOVER_MOVING:
            outcome = worker.recover(params, moving=True)
        elif args.command == COMMAND_ABLATION:
            outcome = worker.ablation(params, moving=args.moving)
        elif args.command == COMMAND_SWEEP_ALPHA:
            outcome = worker.sweep_alpha(params, args.alphas, moving=args.moving)
        elif args.command == COMMAND_GENERATE:
            f0 = read_field_csv(args.monitors)
            g0 = read_field_csv(args.curl_monitor) if args.curl_monitor else ScalarField.zeros(f0.spec)
            check_same_spec(f0.spec, g0.spec)
            params.nx, params.ny = f0.spec.nx, f0.spec.ny
            outcome = worker.generate(params, MonitorPair(normalize_monitor(f0, f0.spec), g0))
        else:
            outcome = worker.gradcheck(params, args.probes, args.eps)
    except GridGenError as e:
        print(f'error: {e}', file=sys.stderr)
        return 1

    if args.command == COMMAND_GRADCHECK:
        verdict = 'PASS' if outcome.exit_code == 0 else 'FAIL'
        print(f'max relative gradient error: {outcome.extra["max_relative_error"]:.3e} '
              f'(tolerance {GRADCHECK_TOLERANCE:g}) {verdict}')
    else:
        _print_outcome(outcome)
    return outcome.exit_code


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
