import logging
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy

import grid
from grid.diffops import curl2d, jacobian_det
from grid.field import (
    GridSpec,
    ScalarField,
    Transformation,
    VectorField,
    identity_map,
    make_uniform_grid,
)
from grid.grid_constants import (
    DEFAULT_ALPHA,
    DEFAULT_FIXED_AMPLITUDE,
    DEFAULT_MAX_ITERS,
    DEFAULT_MOVING_AMPLITUDE,
    DEFAULT_NX,
    DEFAULT_NY,
    DEFAULT_TSTEP,
    GRADCHECK_TOLERANCE,
    LABEL_JACOBIAN_CURL,
    LABEL_ONLY_JACOBIAN,
)
from grid.grid_errors import GridGenError
from grid.metrics import ComparisonReport, compare_report, jacobian_summary
from grid.objective import ControlField, MonitorPair
from grid.optimizer import DescentOptions, RunResult, gradient_check, run_descent
from grid.poisson import get_plan, laplacian5
from grid.synth import (
    default_fixed_boundary_map,
    default_moving_boundary_map,
    harmonic_boundary_match,
    monitors_from_map,
    perturb_monitors,
    random_smooth_map,
)
from services.config_service.config_service import DEFAULT_OUT_DIR
from services.experiment_worker.experiment_worker_constants import (
    COMMAND_ABLATION,
    COMMAND_GENERATE,
    COMMAND_GRADCHECK,
    COMMAND_RECOVER_FIXED,
    COMMAND_RECOVER_MOVING,
    COMMAND_SWEEP_ALPHA,
    DEFAULT_SWEEP_ALPHAS,
    GRADCHECK_CONTROL_SLOPE,
    GRADCHECK_TARGET_SLOPE,
    SLUG_JACOBIAN_CURL,
    SLUG_ONLY_JACOBIAN,
)
from services.export_service.export_service import ExportService
from services.run_service.run_service import (
    RUN_STATUS_DIVERGED,
    RUN_STATUS_FAILED,
    RUN_STATUS_FINISHED,
    RunService,
)

logger = logging.getLogger(__name__)

Zoom = Tuple[float, float, float, float]


@dataclass
class ExperimentParams:
    """Everything needed to reproduce a run"""
    nx: int = DEFAULT_NX
    ny: int = DEFAULT_NY
    alpha: float = DEFAULT_ALPHA
    iters: int = DEFAULT_MAX_ITERS
    tstep: float = DEFAULT_TSTEP
    plain_descent: bool = False
    curl: bool = True
    amplitude: Optional[float] = None
    noise: float = 0.0
    seed: int = 0
    record_every: int = 1
    zoom: List[Zoom] = field(default_factory=list)
    out_dir: Optional[str] = None

    def grid(self) -> GridSpec:
        """Unit-spaced grid [1, nx] x [1, ny]"""
        return make_uniform_grid(self.nx, self.ny, (1.0, float(self.nx), 1.0, float(self.ny)))

    def descent_options(self, alpha: Optional[float] = None, curl: Optional[bool] = None) -> DescentOptions:
        return DescentOptions(
            tstep=self.tstep,
            max_iters=self.iters,
            alpha=self.alpha if alpha is None else alpha,
            curl=self.curl if curl is None else curl,
            line_search=not self.plain_descent,
            record_every=self.record_every,
        )

    def as_dict(self) -> Dict:
        data = asdict(self)
        data['zoom'] = ';'.join(','.join(f'{v:g}' for v in window) for window in self.zoom)
        return data


@dataclass
class RecoveryProblem:
    spec: GridSpec
    target: Transformation
    base: Transformation
    monitors: MonitorPair


@dataclass
class CaseResult:
    label: str
    slug: str
    alpha: float
    result: RunResult
    report: Optional[ComparisonReport] = None


@dataclass
class ExperimentOutcome:
    run_id: int
    command: str
    out_dir: Path
    cases: List[CaseResult]
    exit_code: int
    message: str
    extra: Dict = field(default_factory=dict)


def case_label(curl: bool) -> str:
    return LABEL_JACOBIAN_CURL if curl else LABEL_ONLY_JACOBIAN


def case_slug(curl: bool) -> str:
    return SLUG_JACOBIAN_CURL if curl else SLUG_ONLY_JACOBIAN


class ExperimentWorker:
    """Runs recovery, sweep, generation and gradient-check experiments and records them"""

    def __init__(self, run_service: RunService, base_out_dir: str = DEFAULT_OUT_DIR):
        """
        Initialize the experiment worker

        Args:
            run_service: Registry that receives one record per experiment
            base_out_dir: Parent directory for runs without an explicit --out
        """
        self.run_service = run_service
        self.base_out_dir = base_out_dir

    # ------------------------------------------------------------------ problems

    def build_recovery_problem(self, params: ExperimentParams, moving: bool) -> RecoveryProblem:
        """Synthetic target map, its monitors and the base map for the descent"""
        spec = params.grid()
        if moving:
            amplitude = DEFAULT_MOVING_AMPLITUDE if params.amplitude is None else params.amplitude
            target = default_moving_boundary_map(spec, amplitude)
            base = harmonic_boundary_match(spec, target)
        else:
            amplitude = DEFAULT_FIXED_AMPLITUDE if params.amplitude is None else params.amplitude
            target = default_fixed_boundary_map(spec, amplitude)
            base = identity_map(spec)
        monitors = perturb_monitors(monitors_from_map(target), params.noise, np.random.default_rng(params.seed))
        return RecoveryProblem(spec, target, base, monitors)

    # ------------------------------------------------------------------ commands

    def recover(self, params: ExperimentParams, moving: bool = False) -> ExperimentOutcome:
        """Single recovery run with the curl setting from params"""
        command = COMMAND_RECOVER_MOVING if moving else COMMAND_RECOVER_FIXED

        def body(exporter: ExportService):
            problem = self.build_recovery_problem(params, moving)
            self._write_target(exporter, problem)
            case = self._run_case(problem, params, params.curl, params.alpha, exporter)
            return [case], {}

        return self._execute(command, params, body)

    def ablation(self, params: ExperimentParams, moving: bool = False) -> ExperimentOutcome:
        """Jacobian-only and Jacobian+curl runs on the same problem"""

        def body(exporter: ExportService):
            problem = self.build_recovery_problem(params, moving)
            self._write_target(exporter, problem)
            cases = [self._run_case(problem, params, curl, params.alpha,
                                    ExportService(str(exporter.path(case_slug(curl)))))
                     for curl in (False, True)]
            return cases, {'moving': moving}

        return self._execute(COMMAND_ABLATION, params, body)

    def sweep_alpha(self, params: ExperimentParams, alphas: Sequence[float] = DEFAULT_SWEEP_ALPHAS,
                    moving: bool = False) -> ExperimentOutcome:
        """Jacobian+curl runs for several alphas in parallel, plus one Jacobian-only reference"""

        def body(exporter: ExportService):
            problem = self.build_recovery_problem(params, moving)
            self._write_target(exporter, problem)
            get_plan(problem.spec)  # build the shared plan before the workers start
            jobs = [(False, params.alpha, SLUG_ONLY_JACOBIAN)]
            jobs += [(True, alpha, f'alpha_{alpha:g}') for alpha in alphas]
            with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
                futures = [pool.submit(self._run_case, problem, params, curl, alpha,
                                       ExportService(str(exporter.path(slug))), slug)
                           for curl, alpha, slug in jobs]
                cases = [future.result() for future in futures]
            for case in cases[1:]:
                case.label = f'{LABEL_JACOBIAN_CURL} (alpha={case.alpha:g})'
            return cases, {'alphas': ','.join(f'{a:g}' for a in alphas), 'moving': moving}

        return self._execute(COMMAND_SWEEP_ALPHA, params, body)

    def generate(self, params: ExperimentParams, monitors: MonitorPair) -> ExperimentOutcome:
        """Grid with prescribed (already normalized) monitors, fixed boundary"""

        def body(exporter: ExportService):
            base = identity_map(monitors.spec)
            opts = params.descent_options()
            result = run_descent(base, monitors, opts)
            T = result.final_T
            summary = jacobian_summary(T)
            if summary['folded_nodes']:
                logger.warning(f'Generated grid folds at {summary["folded_nodes"]} interior nodes')
            exporter.write_key_values_csv({
                'ssd_J': result.final_report.ssd_J,
                'ssd': result.final_report.ssd,
                'ssd_curl': result.final_report.ssd_curl,
                **summary,
            })
            exporter.write_history(result.history)
            exporter.write_transformation(T)
            exporter.write_vtk(T, point_data={
                'jacobian': jacobian_det(T, boundary=True),
                'curl': curl2d(T, boundary=True),
                'f0': monitors.f0,
                'g0': monitors.g0,
            }, title='generated grid')
            self._write_plots(exporter, T, None, params, 'Generated grid')
            case = CaseResult(case_label(params.curl), case_slug(params.curl), params.alpha, result)
            return [case], summary

        return self._execute(COMMAND_GENERATE, params, body)

    def gradcheck(self, params: ExperimentParams, probes: int, eps: float) -> ExperimentOutcome:
        """Adjoint gradient against central finite differences on a random problem"""

        def body(exporter: ExportService):
            spec = params.grid()
            rng = np.random.default_rng(params.seed)
            target = random_smooth_map(spec, rng, GRADCHECK_TARGET_SLOPE)
            monitors = perturb_monitors(monitors_from_map(target), params.noise, rng)
            grid_map = identity_map(spec)
            shift = random_smooth_map(spec, rng, GRADCHECK_CONTROL_SLOPE)
            control = ControlField(VectorField(
                spec,
                laplacian5(ScalarField(spec, shift.t1 - grid_map.t1)),
                laplacian5(ScalarField(spec, shift.t2 - grid_map.t2)),
            ))
            report = gradient_check(grid_map, monitors, control, probes, eps, rng,
                                    alpha=params.alpha, curl=params.curl)
            exporter.write_gradcheck(report.probes)
            max_error = float(report.max_relative_error)
            return [], {'max_relative_error': max_error, 'probes': probes, 'eps': eps,
                        'passed': bool(max_error <= GRADCHECK_TOLERANCE)}

        return self._execute(COMMAND_GRADCHECK, params, body)

    # ------------------------------------------------------------------ internals

    def _run_case(self, problem: RecoveryProblem, params: ExperimentParams, curl: bool, alpha: float,
                  exporter: ExportService, slug: Optional[str] = None) -> CaseResult:
        label = case_label(curl)
        logger.info(f'Running case "{label}" alpha={alpha:g} on {problem.spec.nx}x{problem.spec.ny}')
        result = run_descent(problem.base, problem.monitors, params.descent_options(alpha=alpha, curl=curl))
        # reports share one alpha so Jacobian-only runs are judged on the full objective
        report = compare_report(result.final_T, problem.target, problem.monitors, params.alpha)
        case = CaseResult(label, slug or case_slug(curl), alpha, result, report)
        self._write_case(exporter, case, problem, params)
        return case

    def _write_target(self, exporter: ExportService, problem: RecoveryProblem):
        exporter.write_transformation(problem.target, 'target')
        exporter.write_vtk(problem.target, 'target.vtk', title='target map')

    def _write_plots(self, exporter: ExportService, T: Transformation, reference: Optional[Transformation],
                     params: ExperimentParams, title: str):
        exporter.write_svg(T, reference=reference, title=title)
        for k, window in enumerate(params.zoom, start=1):
            exporter.write_svg(T, f'grid_zoom{k}.svg', reference=reference, zoom=window,
                               title=f'{title}, enlarged view {k}')

    def _write_case(self, exporter: ExportService, case: CaseResult, problem: RecoveryProblem,
                    params: ExperimentParams):
        T = case.result.final_T
        exporter.write_report(case.report)
        exporter.write_history(case.result.history)
        exporter.write_transformation(T)
        distance = np.hypot(T.t1 - problem.target.t1, T.t2 - problem.target.t2)
        exporter.write_vtk(T, point_data={
            'jacobian': jacobian_det(T, boundary=True),
            'curl': curl2d(T, boundary=True),
            'distance': ScalarField(T.spec, distance),
        }, title=case.label)
        self._write_plots(exporter, T, problem.target, params, case.label)

    def _execute(self, command: str, params: ExperimentParams,
                 body: Callable[[ExportService], Tuple[List[CaseResult], Dict]]) -> ExperimentOutcome:
        run = self.run_service.create_run(command, params.as_dict())
        run_id = run['run_id']
        out_dir = params.out_dir or os.path.join(self.base_out_dir, f'{command}_{run_id}')
        self.run_service.update_run(run_id, out_dir=out_dir)
        exporter = ExportService(out_dir)
        logger.info(f'Run {run_id} ({command}) writing to {out_dir}')

        started = time.perf_counter()
        try:
            cases, extra = body(exporter)
        except GridGenError as e:
            logger.error(f'Run {run_id} failed: {e}')
            self.run_service.update_run(run_id, status=RUN_STATUS_FAILED, stop_reason=str(e))
            raise
        elapsed = time.perf_counter() - started

        diverged = [case.label for case in cases if case.result.diverged]
        if command == COMMAND_GRADCHECK:
            exit_code = 0 if extra['passed'] else 1
            message = f'max relative gradient error {extra["max_relative_error"]:.3e}'
        elif diverged:
            exit_code = 1
            message = f'diverged: {", ".join(diverged)}'
        else:
            exit_code = 0
            message = 'finished'

        reports = {case.label: case.report.as_dict() for case in cases if case.report is not None}
        if len(reports) > 1:
            exporter.write_summary({case.label: case.report for case in cases},
                                   header=f'{command}, {params.nx}x{params.ny} grid, {params.iters} iterations')

        manifest = {'command': command, 'run_id': run_id}
        manifest.update(params.as_dict())
        manifest['out_dir'] = out_dir
        manifest.update({f'result.{key}': value for key, value in extra.items()})
        for case in cases:
            manifest[f'case.{case.slug}.alpha'] = case.alpha
            manifest[f'case.{case.slug}.stop_reason'] = case.result.stop_reason
            manifest[f'case.{case.slug}.iterations'] = case.result.iterations_run
            manifest[f'case.{case.slug}.elapsed'] = f'{case.result.elapsed:.3f}'
        manifest.update({
            'elapsed': f'{elapsed:.3f}',
            'version.gridgen': grid.__version__,
            'version.python': platform.python_version(),
            'version.numpy': np.__version__,
            'version.scipy': scipy.__version__,
            'created': datetime.now(timezone.utc).isoformat(),
        })
        exporter.write_manifest(manifest)

        stop_reasons = ','.join(f'{case.slug}:{case.result.stop_reason}' for case in cases) or None
        self.run_service.update_run(
            run_id,
            status=RUN_STATUS_DIVERGED if diverged else RUN_STATUS_FINISHED,
            stop_reason=stop_reasons,
            elapsed=elapsed,
            reports=reports,
            result=extra,
        )
        logger.info(f'Run {run_id} {message} in {elapsed:.2f}s')
        return ExperimentOutcome(run_id, command, Path(out_dir), cases, exit_code, message, extra)
