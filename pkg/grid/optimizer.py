"""
Gradient descent on the Poisson control.

Each iteration computes the adjoint gradient g at the current control,
updates f <- f - tstep * g, solves for the displacement and rebuilds
T = base + u. With the line search on, tstep is halved until ssd strictly
decreases; the first trial of an iteration is twice the last accepted step,
capped at opts.tstep.

A large curl weight alpha stiffens only the curl part of the problem. The
line search therefore steps along g_jac + g_curl (the gradient with alpha
divided out of the curl part) whenever that direction is downhill for the
weighted ssd, so the step it settles on does not shrink with alpha.
"""

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from grid.field import Transformation, VectorField, axpy, max_abs, vector_inner
from grid.grid_constants import (
    DEFAULT_ALPHA,
    DEFAULT_DIVERGENCE_FACTOR,
    DEFAULT_FD_EPS,
    DEFAULT_MAX_HALVINGS,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    DEFAULT_TOL_WINDOW,
    DEFAULT_TSTEP,
    STOP_DIVERGENCE,
    STOP_MAX_ITERS,
    STOP_TOLERANCE,
)
from grid.grid_errors import BoundaryNodeError, InvalidParameterError, NonFiniteFieldError
from grid.objective import ControlField, MonitorPair, ObjectiveFunction, ObjectiveReport
from grid.poisson import PoissonPlan

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ('iter', 'ssd', 'ssd_J', 'ssd_curl', 'max_grad')


@dataclass(frozen=True)
class DescentOptions:
    tstep: float = DEFAULT_TSTEP
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    alpha: float = DEFAULT_ALPHA
    curl: bool = True
    line_search: bool = True
    balance_curl: bool = True
    record_every: int = 1
    tol_window: int = DEFAULT_TOL_WINDOW
    divergence_factor: float = DEFAULT_DIVERGENCE_FACTOR
    max_halvings: int = DEFAULT_MAX_HALVINGS

    def __post_init__(self):
        if not self.tstep > 0.0:
            raise InvalidParameterError(f'tstep must be positive, got {self.tstep}')
        if self.max_iters < 1:
            raise InvalidParameterError(f'max_iters must be at least 1, got {self.max_iters}')
        if not self.tol >= 0.0:
            raise InvalidParameterError(f'tol must be non-negative, got {self.tol}')
        if not self.alpha > 0.0:
            raise InvalidParameterError(f'alpha must be positive, got {self.alpha}')
        if self.record_every < 1 or self.tol_window < 1 or self.max_halvings < 0:
            raise InvalidParameterError('record_every and tol_window must be >= 1, max_halvings >= 0')


@dataclass(frozen=True)
class HistoryRecord:
    iteration: int
    ssd: float
    ssd_J: float
    ssd_curl: float
    max_grad: float

    def as_row(self) -> Tuple:
        return (self.iteration, self.ssd, self.ssd_J, self.ssd_curl, self.max_grad)


@dataclass
class RunResult:
    final_control: ControlField
    final_T: Transformation
    history: List[HistoryRecord]
    iterations_run: int
    stop_reason: str
    initial_report: ObjectiveReport
    final_report: ObjectiveReport
    elapsed: float = 0.0
    accepted_steps: List[float] = field(default_factory=list)

    @property
    def diverged(self) -> bool:
        return self.stop_reason == STOP_DIVERGENCE


def _record(iteration: int, report: ObjectiveReport, max_grad: float) -> HistoryRecord:
    return HistoryRecord(iteration, report.ssd, report.ssd_J, report.ssd_curl, max_grad)


def _stalled(ssd_window: Sequence[float], tol: float) -> bool:
    """Relative ssd change across the window below tol"""
    first, last = ssd_window[0], ssd_window[-1]
    return abs(first - last) <= tol * max(abs(first), np.finfo(float).tiny)


def _evaluate(objective: ObjectiveFunction, control: ControlField, balance_curl: bool
              ) -> Tuple[ObjectiveReport, Optional[VectorField], Optional[VectorField]]:
    """
    Report, gradient and descent direction at control

    With balance_curl the direction is g_jac + g_curl, the gradient with the
    curl weight divided out, as long as it points downhill for the weighted
    objective. Gradient and direction are None when ssd overflowed.
    """
    weight = objective.weight
    if not balance_curl or weight in (0.0, 1.0):
        report, gradient = objective.value_and_gradient(control)
        return report, gradient, gradient
    report, g_jac, g_curl = objective.gradient_parts(control)
    if g_jac is None:
        return report, None, None
    gradient = axpy(weight, g_curl, g_jac)
    direction = axpy(1.0, g_curl, g_jac)
    if vector_inner(direction, gradient) <= 0.0:
        direction = gradient
    return report, gradient, direction


def _stepped(control: ControlField, direction: VectorField, step: float) -> Optional[ControlField]:
    """control - step * direction, or None when the update overflows"""
    with np.errstate(over='ignore', invalid='ignore'):
        f1 = control.f1 - step * direction.x.values
        f2 = control.f2 - step * direction.y.values
    if not (np.isfinite(f1).all() and np.isfinite(f2).all()):
        return None
    return ControlField.from_arrays(control.spec, f1, f2)


def run_descent(base: Transformation, monitors: MonitorPair, opts: DescentOptions,
                plan: Optional[PoissonPlan] = None) -> RunResult:
    """
    Minimize ssd over the control field starting from f = 0, T = base

    Plain descent steps along the exact gradient. The line search steps
    along the curl-balanced direction when opts.balance_curl is set.

    Args:
        base: Base map T* (identity for fixed-boundary problems)
        monitors: Target Jacobian and curl
        opts: Step size, stopping and weighting options
        plan: Shared Poisson plan for the grid

    Returns:
        RunResult with the final control, map, history and stop reason
    """
    started = time.perf_counter()
    objective = ObjectiveFunction(base, monitors, opts.alpha, curl=opts.curl, plan=plan)
    balance_curl = opts.balance_curl and opts.line_search
    control = ControlField.zeros(base.spec)

    report, gradient, direction = _evaluate(objective, control, balance_curl)
    if gradient is None:
        raise NonFiniteFieldError(f'Initial ssd is not finite: {report.ssd}')
    initial = report
    max_grad = max_abs(gradient)
    history = [_record(0, report, max_grad)]
    ssd_trace = [report.ssd]
    accepted: List[float] = []
    last_step = opts.tstep / 2.0
    stop_reason = STOP_MAX_ITERS
    iteration = 0

    logger.info(f'Descent start: ssd={report.ssd:.6g} max|g|={max_grad:.3g} '
                f'alpha={objective.weight:g} line_search={opts.line_search} balance_curl={balance_curl}')

    while iteration < opts.max_iters:
        if report.ssd == 0.0 or max_grad == 0.0:
            stop_reason = STOP_TOLERANCE
            break

        if opts.line_search:
            step = min(opts.tstep, 2.0 * last_step)
            for _ in range(opts.max_halvings + 1):
                candidate = _stepped(control, direction, step)
                if candidate is not None and objective.value(candidate).ssd < report.ssd:
                    break
                step *= 0.5
            else:
                logger.info(f'Line search found no decrease at iteration {iteration + 1}')
                stop_reason = STOP_TOLERANCE
                break
            last_step = step
        else:
            step = opts.tstep
            candidate = _stepped(control, direction, step)

        iteration += 1
        accepted.append(step)
        if candidate is None:
            trial = ObjectiveReport(np.inf, np.inf, np.inf, objective.weight)
            trial_gradient = trial_direction = None
        else:
            trial, trial_gradient, trial_direction = _evaluate(objective, candidate, balance_curl)
        ssd_trace.append(trial.ssd)

        if trial_gradient is None or trial.ssd > opts.divergence_factor * initial.ssd:
            # an overflowing iterate is logged but not kept
            overflow = trial_gradient is None
            history.append(_record(iteration, trial, np.inf if overflow else max_abs(trial_gradient)))
            if not overflow:
                control, report, max_grad = candidate, trial, max_abs(trial_gradient)
            logger.warning(f'Descent diverged at iteration {iteration}: ssd={trial.ssd:.6g} '
                           f'(initial {initial.ssd:.6g})')
            stop_reason = STOP_DIVERGENCE
            break

        control, report, gradient, direction = candidate, trial, trial_gradient, trial_direction
        max_grad = max_abs(gradient)

        if iteration % opts.record_every == 0:
            history.append(_record(iteration, report, max_grad))
            logger.debug(f'iter {iteration}: ssd={report.ssd:.6g} step={step:.3g} max|g|={max_grad:.3g}')

        if len(ssd_trace) > opts.tol_window and _stalled(ssd_trace[-opts.tol_window - 1:], opts.tol):
            stop_reason = STOP_TOLERANCE
            break

    if history[-1].iteration != iteration:
        history.append(_record(iteration, report, max_grad))

    elapsed = time.perf_counter() - started
    logger.info(f'Descent stopped ({stop_reason}) after {iteration} iterations: '
                f'ssd={report.ssd:.6g} in {elapsed:.2f}s')
    return RunResult(
        final_control=control,
        final_T=objective.transformation(control),
        history=history,
        iterations_run=iteration,
        stop_reason=stop_reason,
        initial_report=initial,
        final_report=report,
        elapsed=elapsed,
        accepted_steps=accepted,
    )


def fd_gradient_probe(base: Transformation, monitors: MonitorPair, control: ControlField,
                      node: Tuple[int, int], component: int, eps: float = DEFAULT_FD_EPS,
                      alpha: float = DEFAULT_ALPHA, curl: bool = True,
                      plan: Optional[PoissonPlan] = None) -> float:
    """
    Central finite difference of ssd for a unit perturbation of one control
    entry, divided by the quadrature weight so it compares to g entrywise

    Args:
        base: Base map
        monitors: Target monitors
        control: Control at which to differentiate
        node: Interior node (i, j)
        component: 1 for f1, 2 for f2
        eps: Perturbation size (> 0)

    Returns:
        Finite-difference estimate of g_component[node]
    """
    if not eps > 0.0:
        raise InvalidParameterError(f'eps must be positive, got {eps}')
    if component not in (1, 2):
        raise InvalidParameterError(f'component must be 1 or 2, got {component}')
    i, j = node
    spec = control.spec
    if not spec.is_interior(i, j):
        raise BoundaryNodeError(f'Node ({i}, {j}) is not an interior node')

    objective = ObjectiveFunction(base, monitors, alpha, curl=curl, plan=plan)

    def shifted(delta: float) -> float:
        f1, f2 = control.f1.copy(), control.f2.copy()
        (f1 if component == 1 else f2)[i, j] += delta
        return objective.value(ControlField.from_arrays(spec, f1, f2)).ssd

    return (shifted(eps) - shifted(-eps)) / (2.0 * eps) / spec.cell_area


@dataclass(frozen=True)
class ProbeResult:
    node: Tuple[int, int]
    component: int
    adjoint: float
    finite_difference: float
    relative_error: float


@dataclass
class GradientCheckReport:
    probes: List[ProbeResult]

    @property
    def max_relative_error(self) -> float:
        return max((p.relative_error for p in self.probes), default=0.0)


def gradient_check(base: Transformation, monitors: MonitorPair, control: ControlField,
                   probes: int, eps: float, rng: np.random.Generator,
                   alpha: float = DEFAULT_ALPHA, curl: bool = True,
                   plan: Optional[PoissonPlan] = None) -> GradientCheckReport:
    """
    Compare the adjoint gradient to fd_gradient_probe at random interior nodes

    The relative error of a probe is |fd - g| / max(|g|, |fd|, 1e-6 * max|g|).
    """
    objective = ObjectiveFunction(base, monitors, alpha, curl=curl, plan=plan)
    _, gradient = objective.value_and_gradient(control)
    spec = control.spec
    floor = 1e-6 * max_abs(gradient) or np.finfo(float).tiny
    results = []
    for _ in range(probes):
        node = (int(rng.integers(1, spec.nx - 1)), int(rng.integers(1, spec.ny - 1)))
        component = int(rng.integers(1, 3))
        adjoint = float((gradient.x if component == 1 else gradient.y).values[node])
        fd = fd_gradient_probe(base, monitors, control, node, component, eps,
                               alpha=alpha, curl=curl, plan=objective.plan)
        error = abs(fd - adjoint) / max(abs(adjoint), abs(fd), floor)
        results.append(ProbeResult(node, component, adjoint, fd, error))
        logger.debug(f'probe {node} f{component}: adjoint={adjoint:.10g} fd={fd:.10g} rel={error:.2e}')
    return GradientCheckReport(results)


def write_history_csv(history: Sequence[HistoryRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(HISTORY_COLUMNS)
        for record in history:
            writer.writerow([record.iteration] + [format(v, '.17g') for v in record.as_row()[1:]])
    logger.info(f'Wrote history ({len(history)} rows) to {path}')
    return path
