"""
Least-squares mismatch between (J(T), curl(T)) and the monitors, and its
exact discrete gradient with respect to the Poisson control f.

    ssd = 1/2 * sum_int [(J(T) - f0)^2 + alpha * (curl(T) - g0)^2] * hx * hy
    T   = base + u,   laplacian5(u_i) = f_i,   u = 0 on the boundary

The gradient is taken with respect to the same interior quadrature inner
product, so d ssd / d f_i[node] == g_i[node] * hx * hy.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from grid.diffops import (
    ResidualPair,
    adjoint_divergence_arrays,
    central_partials,
    curl_from_partials,
    jacobian_from_partials,
)
from grid.field import (
    GridSpec,
    ScalarField,
    Transformation,
    VectorField,
    check_same_spec,
    translate,
    with_zero_boundary,
)
from grid.grid_errors import InfeasibleMonitorError, InvalidParameterError
from grid.poisson import PoissonPlan, get_plan, solve_zero_array


@dataclass(frozen=True, eq=False)
class MonitorPair:
    """Prescribed Jacobian determinant f0 and curl g0"""
    f0: ScalarField
    g0: ScalarField

    def __post_init__(self):
        check_same_spec(self.f0.spec, self.g0.spec)
        if np.any(self.f0.interior <= 0.0):
            raise InfeasibleMonitorError('f0 must be positive at every interior node')

    @property
    def spec(self) -> GridSpec:
        return self.f0.spec


@dataclass(frozen=True, eq=False)
class ControlField:
    """Poisson right-hand side (f1, f2); boundary entries are forced to zero"""
    f: VectorField

    def __post_init__(self):
        object.__setattr__(self, 'f', VectorField(self.f.spec,
                                                  with_zero_boundary(self.f.x),
                                                  with_zero_boundary(self.f.y)))

    @classmethod
    def zeros(cls, spec: GridSpec) -> 'ControlField':
        return cls(VectorField.zeros(spec))

    @classmethod
    def from_arrays(cls, spec: GridSpec, f1: np.ndarray, f2: np.ndarray) -> 'ControlField':
        return cls(VectorField.from_arrays(spec, f1, f2))

    @property
    def spec(self) -> GridSpec:
        return self.f.spec

    @property
    def f1(self) -> np.ndarray:
        return self.f.x.values

    @property
    def f2(self) -> np.ndarray:
        return self.f.y.values


@dataclass(frozen=True)
class ObjectiveReport:
    ssd: float
    ssd_J: float
    ssd_curl: float
    alpha: float


def check_alpha(alpha: float) -> float:
    if not alpha > 0.0:
        raise InvalidParameterError(f'alpha must be positive, got {alpha}')
    return float(alpha)


def _curl_weight(alpha: float, curl: bool) -> float:
    return check_alpha(alpha) if curl else 0.0


def _terms(T1: np.ndarray, T2: np.ndarray, monitors: MonitorPair, spec: GridSpec):
    """Partials of T and interior residual arrays J - f0, curl - g0"""
    t1x, t1y = central_partials(T1, spec.hx, spec.hy)
    t2x, t2y = central_partials(T2, spec.hx, spec.hy)
    jac_res = np.zeros(spec.shape)
    curl_res = np.zeros(spec.shape)
    jac_res[1:-1, 1:-1] = (jacobian_from_partials(t1x, t1y, t2x, t2y)[1:-1, 1:-1]
                           - monitors.f0.interior)
    curl_res[1:-1, 1:-1] = (curl_from_partials(t1x, t1y, t2x, t2y)[1:-1, 1:-1]
                            - monitors.g0.interior)
    return (t1x, t1y, t2x, t2y), jac_res, curl_res


def _report(jac_res: np.ndarray, curl_res: np.ndarray, weight: float, spec: GridSpec) -> ObjectiveReport:
    ssd_J = 0.5 * float(np.sum(jac_res * jac_res)) * spec.cell_area
    ssd_curl = 0.5 * float(np.sum(curl_res * curl_res)) * spec.cell_area
    return ObjectiveReport(ssd=ssd_J + weight * ssd_curl, ssd_J=ssd_J, ssd_curl=ssd_curl, alpha=weight)


def _adjoint_arrays(t_partials, P: np.ndarray, Q: np.ndarray):
    t1x, t1y, t2x, t2y = t_partials
    # a1 = -[P(T2y, -T2x) + Q(0, -1)],  a2 = -[P(-T1y, T1x) + Q(1, 0)]
    a1 = (-P * t2y, P * t2x + Q)
    a2 = (P * t1y - Q, -P * t1x)
    return a1, a2


def assemble_transformation(base: Transformation, control: ControlField,
                            plan: Optional[PoissonPlan] = None) -> Tuple[VectorField, Transformation]:
    """
    Displacement u from laplacian5(u_i) = f_i and the map T = base + u

    Args:
        base: Base map (identity or a boundary match map)
        control: Control field f
        plan: Poisson plan for the grid (looked up when omitted)

    Returns:
        (u, T)
    """
    spec = check_same_spec(base.spec, control.spec)
    plan = plan or get_plan(spec)
    u = VectorField.from_arrays(spec, solve_zero_array(control.f1, plan), solve_zero_array(control.f2, plan))
    return u, translate(base, u)


def evaluate_ssd(T: Transformation, monitors: MonitorPair, alpha: float, curl: bool = True) -> ObjectiveReport:
    """
    Objective value with its Jacobian and curl parts

    With curl=False the curl term is left out of ssd (reported alpha is 0)
    while ssd_curl is still measured.
    """
    weight = _curl_weight(alpha, curl)
    spec = check_same_spec(T.spec, monitors.spec)
    _, jac_res, curl_res = _terms(T.t1, T.t2, monitors, spec)
    return _report(jac_res, curl_res, weight, spec)


def residual_fields(T: Transformation, monitors: MonitorPair, alpha: float, curl: bool = True) -> ResidualPair:
    weight = _curl_weight(alpha, curl)
    spec = check_same_spec(T.spec, monitors.spec)
    _, jac_res, curl_res = _terms(T.t1, T.t2, monitors, spec)
    return ResidualPair(ScalarField(spec, jac_res), ScalarField(spec, weight * curl_res))


def adjoint_vector_fields(T: Transformation, residuals: ResidualPair) -> Tuple[VectorField, VectorField]:
    """Adjoint fields a1, a2 built from the same central partials as J and curl"""
    spec = check_same_spec(T.spec, residuals.spec)
    t_partials = central_partials(T.t1, spec.hx, spec.hy) + central_partials(T.t2, spec.hx, spec.hy)
    a1, a2 = _adjoint_arrays(t_partials, residuals.P.values, residuals.Q.values)
    return VectorField.from_arrays(spec, *a1), VectorField.from_arrays(spec, *a2)


def control_gradient(a1: VectorField, a2: VectorField, plan: Optional[PoissonPlan] = None) -> VectorField:
    """g_i = solve_dirichlet_zero(adjoint_divergence(a_i))"""
    spec = check_same_spec(a1.spec, a2.spec)
    plan = plan or get_plan(spec)
    g1 = solve_zero_array(adjoint_divergence_arrays(a1.x.values, a1.y.values, spec.hx, spec.hy), plan)
    g2 = solve_zero_array(adjoint_divergence_arrays(a2.x.values, a2.y.values, spec.hx, spec.hy), plan)
    return VectorField.from_arrays(spec, g1, g2)


class ObjectiveFunction:
    """ssd as a function of the control for a fixed base map and monitors"""

    def __init__(self, base: Transformation, monitors: MonitorPair, alpha: float,
                 curl: bool = True, plan: Optional[PoissonPlan] = None):
        self.spec = check_same_spec(base.spec, monitors.spec)
        self.base = base
        self.monitors = monitors
        self.alpha = check_alpha(alpha)
        self.curl = curl
        self.weight = _curl_weight(alpha, curl)
        self.plan = plan or get_plan(self.spec)

    def _positions(self, f1: np.ndarray, f2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return (self.base.t1 + solve_zero_array(f1, self.plan),
                self.base.t2 + solve_zero_array(f2, self.plan))

    def transformation(self, control: ControlField) -> Transformation:
        return assemble_transformation(self.base, control, self.plan)[1]

    def _evaluate(self, control: ControlField):
        """Partials, residuals and report at control; overflow shows up as a non-finite ssd"""
        with np.errstate(over='ignore', invalid='ignore'):
            T1, T2 = self._positions(control.f1, control.f2)
            t_partials, jac_res, curl_res = _terms(T1, T2, self.monitors, self.spec)
            report = _report(jac_res, curl_res, self.weight, self.spec)
        return t_partials, jac_res, curl_res, report

    def _gradient(self, t_partials, P: np.ndarray, Q: np.ndarray) -> VectorField:
        spec = self.spec
        a1, a2 = _adjoint_arrays(t_partials, P, Q)
        g1 = solve_zero_array(adjoint_divergence_arrays(*a1, spec.hx, spec.hy), self.plan)
        g2 = solve_zero_array(adjoint_divergence_arrays(*a2, spec.hx, spec.hy), self.plan)
        return VectorField.from_arrays(spec, g1, g2)

    def value(self, control: ControlField) -> ObjectiveReport:
        return self._evaluate(control)[3]

    def value_and_gradient(self, control: ControlField) -> Tuple[ObjectiveReport, Optional[VectorField]]:
        """
        Objective report and the gradient g with respect to (f1, f2)

        The gradient is None when ssd is not finite (the control overflowed).
        """
        t_partials, jac_res, curl_res, report = self._evaluate(control)
        if not np.isfinite(report.ssd):
            return report, None
        return report, self._gradient(t_partials, jac_res, self.weight * curl_res)

    def gradient_parts(self, control: ControlField
                       ) -> Tuple[ObjectiveReport, Optional[VectorField], Optional[VectorField]]:
        """
        Objective report with the gradients of ssd_J and of the unweighted
        ssd_curl, so that gradient == g_jac + weight * g_curl

        Both parts are None when ssd is not finite.
        """
        t_partials, jac_res, curl_res, report = self._evaluate(control)
        if not np.isfinite(report.ssd):
            return report, None, None
        zeros = np.zeros(self.spec.shape)
        return (report, self._gradient(t_partials, jac_res, zeros),
                self._gradient(t_partials, zeros, curl_res))
