"""
Finite-difference operators on uniform grids.

Interior nodes use central differences. Boundary entries of J and curl are
zero unless a full diagnostic map is requested, in which case second order
one-sided stencils fill them in. Only the interior values take part in the
objective and its gradient.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from grid.field import GridSpec, ScalarField, Transformation, VectorField, check_same_spec


@dataclass(frozen=True, eq=False)
class ResidualPair:
    """P = J(T) - f0 and Q = alpha*(curl(T) - g0), zero on the boundary"""
    P: ScalarField
    Q: ScalarField

    def __post_init__(self):
        check_same_spec(self.P.spec, self.Q.spec)

    @property
    def spec(self) -> GridSpec:
        return self.P.spec


def central_partials(values: np.ndarray, hx: float, hy: float) -> Tuple[np.ndarray, np.ndarray]:
    """Central differences at interior nodes, zero on the boundary"""
    fx = np.zeros_like(values)
    fy = np.zeros_like(values)
    fx[1:-1, 1:-1] = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2.0 * hx)
    fy[1:-1, 1:-1] = (values[1:-1, 2:] - values[1:-1, :-2]) / (2.0 * hy)
    return fx, fy


def full_partials(values: np.ndarray, hx: float, hy: float) -> Tuple[np.ndarray, np.ndarray]:
    """Central differences inside, second order one-sided stencils on the boundary"""
    fx, fy = np.gradient(values, hx, hy, edge_order=2)
    return fx, fy


def partials(field: ScalarField) -> Tuple[ScalarField, ScalarField]:
    spec = field.spec
    fx, fy = full_partials(field.values, spec.hx, spec.hy)
    return ScalarField(spec, fx), ScalarField(spec, fy)


def transformation_partials(T: Transformation, boundary: bool = False):
    """(T1x, T1y, T2x, T2y) arrays"""
    diff = full_partials if boundary else central_partials
    t1x, t1y = diff(T.t1, T.spec.hx, T.spec.hy)
    t2x, t2y = diff(T.t2, T.spec.hx, T.spec.hy)
    return t1x, t1y, t2x, t2y


def jacobian_from_partials(t1x, t1y, t2x, t2y) -> np.ndarray:
    return t1x * t2y - t1y * t2x


def curl_from_partials(t1x, t1y, t2x, t2y) -> np.ndarray:
    return t2x - t1y


def jacobian_det(T: Transformation, boundary: bool = False) -> ScalarField:
    """
    Jacobian determinant T1x*T2y - T1y*T2x

    Args:
        T: Transformation
        boundary: Fill boundary entries with one-sided stencils (diagnostics)

    Returns:
        ScalarField, boundary entries zero unless boundary is True
    """
    return ScalarField(T.spec, jacobian_from_partials(*transformation_partials(T, boundary)))


def curl2d(T: Transformation, boundary: bool = False) -> ScalarField:
    """Scalar curl T2x - T1y"""
    return ScalarField(T.spec, curl_from_partials(*transformation_partials(T, boundary)))


def adjoint_divergence_arrays(ax: np.ndarray, ay: np.ndarray, hx: float, hy: float) -> np.ndarray:
    # boundary entries of a never enter: they are zeroed before differencing
    masked_x = np.zeros_like(ax)
    masked_y = np.zeros_like(ay)
    masked_x[1:-1, 1:-1] = ax[1:-1, 1:-1]
    masked_y[1:-1, 1:-1] = ay[1:-1, 1:-1]
    div = np.zeros_like(ax)
    div[1:-1, 1:-1] = ((masked_x[2:, 1:-1] - masked_x[:-2, 1:-1]) / (2.0 * hx)
                       + (masked_y[1:-1, 2:] - masked_y[1:-1, :-2]) / (2.0 * hy))
    return div


def adjoint_divergence(a: VectorField) -> ScalarField:
    """
    Discrete divergence equal to minus the transpose of the interior central
    gradient: sum_int (a . Dv) w == -sum_int (div(a) v) w for every v that
    vanishes on the boundary.
    """
    spec = a.spec
    return ScalarField(spec, adjoint_divergence_arrays(a.x.values, a.y.values, spec.hx, spec.hy))
