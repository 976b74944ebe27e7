"""
Synthetic target maps for recovery experiments, monitor extraction and the
boundary match base map.

Displacements are measured in node spacings: an amplitude of 1 moves a node
by at most one hx (or hy).
"""

import logging
from typing import Optional

import numpy as np

from grid.diffops import central_partials, curl2d, jacobian_det
from grid.field import GridSpec, ScalarField, Transformation, check_same_spec, identity_map
from grid.grid_constants import DEFAULT_FIXED_AMPLITUDE, DEFAULT_MOVING_AMPLITUDE
from grid.grid_errors import InfeasibleMapError, InvalidParameterError
from grid.objective import MonitorPair
from grid.poisson import PoissonPlan, solve_dirichlet

logger = logging.getLogger(__name__)


def _check_amplitude(amplitude: float) -> float:
    if not amplitude >= 0.0:
        raise InvalidParameterError(f'amplitude must be non-negative, got {amplitude}')
    return float(amplitude)


def _sine(n: int, cycles: float) -> np.ndarray:
    """sin(cycles * pi * k / (n - 1)) for k = 0..n-1, exactly zero at both ends"""
    values = np.sin(cycles * np.pi * np.arange(n) / (n - 1))
    values[0] = 0.0
    values[-1] = 0.0
    return values


def _zero_boundary(values: np.ndarray) -> np.ndarray:
    values[0, :] = 0.0
    values[-1, :] = 0.0
    values[:, 0] = 0.0
    values[:, -1] = 0.0
    return values


def _displaced(spec: GridSpec, d1: np.ndarray, d2: np.ndarray) -> Transformation:
    X, Y = spec.coordinates()
    return Transformation.from_arrays(spec, X + d1, Y + d2)


def check_orientation(T: Transformation, name: str) -> float:
    """Minimum interior Jacobian; raises InfeasibleMapError if it is not positive"""
    min_jac = float(np.min(jacobian_det(T).interior))
    if min_jac <= 0.0:
        raise InfeasibleMapError(f'{name} folds: min interior Jacobian {min_jac:.6g} <= 0')
    return min_jac


def _fixed_displacement(spec: GridSpec, amplitude: float):
    sx2, sx1 = _sine(spec.nx, 2.0), _sine(spec.nx, 1.0)
    sy2, sy1 = _sine(spec.ny, 2.0), _sine(spec.ny, 1.0)
    d1 = amplitude * spec.hx * np.outer(sx2, sy1)
    d2 = amplitude * spec.hy * np.outer(sx1, sy2)
    return _zero_boundary(d1), _zero_boundary(d2)


def default_fixed_boundary_map(spec: GridSpec, amplitude: float = DEFAULT_FIXED_AMPLITUDE) -> Transformation:
    """
    T0 = id + amplitude * (hx sin(2 pi s) sin(pi t), hy sin(pi s) sin(2 pi t))

    Boundary nodes stay on the background grid. The map has nonzero curl.
    """
    amplitude = _check_amplitude(amplitude)
    T0 = _displaced(spec, *_fixed_displacement(spec, amplitude))
    min_jac = check_orientation(T0, 'Fixed boundary map')
    logger.debug(f'Fixed boundary map amplitude={amplitude:g} min J={min_jac:.6g}')
    return T0


def default_moving_boundary_map(spec: GridSpec, amplitude: float = DEFAULT_MOVING_AMPLITUDE,
                                interior_amplitude: float = DEFAULT_FIXED_AMPLITUDE) -> Transformation:
    """
    Fixed boundary map plus a tangential slide of the boundary nodes

    Each edge slides along itself by amplitude * h * sin(2 pi fraction), where
    fraction is the arclength fraction along the edge; the slide is carried
    inward with cos^2 weights. Corners stay fixed.
    """
    amplitude = _check_amplitude(amplitude)
    d1, d2 = _fixed_displacement(spec, _check_amplitude(interior_amplitude))
    s, t = spec.normalized_coordinates()
    d1 = d1 + amplitude * spec.hx * _sine(spec.nx, 2.0)[:, None] * np.cos(np.pi * t) ** 2
    d2 = d2 + amplitude * spec.hy * _sine(spec.ny, 2.0)[None, :] * np.cos(np.pi * s) ** 2
    T0 = _displaced(spec, d1, d2)

    edges = (T0.t1[:, 0], T0.t1[:, -1], T0.t2[0, :], T0.t2[-1, :])
    if any(np.any(np.diff(edge) <= 0.0) for edge in edges):
        raise InfeasibleMapError(f'Boundary slide amplitude {amplitude:g} makes the boundary self-intersect')
    min_jac = check_orientation(T0, 'Moving boundary map')
    logger.debug(f'Moving boundary map amplitude={amplitude:g} min J={min_jac:.6g}')
    return T0


def random_smooth_map(spec: GridSpec, rng: np.random.Generator, max_slope: float = 0.2,
                      modes: int = 3) -> Transformation:
    """
    Identity plus a random low-mode sine displacement vanishing on the
    boundary, scaled so every displacement partial is at most max_slope
    """
    if not 0.0 < max_slope < 0.5:
        raise InvalidParameterError(f'max_slope must lie in (0, 0.5), got {max_slope}')
    displacement = []
    for _ in range(2):
        d = np.zeros(spec.shape)
        for k in range(1, modes + 1):
            for m in range(1, modes + 1):
                d += rng.standard_normal() / (k * m) * np.outer(_sine(spec.nx, k), _sine(spec.ny, m))
        displacement.append(d)
    slopes = [np.max(np.abs(p)) for d in displacement for p in central_partials(d, spec.hx, spec.hy)]
    scale = max_slope / max(max(slopes), np.finfo(float).tiny)
    T = _displaced(spec, scale * displacement[0], scale * displacement[1])
    check_orientation(T, 'Random map')
    return T


def monitors_from_map(T0: Transformation) -> MonitorPair:
    """f0 = J(T0), g0 = curl(T0) with the objective's own stencils"""
    return MonitorPair(jacobian_det(T0), curl2d(T0))


def perturb_monitors(monitors: MonitorPair, noise: float, rng: np.random.Generator) -> MonitorPair:
    """Add Gaussian noise of standard deviation `noise` at interior nodes"""
    if not noise >= 0.0:
        raise InvalidParameterError(f'noise must be non-negative, got {noise}')
    if noise == 0.0:
        return monitors
    spec = monitors.spec

    def noisy(field: ScalarField) -> ScalarField:
        values = field.values.copy()
        values[1:-1, 1:-1] += noise * rng.standard_normal((spec.nx - 2, spec.ny - 2))
        return ScalarField(spec, values)

    return MonitorPair(noisy(monitors.f0), noisy(monitors.g0))


def harmonic_boundary_match(spec: GridSpec, target_boundary: Transformation,
                            plan: Optional[PoissonPlan] = None) -> Transformation:
    """
    T* = id + w with laplacian5(w) = 0 and w = target - id on the boundary

    Only the boundary positions of target_boundary are read. The boundary of
    T* equals them exactly.
    """
    check_same_spec(spec, target_boundary.spec)
    grid = identity_map(spec)
    zero = ScalarField.zeros(spec)
    w1 = solve_dirichlet(zero, ScalarField(spec, target_boundary.t1 - grid.t1), plan)
    w2 = solve_dirichlet(zero, ScalarField(spec, target_boundary.t2 - grid.t2), plan)
    t1 = grid.t1 + w1.values
    t2 = grid.t2 + w2.values
    interior = (slice(1, -1), slice(1, -1))
    boundary1, boundary2 = target_boundary.t1.copy(), target_boundary.t2.copy()
    boundary1[interior] = t1[interior]
    boundary2[interior] = t2[interior]
    return Transformation.from_arrays(spec, boundary1, boundary2)
