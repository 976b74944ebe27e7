"""
Dirichlet Poisson problems for the 5-point Laplacian.

The default plan diagonalizes the interior operator with type-I discrete sine
transforms along both axes, which is exact for the 5-point stencil. The
sparse plan factorizes the same interior matrix once and is used when a grid
has a single interior row or column.
"""

import functools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import fft, sparse
from scipy.sparse import linalg as sparse_linalg

from grid.field import GridSpec, ScalarField, check_same_spec
from grid.grid_constants import MIN_NODES
from grid.grid_errors import GridSpecError, InvalidParameterError

logger = logging.getLogger(__name__)

METHOD_DST = 'dst'
METHOD_SPARSE = 'sparse'


def _second_difference_eigenvalues(n: int, h: float) -> np.ndarray:
    k = np.arange(1, n + 1)
    return (2.0 * np.cos(np.pi * k / (n + 1)) - 2.0) / (h * h)


def _interior_matrix(spec: GridSpec) -> sparse.csc_matrix:
    """5-point Laplacian on interior nodes, C-order flattening of [i, j]"""
    mx, my = spec.nx - 2, spec.ny - 2
    lx = sparse.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(mx, mx)) / (spec.hx ** 2)
    ly = sparse.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(my, my)) / (spec.hy ** 2)
    return (sparse.kron(lx, sparse.identity(my)) + sparse.kron(sparse.identity(mx), ly)).tocsc()


@dataclass(frozen=True, eq=False)
class PoissonPlan:
    """Precomputed, immutable solver for one grid"""
    spec: GridSpec
    method: str
    denominator: Optional[np.ndarray] = None
    factor: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        """Solve on the (nx-2, ny-2) interior block with zero boundary data"""
        if self.method == METHOD_DST:
            coefficients = fft.dstn(rhs, type=1)
            return fft.idstn(coefficients / self.denominator, type=1)
        return self.factor(rhs.ravel()).reshape(rhs.shape)


@functools.lru_cache(maxsize=32)
def get_plan(spec: GridSpec, method: str = METHOD_DST) -> PoissonPlan:
    """
    Build (or fetch the cached) Poisson plan for a grid

    Args:
        spec: Grid geometry
        method: 'dst' (transform based) or 'sparse' (LU factorization)

    Returns:
        PoissonPlan shared by every solve on this grid
    """
    if spec.nx < MIN_NODES or spec.ny < MIN_NODES:
        raise GridSpecError(f'Poisson solve needs an interior, got {spec.nx}x{spec.ny}')
    if method not in (METHOD_DST, METHOD_SPARSE):
        raise InvalidParameterError(f'Unknown Poisson method {method!r}')
    if method == METHOD_DST and min(spec.nx, spec.ny) == MIN_NODES:
        # a single interior line: the factorization is trivially cheap
        method = METHOD_SPARSE
    if method == METHOD_DST:
        lam_x = _second_difference_eigenvalues(spec.nx - 2, spec.hx)
        lam_y = _second_difference_eigenvalues(spec.ny - 2, spec.hy)
        plan = PoissonPlan(spec, METHOD_DST, denominator=lam_x[:, None] + lam_y[None, :])
    else:
        plan = PoissonPlan(spec, METHOD_SPARSE, factor=sparse_linalg.factorized(_interior_matrix(spec)))
    logger.debug(f'Built {plan.method} Poisson plan for {spec.nx}x{spec.ny} grid')
    return plan


def laplacian5_array(u: np.ndarray, hx: float, hy: float) -> np.ndarray:
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = ((u[2:, 1:-1] + u[:-2, 1:-1] - 2.0 * u[1:-1, 1:-1]) / (hx * hx)
                       + (u[1:-1, 2:] + u[1:-1, :-2] - 2.0 * u[1:-1, 1:-1]) / (hy * hy))
    return out


def laplacian5(u: ScalarField) -> ScalarField:
    """5-point Laplacian at interior nodes, zero on the boundary"""
    return ScalarField(u.spec, laplacian5_array(u.values, u.spec.hx, u.spec.hy))


def solve_zero_array(rhs: np.ndarray, plan: PoissonPlan) -> np.ndarray:
    u = np.zeros(plan.spec.shape)
    u[1:-1, 1:-1] = plan.solve_interior(rhs[1:-1, 1:-1])
    return u


def solve_dirichlet_zero(rhs: ScalarField, plan: Optional[PoissonPlan] = None) -> ScalarField:
    """
    Solve laplacian5(u) = rhs at interior nodes with u = 0 on the boundary

    Boundary entries of rhs are ignored.
    """
    plan = plan or get_plan(rhs.spec)
    check_same_spec(plan.spec, rhs.spec)
    return ScalarField(rhs.spec, solve_zero_array(rhs.values, plan))


def solve_dirichlet(rhs: ScalarField, boundary: ScalarField,
                    plan: Optional[PoissonPlan] = None) -> ScalarField:
    """
    Solve laplacian5(u) = rhs with u equal to the boundary entries of
    `boundary` on the boundary (its interior entries are ignored)
    """
    spec = check_same_spec(rhs.spec, boundary.spec)
    plan = plan or get_plan(spec)
    lifted = boundary.values.copy()
    lifted[1:-1, 1:-1] = 0.0
    corrected = rhs.values - laplacian5_array(lifted, spec.hx, spec.hy)
    return ScalarField(spec, lifted + solve_zero_array(corrected, plan))
