"""
Grid geometry and node-indexed field containers.

Arrays are stored with shape (nx, ny) and indexed [i, j], i along x.
Serialized orderings (CSV, VTK) are x-fastest.
"""

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from grid.grid_constants import MIN_NODES
from grid.grid_errors import GridSpecError, NonFiniteFieldError, SpecMismatchError


@dataclass(frozen=True)
class GridSpec:
    """Uniform node-centered 2D grid"""
    nx: int
    ny: int
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if self.nx < MIN_NODES or self.ny < MIN_NODES:
            raise GridSpecError(f'Grid needs at least {MIN_NODES} nodes per axis, got {self.nx}x{self.ny}')
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise GridSpecError(
                f'Inverted or empty bounds [{self.xmin}, {self.xmax}] x [{self.ymin}, {self.ymax}]')

    @property
    def hx(self) -> float:
        return (self.xmax - self.xmin) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.ymax - self.ymin) / (self.ny - 1)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        """Quadrature weight of one node"""
        return self.hx * self.hy

    def x_coords(self) -> np.ndarray:
        return self.xmin + np.arange(self.nx) * self.hx

    def y_coords(self) -> np.ndarray:
        return self.ymin + np.arange(self.ny) * self.hy

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays X, Y of shape (nx, ny)"""
        return np.meshgrid(self.x_coords(), self.y_coords(), indexing='ij')

    def normalized_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node coordinates mapped to s, t in [0, 1]"""
        s = np.arange(self.nx) / (self.nx - 1)
        t = np.arange(self.ny) / (self.ny - 1)
        return np.meshgrid(s, t, indexing='ij')

    def is_interior(self, i: int, j: int) -> bool:
        return 0 < i < self.nx - 1 and 0 < j < self.ny - 1

    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.xmax, self.ymin, self.ymax)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values at every node of a grid"""
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.spec.shape:
            raise SpecMismatchError(f'Field shape {values.shape} does not match grid {self.spec.shape}')
        if not np.all(np.isfinite(values)):
            raise NonFiniteFieldError('Field contains non-finite values')
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, spec: GridSpec) -> 'ScalarField':
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def full(cls, spec: GridSpec, value: float) -> 'ScalarField':
        return cls(spec, np.full(spec.shape, float(value)))

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> 'ScalarField':
        """Sample fn(X, Y) at the nodes"""
        X, Y = spec.coordinates()
        return cls(spec, np.broadcast_to(fn(X, Y), spec.shape).astype(np.float64))

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]


@dataclass(frozen=True, eq=False)
class VectorField:
    """Two scalar components over one grid"""
    spec: GridSpec
    x: ScalarField
    y: ScalarField

    def __post_init__(self):
        check_same_spec(self.spec, self.x.spec, self.y.spec)

    @classmethod
    def zeros(cls, spec: GridSpec) -> 'VectorField':
        return cls(spec, ScalarField.zeros(spec), ScalarField.zeros(spec))

    @classmethod
    def from_arrays(cls, spec: GridSpec, x: np.ndarray, y: np.ndarray) -> 'VectorField':
        return cls(spec, ScalarField(spec, x), ScalarField(spec, y))

    def components(self) -> Tuple[ScalarField, ScalarField]:
        return (self.x, self.y)


@dataclass(frozen=True, eq=False)
class Transformation:
    """Node positions (T1, T2) of a grid map"""
    spec: GridSpec
    positions: VectorField

    def __post_init__(self):
        check_same_spec(self.spec, self.positions.spec)

    @classmethod
    def from_arrays(cls, spec: GridSpec, t1: np.ndarray, t2: np.ndarray) -> 'Transformation':
        return cls(spec, VectorField.from_arrays(spec, t1, t2))

    @property
    def t1(self) -> np.ndarray:
        return self.positions.x.values

    @property
    def t2(self) -> np.ndarray:
        return self.positions.y.values


Field = Union[ScalarField, VectorField]


def check_same_spec(*specs: GridSpec) -> GridSpec:
    """Raise SpecMismatchError unless all specs are equal"""
    first = specs[0]
    for other in specs[1:]:
        if other != first:
            raise SpecMismatchError(f'Grid mismatch: {first} vs {other}')
    return first


def make_uniform_grid(nx: int, ny: int, bounds: Sequence[float]) -> GridSpec:
    """
    Build a uniform grid

    Args:
        nx: Node count along x (>= 3)
        ny: Node count along y (>= 3)
        bounds: (xmin, xmax, ymin, ymax)

    Returns:
        GridSpec with derived spacings
    """
    if len(bounds) != 4:
        raise GridSpecError(f'Expected 4 bounds, got {len(bounds)}')
    xmin, xmax, ymin, ymax = (float(b) for b in bounds)
    return GridSpec(int(nx), int(ny), xmin, xmax, ymin, ymax)


def identity_map(spec: GridSpec) -> Transformation:
    X, Y = spec.coordinates()
    return Transformation.from_arrays(spec, X, Y)


def interior_mask(spec: GridSpec) -> np.ndarray:
    mask = np.zeros(spec.shape, dtype=bool)
    mask[1:-1, 1:-1] = True
    return mask


def with_zero_boundary(field: ScalarField) -> ScalarField:
    return ScalarField(field.spec, np.where(interior_mask(field.spec), field.values, 0.0))


def weighted_l2_inner(a: ScalarField, b: ScalarField) -> float:
    """Interior midpoint quadrature of a*b"""
    spec = check_same_spec(a.spec, b.spec)
    return float(np.sum(a.interior * b.interior) * spec.cell_area)


def vector_inner(a: VectorField, b: VectorField) -> float:
    return weighted_l2_inner(a.x, b.x) + weighted_l2_inner(a.y, b.y)


def axpy(alpha: float, x: Field, y: Field) -> Field:
    """y + alpha*x for scalar or vector fields"""
    if isinstance(x, VectorField) and isinstance(y, VectorField):
        spec = check_same_spec(x.spec, y.spec)
        return VectorField(spec, axpy(alpha, x.x, y.x), axpy(alpha, x.y, y.y))
    if isinstance(x, ScalarField) and isinstance(y, ScalarField):
        spec = check_same_spec(x.spec, y.spec)
        return ScalarField(spec, y.values + alpha * x.values)
    raise TypeError(f'axpy needs two fields of the same kind, got {type(x).__name__} and {type(y).__name__}')


def max_abs(field: Field) -> float:
    if isinstance(field, VectorField):
        return max(max_abs(field.x), max_abs(field.y))
    return float(np.max(np.abs(field.values)))


def translate(base: Transformation, displacement: VectorField) -> Transformation:
    """Nodewise base + displacement"""
    spec = check_same_spec(base.spec, displacement.spec)
    return Transformation(spec, axpy(1.0, displacement, base.positions))
