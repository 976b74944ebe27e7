import numpy as np
import pytest

from grid.diffops import adjoint_divergence, central_partials, curl2d, jacobian_det, partials
from grid.field import ScalarField, Transformation, VectorField, identity_map, make_uniform_grid


def unit_grid(n=9):
    return make_uniform_grid(n, n, [1, n, 1, n])


def affine_map(spec, a11, a12, a21, a22):
    X, Y = spec.coordinates()
    return Transformation.from_arrays(spec, a11 * X + a12 * Y + 0.5, a21 * X + a22 * Y - 1.0)


def test_partials_linear_and_bilinear():
    spec = unit_grid()
    fx, fy = partials(ScalarField.from_function(spec, lambda x, y: x))
    assert np.allclose(fx.interior, 1.0, atol=1e-12)
    assert np.allclose(fy.interior, 0.0, atol=1e-12)

    X, Y = spec.coordinates()
    fx, fy = partials(ScalarField(spec, X * Y))
    assert np.allclose(fx.interior, Y[1:-1, 1:-1], atol=1e-12)
    assert np.allclose(fy.interior, X[1:-1, 1:-1], atol=1e-12)


def test_partials_quadratic_is_exact_on_unit_grid():
    spec = unit_grid()
    X, _ = spec.coordinates()
    fx, _ = partials(ScalarField(spec, X ** 2))
    assert np.array_equal(fx.interior, 2.0 * X[1:-1, 1:-1])


@pytest.mark.parametrize('matrix, expected', [
    ((1.0, 0.0, 0.0, 1.0), 1.0),
    ((2.0, 0.0, 0.0, 1.0), 2.0),
    ((1.0, 0.3, 0.1, 1.0), 0.97),
])
def test_jacobian_det_affine(matrix, expected):
    spec = make_uniform_grid(7, 9, [0, 1.5, -1, 1])
    T = affine_map(spec, *matrix)
    assert np.allclose(jacobian_det(T).interior, expected, atol=1e-12)
    # one-sided stencils are exact for affine maps as well
    assert np.allclose(jacobian_det(T, boundary=True).values, expected, atol=1e-12)


def test_jacobian_det_boundary_is_zero_by_default():
    spec = unit_grid(5)
    J = jacobian_det(identity_map(spec)).values
    assert np.all(J[0, :] == 0.0) and np.all(J[:, -1] == 0.0)


@pytest.mark.parametrize('matrix, expected', [
    ((1.0, 0.0, 0.0, 1.0), 0.0),
    ((1.0, 0.0, 0.4, 1.0), 0.4),
    ((1.0, -0.2, 0.0, 1.0), 0.2),
])
def test_curl2d_affine(matrix, expected):
    spec = make_uniform_grid(8, 6, [0, 1, 0, 1])
    T = affine_map(spec, *matrix)
    assert np.allclose(curl2d(T).interior, expected, atol=1e-12)
    assert np.allclose(curl2d(T, boundary=True).values, expected, atol=1e-12)


def smooth_map(spec):
    X, Y = spec.coordinates()
    return Transformation.from_arrays(spec, X + 0.1 * np.sin(X) * np.sin(Y), Y + 0.1 * np.cos(X) * np.sin(2 * Y))


def exact_jacobian(spec):
    X, Y = spec.coordinates()
    t1x = 1 + 0.1 * np.cos(X) * np.sin(Y)
    t1y = 0.1 * np.sin(X) * np.cos(Y)
    t2x = -0.1 * np.sin(X) * np.sin(2 * Y)
    t2y = 1 + 0.2 * np.cos(X) * np.cos(2 * Y)
    return t1x * t2y - t1y * t2x


def test_jacobian_det_second_order():
    coarse = make_uniform_grid(33, 33, [0, 2, 0, 2])
    fine = make_uniform_grid(65, 65, [0, 2, 0, 2])
    coarse_error = np.abs(jacobian_det(smooth_map(coarse)).values - exact_jacobian(coarse))[1:-1, 1:-1]
    fine_error = np.abs(jacobian_det(smooth_map(fine)).values - exact_jacobian(fine))[2:-2:2, 2:-2:2]
    ratio = coarse_error.max() / fine_error.max()
    assert 3.5 <= ratio <= 4.5


def test_adjoint_divergence_of_constant_field():
    spec = unit_grid(9)
    a = VectorField.from_arrays(spec, np.full(spec.shape, 1.5), np.full(spec.shape, -0.5))
    div = adjoint_divergence(a).values
    assert np.allclose(div[2:-2, 2:-2], 0.0, atol=1e-14)
    assert np.all(div[0, :] == 0.0)


def test_adjoint_divergence_of_position_field():
    spec = unit_grid(9)
    X, Y = spec.coordinates()
    div = adjoint_divergence(VectorField.from_arrays(spec, X, Y)).values
    assert np.allclose(div[2:-2, 2:-2], 2.0, atol=1e-12)


def test_adjoint_divergence_ignores_boundary_entries():
    rng = np.random.default_rng(5)
    spec = unit_grid(7)
    ax, ay = rng.standard_normal(spec.shape), rng.standard_normal(spec.shape)
    bx, by = ax.copy(), ay.copy()
    bx[0, :] = 100.0
    by[:, -1] = -100.0
    div_a = adjoint_divergence(VectorField.from_arrays(spec, ax, ay))
    div_b = adjoint_divergence(VectorField.from_arrays(spec, bx, by))
    assert np.array_equal(div_a.values, div_b.values)


@pytest.mark.parametrize('shape', [(5, 5), (7, 7), (9, 14), (17, 17), (33, 20), (65, 65)])
@pytest.mark.parametrize('seed', range(2))
def test_summation_by_parts(shape, seed):
    rng = np.random.default_rng(seed)
    spec = make_uniform_grid(shape[0], shape[1], [0, 1, 0, 1.5])
    ax, ay = rng.standard_normal(spec.shape), rng.standard_normal(spec.shape)
    v = np.zeros(spec.shape)
    v[1:-1, 1:-1] = rng.standard_normal((spec.nx - 2, spec.ny - 2))
    vx, vy = central_partials(v, spec.hx, spec.hy)
    w = spec.cell_area
    terms = (ax * vx + ay * vy)[1:-1, 1:-1] * w
    div = adjoint_divergence(VectorField.from_arrays(spec, ax, ay)).values
    rhs = -np.sum((div * v)[1:-1, 1:-1]) * w
    # tolerance relative to the summed magnitude
    assert np.sum(terms) == pytest.approx(rhs, abs=1e-13 * max(1.0, np.sum(np.abs(terms))))
