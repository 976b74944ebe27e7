import numpy as np
import pytest

from grid.diffops import jacobian_det
from grid.field import Transformation, identity_map, make_uniform_grid
from grid.grid_constants import LABEL_JACOBIAN_CURL, LABEL_ONLY_JACOBIAN
from grid.grid_errors import DegenerateCellError, FieldFormatError, SpecMismatchError
from grid.metrics import (
    REPORT_COLUMNS,
    REPORT_ROW_LABELS,
    ComparisonReport,
    angle_stats,
    cell_angles,
    compare_report,
    distance_stats,
    format_report_table,
    jacobian_summary,
    read_report_csv,
    report_to_row,
    write_report_csv,
)
from grid.objective import evaluate_ssd
from grid.synth import default_fixed_boundary_map, monitors_from_map

SPEC = make_uniform_grid(17, 17, [1, 17, 1, 17])
UNIT_CELL = make_uniform_grid(2 + 1, 2 + 1, [0, 2, 0, 2])


def sheared(spec, k):
    X, Y = spec.coordinates()
    return Transformation.from_arrays(spec, X + k * Y, Y)


def test_distance_stats():
    T0 = default_fixed_boundary_map(SPEC, 0.5)
    assert distance_stats(T0, T0) == (0.0, 0.0)

    shifted = Transformation.from_arrays(SPEC, T0.t1 + 0.3, T0.t2 + 0.4)
    max_d, avg_d = distance_stats(shifted, T0)
    assert max_d == pytest.approx(0.5, abs=1e-12)
    assert avg_d == pytest.approx(0.5, abs=1e-12)

    t1 = T0.t1.copy()
    t1[5, 7] += 0.25
    max_d, avg_d = distance_stats(Transformation.from_arrays(SPEC, t1, T0.t2), T0)
    assert max_d == 0.25
    assert avg_d == pytest.approx(0.25 / SPEC.nx / SPEC.ny, rel=1e-12)


def test_cell_angles_of_identity_are_right_angles():
    angles = cell_angles(identity_map(SPEC))
    assert angles.shape == (16, 16, 4)
    assert np.allclose(angles, 90.0, atol=1e-12)


def test_angle_stats_identical_and_rotated():
    T0 = default_fixed_boundary_map(SPEC, 0.5)
    assert angle_stats(T0, T0) == (0.0, 0.0)
    theta = 0.3
    rotated = Transformation.from_arrays(SPEC,
                                         np.cos(theta) * T0.t1 - np.sin(theta) * T0.t2,
                                         np.sin(theta) * T0.t1 + np.cos(theta) * T0.t2)
    max_a, avg_a = angle_stats(rotated, T0)
    assert max_a <= 1e-10
    assert avg_a <= max_a


@pytest.mark.parametrize('k, expected', [
    (1.0, 45.0),
    (0.5, 90.0 - np.degrees(np.arctan2(1.0, 0.5))),
])
def test_angle_stats_of_shear(k, expected):
    max_a, avg_a = angle_stats(sheared(UNIT_CELL, k), identity_map(UNIT_CELL))
    assert max_a == pytest.approx(expected, abs=1e-9)
    assert avg_a == pytest.approx(expected, abs=1e-9)


def test_degenerate_cell_is_reported():
    t1 = identity_map(UNIT_CELL).t1.copy()
    t2 = identity_map(UNIT_CELL).t2.copy()
    t1[2, 1], t2[2, 1] = t1[1, 1], t2[1, 1]
    with pytest.raises(DegenerateCellError) as info:
        cell_angles(Transformation.from_arrays(UNIT_CELL, t1, t2))
    assert info.value.cell in {(1, 0), (1, 1)}


def test_metrics_require_same_grid():
    with pytest.raises(SpecMismatchError):
        distance_stats(identity_map(SPEC), identity_map(UNIT_CELL))


def test_compare_report_composition():
    T0 = default_fixed_boundary_map(SPEC, 0.5)
    monitors = monitors_from_map(T0)
    zero = compare_report(T0, T0, monitors, 1.0)
    assert all(value == 0.0 for value in report_to_row(zero))

    T = identity_map(SPEC)
    report = compare_report(T, T0, monitors, 2.0)
    objective = evaluate_ssd(T, monitors, 2.0)
    assert report.ssd == objective.ssd
    assert report.ssd_J == objective.ssd_J
    assert (report.max_distance, report.avg_distance) == distance_stats(T, T0)
    assert (report.max_angle_diff, report.avg_angle_diff) == angle_stats(T, T0)
    assert report.max_distance >= report.avg_distance > 0.0


def test_report_csv_is_exact(tmp_path):
    report = ComparisonReport(0.1, 1 / 3, 2.0, 0.7, 45.0, 1e-9)
    path = write_report_csv(report, tmp_path / 'report.csv')
    assert path.read_text().splitlines()[0] == ','.join(REPORT_COLUMNS)
    assert read_report_csv(path) == report


def test_report_csv_rejects_other_tables(tmp_path):
    path = tmp_path / 'report.csv'
    path.write_text('ssd_J,ssd\n0.5,0.7\n')
    with pytest.raises(FieldFormatError):
        read_report_csv(path)


def test_format_report_table():
    reports = {
        LABEL_ONLY_JACOBIAN: ComparisonReport(0.01, 0.2, 0.3444, 0.1, 10.0, 2.0),
        LABEL_JACOBIAN_CURL: ComparisonReport(0.001, 0.002, 0.0706, 0.01, 1.0, 0.2),
    }
    table = format_report_table(reports)
    header = table.splitlines()[0]
    assert LABEL_ONLY_JACOBIAN in header and LABEL_JACOBIAN_CURL in header
    for row_label in REPORT_ROW_LABELS.values():
        assert row_label in table
    assert '0.3444' in table and '0.0706' in table


def test_jacobian_summary_counts_folds():
    T = default_fixed_boundary_map(SPEC, 0.5)
    summary = jacobian_summary(T)
    J = jacobian_det(T).interior
    assert summary == {'min_jacobian': J.min(), 'max_jacobian': J.max(), 'folded_nodes': 0}

    X, Y = SPEC.coordinates()
    flipped = Transformation.from_arrays(SPEC, -X, Y)
    assert jacobian_summary(flipped)['folded_nodes'] == 15 * 15


def test_metrics_are_symmetric():
    T0 = default_fixed_boundary_map(SPEC, 0.5)
    T = default_fixed_boundary_map(SPEC, 0.2)
    assert distance_stats(T, T0) == distance_stats(T0, T)
    assert angle_stats(T, T0) == angle_stats(T0, T)


@pytest.mark.parametrize('theta, shift', [(0.3, (2.0, -1.5)), (np.pi / 2, (0.0, 10.0)), (-1.1, (-7.0, 3.0))])
def test_metrics_ignore_a_common_rigid_motion(theta, shift):
    T0 = default_fixed_boundary_map(SPEC, 0.5)
    T = default_fixed_boundary_map(SPEC, 0.2)

    def moved(M):
        return Transformation.from_arrays(SPEC,
                                          np.cos(theta) * M.t1 - np.sin(theta) * M.t2 + shift[0],
                                          np.sin(theta) * M.t1 + np.cos(theta) * M.t2 + shift[1])

    distances = distance_stats(T, T0)
    angles = angle_stats(T, T0)
    moved_distances = distance_stats(moved(T), moved(T0))
    moved_angles = angle_stats(moved(T), moved(T0))
    assert moved_distances == pytest.approx(distances, rel=1e-12, abs=1e-12)
    assert moved_angles == pytest.approx(angles, abs=1e-9)
