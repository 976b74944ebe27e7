"""
Comparison metrics between a constructed map T and a reference map T0:
objective components, nodewise distances and cell angle differences.
"""

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import numpy as np

from grid.diffops import jacobian_det
from grid.field import Transformation, check_same_spec
from grid.grid_errors import DegenerateCellError, FieldFormatError
from grid.objective import MonitorPair, evaluate_ssd

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ('ssd_J', 'ssd', 'max_distance', 'avg_distance', 'max_angle_diff', 'avg_angle_diff')

REPORT_ROW_LABELS = {
    'ssd_J': 'ssd_J',
    'ssd': 'ssd',
    'max_distance': 'maximal distance',
    'avg_distance': 'average distance',
    'max_angle_diff': 'maximal angle difference',
    'avg_angle_diff': 'average angle difference',
}


@dataclass(frozen=True)
class ComparisonReport:
    ssd_J: float
    ssd: float
    max_distance: float
    avg_distance: float
    max_angle_diff: float
    avg_angle_diff: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def distance_stats(T: Transformation, T0: Transformation) -> Tuple[float, float]:
    """Max and mean Euclidean node distance over all nodes"""
    check_same_spec(T.spec, T0.spec)
    distance = np.hypot(T.t1 - T0.t1, T.t2 - T0.t2)
    return float(np.max(distance)), float(np.mean(distance))


def cell_angles(T: Transformation) -> np.ndarray:
    """
    Interior angles in degrees of every cell, shape (nx-1, ny-1, 4)

    Corners are ordered (i, j), (i+1, j), (i+1, j+1), (i, j+1).
    """
    P = np.stack([T.t1, T.t2], axis=-1)
    corners = [P[:-1, :-1], P[1:, :-1], P[1:, 1:], P[:-1, 1:]]
    angles = []
    for k, corner in enumerate(corners):
        e1 = corners[(k + 1) % 4] - corner
        e2 = corners[(k - 1) % 4] - corner
        n1 = np.linalg.norm(e1, axis=-1)
        n2 = np.linalg.norm(e2, axis=-1)
        degenerate = (n1 == 0.0) | (n2 == 0.0)
        if np.any(degenerate):
            cell = tuple(int(v) for v in np.argwhere(degenerate)[0])
            raise DegenerateCellError(cell)
        cosine = np.clip(np.sum(e1 * e2, axis=-1) / (n1 * n2), -1.0, 1.0)
        angles.append(np.degrees(np.arccos(cosine)))
    return np.stack(angles, axis=-1)


def angle_stats(T: Transformation, T0: Transformation) -> Tuple[float, float]:
    """Max and mean absolute difference of corresponding cell angles, degrees"""
    check_same_spec(T.spec, T0.spec)
    difference = np.abs(cell_angles(T) - cell_angles(T0))
    return float(np.max(difference)), float(np.mean(difference))


def compare_report(T: Transformation, T0: Transformation, monitors: MonitorPair, alpha: float) -> ComparisonReport:
    """
    Assemble the comparison of T against T0

    ssd always includes the curl term weighted by alpha, so runs that
    ignored curl are judged on the same objective.
    """
    objective = evaluate_ssd(T, monitors, alpha)
    max_distance, avg_distance = distance_stats(T, T0)
    max_angle, avg_angle = angle_stats(T, T0)
    return ComparisonReport(
        ssd_J=objective.ssd_J,
        ssd=objective.ssd,
        max_distance=max_distance,
        avg_distance=avg_distance,
        max_angle_diff=max_angle,
        avg_angle_diff=avg_angle,
    )


def jacobian_summary(T: Transformation) -> Dict[str, float]:
    """Min/max interior Jacobian and the number of folded nodes"""
    interior = jacobian_det(T).interior
    return {
        'min_jacobian': float(np.min(interior)),
        'max_jacobian': float(np.max(interior)),
        'folded_nodes': int(np.count_nonzero(interior <= 0.0)),
    }


def report_to_row(report: ComparisonReport) -> Tuple[float, ...]:
    return tuple(getattr(report, column) for column in REPORT_COLUMNS)


def write_report_csv(report: ComparisonReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        writer.writerow([format(v, '.17g') for v in report_to_row(report)])
    logger.info(f'Wrote report to {path}')
    return path


def read_report_csv(path: Union[str, Path]) -> ComparisonReport:
    with Path(path).open(newline='') as handle:
        rows = list(csv.DictReader(handle))
    if not rows or any(column not in rows[0] for column in REPORT_COLUMNS):
        raise FieldFormatError(f"{path} is not a comparison report (expected columns {','.join(REPORT_COLUMNS)})")
    return ComparisonReport(**{column: float(rows[0][column]) for column in REPORT_COLUMNS})


def format_report_table(reports: Mapping[str, ComparisonReport]) -> str:
    """Metrics as rows, cases as columns"""
    labels = list(reports)
    name_width = max(len(label) for label in REPORT_ROW_LABELS.values())
    widths = [max(len(label), 12) for label in labels]
    lines = [' ' * name_width + ' | ' + ' | '.join(label.rjust(w) for label, w in zip(labels, widths))]
    lines.append('-' * len(lines[0]))
    for column, row_label in REPORT_ROW_LABELS.items():
        cells = [f'{getattr(reports[label], column):.4f}'.rjust(w) for label, w in zip(labels, widths)]
        lines.append(row_label.ljust(name_width) + ' | ' + ' | '.join(cells))
    return '\n'.join(lines)
