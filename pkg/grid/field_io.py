# Field CSV serialization

import csv
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from grid.field import GridSpec, ScalarField, Transformation, VectorField, check_same_spec
from grid.grid_constants import CSV_FLOAT_FORMAT
from grid.grid_errors import FieldFormatError, GridGenError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    return format(float(value), CSV_FLOAT_FORMAT)


def write_field_csv(field: ScalarField, path: PathLike) -> Path:
    """
    Write a field as CSV

    The first line holds nx,ny,xmin,xmax,ymin,ymax; every following line is
    i,j,value with i varying fastest.
    """
    spec = field.spec
    path = Path(path)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow([spec.nx, spec.ny] + [_fmt(b) for b in spec.bounds()])
        for j in range(spec.ny):
            for i in range(spec.nx):
                writer.writerow([i, j, _fmt(field.values[i, j])])
    logger.debug(f'Wrote field {spec.nx}x{spec.ny} to {path}')
    return path


def read_field_csv(path: PathLike) -> ScalarField:
    path = Path(path)
    with path.open(newline='') as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows:
        raise FieldFormatError(f'{path}: empty field file')
    header = rows[0]
    if len(header) != 6:
        raise FieldFormatError(f'{path}: header must be nx,ny,xmin,xmax,ymin,ymax')
    try:
        spec = GridSpec(int(header[0]), int(header[1]), *(float(v) for v in header[2:]))
    except ValueError as e:
        if isinstance(e, GridGenError):
            raise
        raise FieldFormatError(f'{path}: bad header {header}') from e

    values = np.full(spec.shape, np.nan)
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise FieldFormatError(f'{path}:{line_no}: expected i,j,value')
        try:
            i, j, value = int(row[0]), int(row[1]), float(row[2])
        except ValueError as e:
            raise FieldFormatError(f'{path}:{line_no}: {e}') from e
        if not (0 <= i < spec.nx and 0 <= j < spec.ny):
            raise FieldFormatError(f'{path}:{line_no}: node ({i},{j}) outside grid')
        values[i, j] = value
    if np.isnan(values).any():
        raise FieldFormatError(f'{path}: missing node values')
    return ScalarField(spec, values)


def transformation_paths(stem: PathLike) -> Tuple[Path, Path]:
    stem = Path(stem)
    return (stem.with_name(stem.name + '_T1.csv'), stem.with_name(stem.name + '_T2.csv'))


def write_transformation_csv(T: Transformation, stem: PathLike) -> Tuple[Path, Path]:
    """Write T as two component files <stem>_T1.csv and <stem>_T2.csv"""
    path1, path2 = transformation_paths(stem)
    write_field_csv(T.positions.x, path1)
    write_field_csv(T.positions.y, path2)
    return path1, path2


def read_transformation_csv(stem: PathLike) -> Transformation:
    path1, path2 = transformation_paths(stem)
    t1 = read_field_csv(path1)
    t2 = read_field_csv(path2)
    spec = check_same_spec(t1.spec, t2.spec)
    return Transformation(spec, VectorField(spec, t1, t2))
