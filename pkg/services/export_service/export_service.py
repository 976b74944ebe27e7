import csv
import logging
import os
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure

from grid.field import ScalarField, Transformation, check_same_spec
from grid.field_io import write_transformation_csv
from grid.metrics import ComparisonReport, format_report_table, write_report_csv
from grid.optimizer import HistoryRecord, ProbeResult, write_history_csv

logger = logging.getLogger(__name__)

VTK_HEADER = '# vtk DataFile Version 3.0'


class ExportService:
    """Writes run artifacts (grids, reports, manifests) into one output directory"""

    def __init__(self, out_dir: str):
        """
        Initialize the exporter

        Args:
            out_dir: Directory that receives the artifacts (created if missing)
        """
        self.out_dir = Path(out_dir)
        os.makedirs(self.out_dir, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_vtk(self, T: Transformation, name: str = 'grid.vtk',
                  point_data: Optional[Mapping[str, ScalarField]] = None,
                  title: str = 'grid transformation') -> Path:
        """
        Write T as a legacy ASCII VTK structured grid

        Args:
            T: Transformation whose node positions are written (z = 0)
            name: File name inside the output directory
            point_data: Optional scalar fields attached to the nodes
            title: Second header line

        Returns:
            Path of the written file
        """
        spec = T.spec
        path = self.path(name)
        count = spec.nx * spec.ny
        # VTK structured grids are x-fastest; arrays are [i, j] so transpose
        xs = T.t1.T.ravel()
        ys = T.t2.T.ravel()
        with path.open('w') as handle:
            handle.write(f'{VTK_HEADER}\n{title}\nASCII\nDATASET STRUCTURED_GRID\n')
            handle.write(f'DIMENSIONS {spec.nx} {spec.ny} 1\n')
            handle.write(f'POINTS {count} double\n')
            for x, y in zip(xs, ys):
                handle.write(f'{x:.17g} {y:.17g} 0\n')
            if point_data:
                handle.write(f'POINT_DATA {count}\n')
                for field_name, field in point_data.items():
                    check_same_spec(spec, field.spec)
                    handle.write(f'SCALARS {field_name} double 1\nLOOKUP_TABLE default\n')
                    for value in field.values.T.ravel():
                        handle.write(f'{value:.17g}\n')
        logger.info(f'Wrote VTK grid to {path}')
        return path

    def write_svg(self, T: Transformation, name: str = 'grid.svg', reference: Optional[Transformation] = None,
                  zoom: Optional[Tuple[float, float, float, float]] = None, title: str = '') -> Path:
        """
        Plot both families of grid lines of T, optionally with the reference
        map's nodes as black stars

        Args:
            T: Constructed map
            name: File name inside the output directory
            reference: Map drawn as star markers (the recovery target)
            zoom: (x0, x1, y0, y1) window for an enlarged view
            title: Plot title

        Returns:
            Path of the written file
        """
        path = self.path(name)
        rows = [np.column_stack([T.t1[:, j], T.t2[:, j]]) for j in range(T.spec.ny)]
        columns = [np.column_stack([T.t1[i, :], T.t2[i, :]]) for i in range(T.spec.nx)]

        # Figure without pyplot: the alpha sweep plots from worker threads
        fig = Figure(figsize=(8, 8))
        ax = fig.add_subplot()
        ax.add_collection(LineCollection(rows + columns, colors='red', linewidths=0.5))
        if reference is not None:
            ax.plot(reference.t1.ravel(), reference.t2.ravel(), 'k*', markersize=2, linestyle='none')
        if zoom is not None:
            ax.set_xlim(zoom[0], zoom[1])
            ax.set_ylim(zoom[2], zoom[3])
        else:
            ax.autoscale_view()
        ax.set_aspect('equal')
        if title:
            ax.set_title(title)
        fig.savefig(path, format='svg')
        logger.info(f'Wrote SVG plot to {path}')
        return path

    def write_transformation(self, T: Transformation, stem: str = 'T') -> Tuple[Path, Path]:
        return write_transformation_csv(T, self.path(stem))

    def write_history(self, history: Sequence[HistoryRecord], name: str = 'history.csv') -> Path:
        return write_history_csv(history, self.path(name))

    def write_report(self, report: ComparisonReport, name: str = 'report.csv') -> Path:
        return write_report_csv(report, self.path(name))

    def write_summary(self, reports: Mapping[str, ComparisonReport], name: str = 'summary.txt',
                      header: str = '') -> Path:
        """Human readable table with one column per case"""
        path = self.path(name)
        text = format_report_table(reports)
        path.write_text((header + '\n\n' if header else '') + text + '\n')
        logger.info(f'Wrote summary table to {path}')
        return path

    def write_key_values_csv(self, values: Mapping[str, float], name: str = 'report.csv') -> Path:
        """One header row of keys and one row of values"""
        path = self.path(name)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(list(values))
            writer.writerow([format(v, '.17g') if isinstance(v, float) else v for v in values.values()])
        logger.info(f'Wrote report to {path}')
        return path

    def write_gradcheck(self, probes: Sequence[ProbeResult], name: str = 'gradcheck.csv') -> Path:
        path = self.path(name)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(['i', 'j', 'component', 'adjoint', 'finite_difference', 'relative_error'])
            for probe in probes:
                writer.writerow([probe.node[0], probe.node[1], probe.component,
                                 format(probe.adjoint, '.17g'), format(probe.finite_difference, '.17g'),
                                 format(probe.relative_error, '.6e')])
        logger.info(f'Wrote gradient check ({len(probes)} probes) to {path}')
        return path

    def write_manifest(self, entries: Dict[str, object], name: str = 'manifest.txt') -> Path:
        """Plain key=value file, one entry per line in insertion order"""
        path = self.path(name)
        with path.open('w') as handle:
            for key, value in entries.items():
                handle.write(f'{key}={value}\n')
        logger.info(f'Wrote manifest to {path}')
        return path
