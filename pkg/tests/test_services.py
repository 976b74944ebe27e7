import numpy as np
import pytest

from grid.field import ScalarField, identity_map, make_uniform_grid
from grid.field_io import read_transformation_csv
from grid.grid_constants import LABEL_JACOBIAN_CURL, LABEL_ONLY_JACOBIAN
from grid.grid_errors import InfeasibleMapError
from grid.metrics import read_report_csv
from grid.objective import MonitorPair
from grid.synth import default_fixed_boundary_map
from services.config_service.config_service import RUN_DEFAULTS, ConfigService
from services.experiment_worker.experiment_worker import ExperimentParams, ExperimentWorker
from services.experiment_worker.experiment_worker_constants import (
    COMMAND_ABLATION,
    COMMAND_RECOVER_FIXED,
    SLUG_JACOBIAN_CURL,
    SLUG_ONLY_JACOBIAN,
)
from services.export_service.export_service import ExportService
from services.run_service.run_service import (
    RUN_STATUS_DIVERGED,
    RUN_STATUS_FAILED,
    RUN_STATUS_FINISHED,
    RUN_STATUS_RUNNING,
    RunService,
)


@pytest.fixture
def db_path(tmp_path):
    return str(tmp_path / 'test.json')


@pytest.fixture
def worker(db_path, tmp_path):
    return ExperimentWorker(RunService(db_path), base_out_dir=str(tmp_path / 'runs'))


def small_params(tmp_path, **overrides):
    values = dict(nx=17, ny=17, iters=40, amplitude=0.5, out_dir=str(tmp_path / 'out'))
    values.update(overrides)
    return ExperimentParams(**values)


# ---------------------------------------------------------------- config

def test_config_defaults_and_overrides(db_path):
    config = ConfigService(db_path)
    assert config.get_run_defaults() == RUN_DEFAULTS
    config.set_config('alpha', 2.5)
    config.set_config('nx', '33')
    config.set_config('iters', 'many')
    defaults = config.get_run_defaults()
    assert defaults['alpha'] == 2.5
    assert defaults['nx'] == 33
    assert defaults['iters'] == RUN_DEFAULTS['iters']
    assert config.get_config('iters') == 'many'


def test_config_set_replaces_value(db_path):
    config = ConfigService(db_path)
    config.set_config('out_dir', 'a')
    config.set_config('out_dir', 'b')
    assert config.get_config('out_dir') == 'b'
    assert config.get_config('missing', 'fallback') == 'fallback'


# ---------------------------------------------------------------- run registry

def test_run_registry_lifecycle(db_path):
    runs = RunService(db_path)
    first = runs.create_run(COMMAND_RECOVER_FIXED, {'nx': 17})
    second = runs.create_run(COMMAND_ABLATION, {'nx': 33})
    assert (first['run_id'], second['run_id']) == (1, 2)
    assert first['status'] == RUN_STATUS_RUNNING

    updated = runs.update_run(1, status=RUN_STATUS_FINISHED, stop_reason='max_iters', elapsed=1.5,
                              reports={'Jacobian and Curl': {'ssd': 0.1}})
    assert updated['status'] == RUN_STATUS_FINISHED
    assert updated['reports']['Jacobian and Curl']['ssd'] == 0.1
    assert runs.update_run(99, status=RUN_STATUS_FAILED) is None
    assert [run['run_id'] for run in runs.get_runs_by_command(COMMAND_ABLATION)] == [2]

    assert runs.delete_run(1)
    assert not runs.delete_run(1)
    assert runs.get_run_by_id(1) is None
    assert runs.create_run(COMMAND_RECOVER_FIXED, {})['run_id'] == 3


# ---------------------------------------------------------------- export

def test_write_vtk_is_x_fastest(tmp_path):
    spec = make_uniform_grid(3, 2 + 2, [0, 2, 10, 13])
    exporter = ExportService(str(tmp_path))
    T = identity_map(spec)
    path = exporter.write_vtk(T, point_data={'f0': ScalarField.full(spec, 1.5)})
    lines = path.read_text().splitlines()
    assert lines[0] == '# vtk DataFile Version 3.0'
    assert 'DATASET STRUCTURED_GRID' in lines
    assert 'DIMENSIONS 3 4 1' in lines
    start = lines.index('POINTS 12 double') + 1
    points = [tuple(float(v) for v in line.split()) for line in lines[start:start + 12]]
    assert points[:4] == [(0.0, 10.0, 0.0), (1.0, 10.0, 0.0), (2.0, 10.0, 0.0), (0.0, 11.0, 0.0)]
    assert 'POINT_DATA 12' in lines
    assert 'SCALARS f0 double 1' in lines


def test_write_svg_and_manifest(tmp_path):
    spec = make_uniform_grid(9, 9, [1, 9, 1, 9])
    exporter = ExportService(str(tmp_path / 'nested'))
    T = default_fixed_boundary_map(spec, 0.25)
    svg = exporter.write_svg(T, reference=identity_map(spec), zoom=(2, 4, 2, 4), title='zoomed')
    assert svg.read_text().lstrip().startswith('<?xml') and '<svg' in svg.read_text()
    manifest = exporter.write_manifest({'command': 'generate', 'alpha': 1.0})
    assert manifest.read_text() == 'command=generate\nalpha=1.0\n'


# ---------------------------------------------------------------- experiment worker

def test_recover_writes_artifacts_and_registers_run(worker, tmp_path):
    params = small_params(tmp_path, zoom=[(4.0, 8.0, 4.0, 8.0)])
    outcome = worker.recover(params)
    assert outcome.exit_code == 0
    out = tmp_path / 'out'
    for name in ('report.csv', 'history.csv', 'grid.vtk', 'grid.svg', 'grid_zoom1.svg', 'T_T1.csv', 'T_T2.csv',
                 'target_T1.csv', 'target.vtk', 'manifest.txt'):
        assert (out / name).exists(), name

    case = outcome.cases[0]
    assert case.label == LABEL_JACOBIAN_CURL
    assert read_report_csv(out / 'report.csv') == case.report
    T = read_transformation_csv(out / 'T')
    assert np.array_equal(T.t1, case.result.final_T.t1)

    manifest = (out / 'manifest.txt').read_text()
    assert 'command=recover-fixed' in manifest
    assert 'nx=17' in manifest
    assert 'version.numpy=' in manifest

    run = worker.run_service.get_run_by_id(outcome.run_id)
    assert run['status'] == RUN_STATUS_FINISHED
    assert run['out_dir'] == str(out)
    assert run['reports'][LABEL_JACOBIAN_CURL]['ssd'] == case.report.ssd


def test_recover_without_curl_is_labelled_only_jacobian(worker, tmp_path):
    outcome = worker.recover(small_params(tmp_path, curl=False))
    case = outcome.cases[0]
    assert case.label == LABEL_ONLY_JACOBIAN
    assert case.result.final_report.alpha == 0.0
    # the comparison report always carries the curl term
    assert case.report.ssd > case.report.ssd_J


def test_default_out_dir_uses_run_id(worker, tmp_path):
    outcome = worker.recover(small_params(tmp_path, out_dir=None, iters=3))
    assert outcome.out_dir == tmp_path / 'runs' / f'recover-fixed_{outcome.run_id}'
    assert (outcome.out_dir / 'report.csv').exists()


def test_failed_run_is_marked_failed(worker, tmp_path):
    with pytest.raises(InfeasibleMapError):
        worker.recover(small_params(tmp_path, amplitude=8.0))
    run = worker.run_service.get_all_runs()[-1]
    assert run['status'] == RUN_STATUS_FAILED


def test_overflowing_run_is_marked_diverged(worker, tmp_path):
    outcome = worker.recover(small_params(tmp_path, plain_descent=True, tstep=1e200, iters=5))
    assert outcome.exit_code == 1
    assert outcome.cases[0].result.stop_reason == 'divergence'
    run = worker.run_service.get_run_by_id(outcome.run_id)
    assert run['status'] == RUN_STATUS_DIVERGED
    assert (tmp_path / 'out' / 'grid.vtk').exists()


def test_ablation_writes_one_directory_per_case(worker, tmp_path):
    outcome = worker.ablation(small_params(tmp_path))
    out = tmp_path / 'out'
    assert (out / SLUG_ONLY_JACOBIAN / 'report.csv').exists()
    assert (out / SLUG_JACOBIAN_CURL / 'report.csv').exists()
    summary = (out / 'summary.txt').read_text()
    assert LABEL_ONLY_JACOBIAN in summary and LABEL_JACOBIAN_CURL in summary
    assert [case.label for case in outcome.cases] == [LABEL_ONLY_JACOBIAN, LABEL_JACOBIAN_CURL]


def test_sweep_alpha_runs_every_alpha(worker, tmp_path):
    outcome = worker.sweep_alpha(small_params(tmp_path, iters=10), alphas=[0.5, 2.0])
    assert [case.alpha for case in outcome.cases[1:]] == [0.5, 2.0]
    assert (tmp_path / 'out' / 'alpha_0.5' / 'grid.vtk').exists()
    assert (tmp_path / 'out' / 'alpha_2' / 'history.csv').exists()


def test_generate_writes_jacobian_summary(worker, tmp_path):
    spec = make_uniform_grid(17, 17, [1, 17, 1, 17])
    X, _ = spec.coordinates()
    f0 = ScalarField(spec, 1.0 + 0.2 * np.sin(np.pi * (X - 1) / 16))
    f0 = ScalarField(spec, f0.values / (np.sum(f0.interior) / 15 ** 2))
    outcome = worker.generate(small_params(tmp_path, iters=30), MonitorPair(f0, ScalarField.zeros(spec)))
    out = tmp_path / 'out'
    header = (out / 'report.csv').read_text().splitlines()[0].split(',')
    assert header == ['ssd_J', 'ssd', 'ssd_curl', 'min_jacobian', 'max_jacobian', 'folded_nodes']
    assert 'SCALARS f0 double 1' in (out / 'grid.vtk').read_text()
    assert outcome.extra['folded_nodes'] == 0


def test_gradcheck_passes(worker, tmp_path):
    outcome = worker.gradcheck(small_params(tmp_path, seed=3), probes=20, eps=1e-5)
    assert outcome.exit_code == 0
    assert outcome.extra['passed'] is True
    assert outcome.extra['max_relative_error'] <= 1e-5
    assert len((tmp_path / 'out' / 'gradcheck.csv').read_text().splitlines()) == 21


# ---------------------------------------------------------------- full-size runs

def avg_distances(outcome):
    return {case.label: case.report.avg_distance for case in outcome.cases}


def assert_monotone(outcome):
    for case in outcome.cases:
        ssd = [record.ssd for record in case.result.history]
        assert all(later <= earlier for earlier, later in zip(ssd, ssd[1:])), case.label


@pytest.mark.slow
@pytest.mark.parametrize('moving', [False, True])
def test_curl_term_improves_recovery(worker, tmp_path, moving):
    params = ExperimentParams(nx=65, ny=65, iters=2000, alpha=1.0, out_dir=str(tmp_path / 'out'))
    outcome = worker.ablation(params, moving=moving)
    jacobian_only, with_curl = (case.report for case in outcome.cases)
    assert with_curl.avg_distance <= 0.5 * jacobian_only.avg_distance
    assert with_curl.max_distance < jacobian_only.max_distance
    assert_monotone(outcome)


@pytest.mark.slow
def test_recovery_is_insensitive_to_alpha(worker, tmp_path):
    params = ExperimentParams(nx=65, ny=65, iters=2000, out_dir=str(tmp_path / 'out'))
    outcome = worker.sweep_alpha(params, alphas=[0.1, 1.0, 10.0])
    distances = [case.report.avg_distance for case in outcome.cases[1:]]
    reference = outcome.cases[0].report.avg_distance
    assert all(d <= 0.5 * reference for d in distances)
    assert max(distances) <= 2.0 * min(distances)
    assert_monotone(outcome)
