from flask import Flask, request, jsonify
import logging
import os
from dataclasses import fields

from grid.field import ScalarField, check_same_spec
from grid.field_io import read_field_csv
from grid.grid_constants import DEFAULT_FD_EPS, DEFAULT_GRADCHECK_PROBES
from grid.grid_errors import GridGenError
from grid.objective import MonitorPair
from cli import normalize_monitor
from services.config_service.config_service import DEFAULT_DB_PATH, RUN_DEFAULTS, ConfigService
from services.experiment_worker.experiment_worker import ExperimentParams, ExperimentWorker
from services.experiment_worker.experiment_worker_constants import (
    COMMAND_ABLATION,
    COMMAND_GENERATE,
    COMMAND_GRADCHECK,
    COMMAND_RECOVER_FIXED,
    COMMAND_RECOVER_MOVING,
    COMMAND_SWEEP_ALPHA,
    DEFAULT_SWEEP_ALPHAS,
)
from services.run_service.run_service import RunService

app = Flask(__name__)
logger = logging.getLogger(__name__)

# Initialize services
# Database path from environment variable or default
db_path = os.getenv('GRIDGEN_DB', DEFAULT_DB_PATH)
run_service = RunService(db_path)
config_service = ConfigService(db_path)
experiment_worker = ExperimentWorker(run_service, base_out_dir=config_service.get_run_defaults()['out_dir'])

COMMANDS = (
    COMMAND_RECOVER_FIXED,
    COMMAND_RECOVER_MOVING,
    COMMAND_ABLATION,
    COMMAND_SWEEP_ALPHA,
    COMMAND_GENERATE,
    COMMAND_GRADCHECK,
)
# Request keys that are not ExperimentParams fields
COMMAND_OPTIONS = ('moving', 'alphas', 'probes', 'eps', 'monitors', 'curl_monitor')

# Error messages
ERROR_RUN_NOT_FOUND = 'Run not found'
ERROR_REQUEST_BODY_REQUIRED = 'Request body is required'
ERROR_COMMAND_REQUIRED = 'command is required'
ERROR_UNKNOWN_COMMAND = 'Unknown command'
ERROR_UNKNOWN_PARAMETER = 'Unknown parameter'
ERROR_MONITORS_REQUIRED = 'monitors is required for generate'
ERROR_UNKNOWN_CONFIG_KEY = 'Unknown config key'
ERROR_VALUE_REQUIRED = 'value is required'


def _experiment_params(values: dict) -> ExperimentParams:
    """Stored defaults overridden by the request parameters"""
    defaults = config_service.get_run_defaults()
    moving = values.get('moving', False)
    merged = {key: defaults[key] for key in ('nx', 'ny', 'alpha', 'iters', 'tstep')}
    if not moving:
        merged['amplitude'] = defaults['amplitude']
    param_names = {f.name for f in fields(ExperimentParams)}
    merged.update({key: value for key, value in values.items() if key in param_names})
    merged['zoom'] = [tuple(float(v) for v in window) for window in merged.get('zoom', [])]
    return ExperimentParams(**merged)


def _run_experiment(command: str, values: dict):
    params = _experiment_params(values)
    moving = bool(values.get('moving', False)) or command == COMMAND_RECOVER_MOVING
    if command in (COMMAND_RECOVER_FIXED, COMMAND_RECOVER_MOVING):
        return experiment_worker.recover(params, moving=moving)
    if command == COMMAND_ABLATION:
        return experiment_worker.ablation(params, moving=moving)
    if command == COMMAND_SWEEP_ALPHA:
        alphas = [float(a) for a in values.get('alphas', DEFAULT_SWEEP_ALPHAS)]
        return experiment_worker.sweep_alpha(params, alphas, moving=moving)
    if command == COMMAND_GENERATE:
        f0 = read_field_csv(values['monitors'])
        curl_monitor = values.get('curl_monitor')
        g0 = read_field_csv(curl_monitor) if curl_monitor else ScalarField.zeros(f0.spec)
        check_same_spec(f0.spec, g0.spec)
        params.nx, params.ny = f0.spec.nx, f0.spec.ny
        return experiment_worker.generate(params, MonitorPair(normalize_monitor(f0, f0.spec), g0))
    return experiment_worker.gradcheck(params, int(values.get('probes', DEFAULT_GRADCHECK_PROBES)),
                                       float(values.get('eps', DEFAULT_FD_EPS)))


@app.route('/runs', methods=['POST'])
def create_run():
    """Run an experiment synchronously and return its registry entry"""
    data = request.get_json(silent=True)

    if not data:
        return jsonify({'error': ERROR_REQUEST_BODY_REQUIRED}), 400

    command = data.get('command')
    if not command:
        return jsonify({'error': ERROR_COMMAND_REQUIRED}), 400
    if command not in COMMANDS:
        return jsonify({'error': f'{ERROR_UNKNOWN_COMMAND}: {command}'}), 400

    values = data.get('params') or {}
    param_names = {f.name for f in fields(ExperimentParams)}
    unknown = [key for key in values if key not in param_names and key not in COMMAND_OPTIONS]
    if unknown:
        return jsonify({'error': f'{ERROR_UNKNOWN_PARAMETER}: {", ".join(sorted(unknown))}'}), 400
    if command == COMMAND_GENERATE and not values.get('monitors'):
        return jsonify({'error': ERROR_MONITORS_REQUIRED}), 400

    try:
        outcome = _run_experiment(command, values)
    except (GridGenError, TypeError, ValueError) as e:
        return jsonify({'error': str(e)}), 400
    except Exception as e:
        logger.exception('Experiment failed')
        return jsonify({'error': f'Failed to run experiment: {str(e)}'}), 500

    run = run_service.get_run_by_id(outcome.run_id)
    run['exit_code'] = outcome.exit_code
    run['message'] = outcome.message
    return jsonify(run), 201


@app.route('/runs', methods=['GET'])
def get_all_runs():
    """Get all runs, optionally filtered by ?command="""
    command = request.args.get('command')
    if command:
        return jsonify(run_service.get_runs_by_command(command)), 200
    return jsonify(run_service.get_all_runs()), 200


@app.route('/runs/<int:run_id>', methods=['GET'])
def get_run(run_id):
    """Get a run by ID"""
    run = run_service.get_run_by_id(run_id)
    if not run:
        return jsonify({'error': ERROR_RUN_NOT_FOUND}), 404
    return jsonify(run), 200


@app.route('/runs/<int:run_id>', methods=['DELETE'])
def delete_run(run_id):
    """Delete a run from the registry (artifacts on disk are kept)"""
    deleted = run_service.delete_run(run_id)

    if not deleted:
        return jsonify({'error': ERROR_RUN_NOT_FOUND}), 404

    return jsonify({'message': 'Run deleted successfully'}), 200


@app.route('/config', methods=['GET'])
def get_config():
    """Get the effective run defaults"""
    try:
        return jsonify(config_service.get_run_defaults()), 200
    except Exception as e:
        return jsonify({'error': f'Failed to get configuration: {str(e)}'}), 500


@app.route('/config/<key>', methods=['PUT', 'POST'])
def set_config(key):
    """Store one run default"""
    if key not in RUN_DEFAULTS:
        return jsonify({'error': f'{ERROR_UNKNOWN_CONFIG_KEY}: {key}'}), 400

    data = request.get_json(silent=True)
    if not data or 'value' not in data:
        return jsonify({'error': ERROR_VALUE_REQUIRED}), 400

    config_service.set_config(key, data['value'])
    return jsonify({'key': key, 'value': config_service.get_config(key)}), 200


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO, format='[%(levelname)s] %(message)s')
    app.run(debug=True, host='0.0.0.0', port=5000, use_reloader=False)
