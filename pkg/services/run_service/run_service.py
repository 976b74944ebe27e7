from datetime import datetime, timezone
from tinydb import TinyDB, Query
from typing import Optional, List, Dict, Any

RUN_STATUS_RUNNING = 'running'
RUN_STATUS_FINISHED = 'finished'
RUN_STATUS_DIVERGED = 'diverged'
RUN_STATUS_FAILED = 'failed'


class RunService:
    """Service layer for the experiment run registry"""

    def __init__(self, db_path: str = 'gridgen.json'):
        """Initialize the service with database connection"""
        self.db = TinyDB(db_path)
        self.runs_table = self.db.table('runs')
        self.run_query = Query()

    def _get_next_run_id(self) -> int:
        """Generate the next run ID by finding the maximum existing ID + 1"""
        all_runs = self.runs_table.all()
        if not all_runs:
            return 1
        max_id = max(run.get('run_id', 0) for run in all_runs)
        return max_id + 1

    def create_run(self, command: str, params: Dict[str, Any], out_dir: Optional[str] = None) -> Dict:
        """Register a new run in the running state and return it"""
        run_id = self._get_next_run_id()
        new_run = {
            'run_id': run_id,
            'command': command,
            'params': params,
            'out_dir': out_dir,
            'status': RUN_STATUS_RUNNING,
            'stop_reason': None,
            'elapsed': None,
            'reports': {},
            'result': None,
            'created': datetime.now(timezone.utc).isoformat(),
        }
        self.runs_table.insert(new_run)
        return new_run

    def delete_run(self, run_id: int) -> bool:
        """Delete a run by ID. Returns True if deleted, False if not found"""
        result = self.runs_table.remove(self.run_query.run_id == run_id)
        return len(result) > 0

    def get_run_by_id(self, run_id: int) -> Optional[Dict]:
        """Get a run by its ID. Returns None if not found"""
        result = self.runs_table.search(self.run_query['run_id'] == run_id)
        return result[0] if result else None

    def get_all_runs(self) -> List[Dict]:
        """Get all runs"""
        return self.runs_table.all()

    def get_runs_by_command(self, command: str) -> List[Dict]:
        """Get all runs of one experiment command"""
        return self.runs_table.search(self.run_query.command == command)

    def update_run(self, run_id: int, status: Optional[str] = None, stop_reason: Optional[str] = None,
                   elapsed: Optional[float] = None, reports: Optional[Dict[str, Dict]] = None,
                   out_dir: Optional[str] = None, result: Optional[Dict[str, Any]] = None) -> Optional[Dict]:
        """Update run attributes. Returns the updated run or None if not found"""
        run = self.get_run_by_id(run_id)
        if not run:
            return None

        update_data = {}
        if status is not None:
            update_data['status'] = status
        if stop_reason is not None:
            update_data['stop_reason'] = stop_reason
        if elapsed is not None:
            update_data['elapsed'] = elapsed
        if reports is not None:
            update_data['reports'] = reports
        if out_dir is not None:
            update_data['out_dir'] = out_dir
        if result is not None:
            update_data['result'] = result

        if not update_data:
            return run  # Nothing to change

        self.runs_table.update(update_data, self.run_query['run_id'] == run_id)
        return self.get_run_by_id(run_id)
