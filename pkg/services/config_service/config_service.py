from tinydb import TinyDB, Query
from typing import Any, Dict, Optional

from grid.grid_constants import (
    DEFAULT_ALPHA,
    DEFAULT_FIXED_AMPLITUDE,
    DEFAULT_MAX_ITERS,
    DEFAULT_NX,
    DEFAULT_NY,
    DEFAULT_TSTEP,
)

DEFAULT_DB_PATH = 'gridgen.json'
DEFAULT_OUT_DIR = 'runs'

# Keys understood by get_run_defaults and their built-in values
RUN_DEFAULTS = {
    'nx': DEFAULT_NX,
    'ny': DEFAULT_NY,
    'alpha': DEFAULT_ALPHA,
    'iters': DEFAULT_MAX_ITERS,
    'tstep': DEFAULT_TSTEP,
    'amplitude': DEFAULT_FIXED_AMPLITUDE,
    'out_dir': DEFAULT_OUT_DIR,
}


class ConfigService:
    """Service layer for run configuration stored in the local database"""

    def __init__(self, db_path: str = DEFAULT_DB_PATH):
        """Initialize the service with database connection"""
        self.db = TinyDB(db_path)
        self.config_table = self.db.table('config')
        self.config_query = Query()

    def get_config(self, key: str, default: Optional[str] = None) -> Optional[str]:
        """
        Get a configuration value by key

        Args:
            key: Configuration key
            default: Default value if key doesn't exist

        Returns:
            Configuration value or default
        """
        result = self.config_table.search(self.config_query.key == key)
        if result:
            return result[0].get('value', default)
        return default

    def set_config(self, key: str, value: str) -> bool:
        """
        Set a configuration value

        Args:
            key: Configuration key
            value: Configuration value

        Returns:
            True if successful
        """
        # Replace any existing entry
        self.config_table.remove(self.config_query.key == key)
        self.config_table.insert({'key': key, 'value': str(value)})
        return True

    def get_float(self, key: str, default: float) -> float:
        """Configuration value as float, default when missing or unparsable"""
        value = self.get_config(key)
        try:
            return float(value) if value is not None else default
        except ValueError:
            return default

    def get_int(self, key: str, default: int) -> int:
        """Configuration value as int, default when missing or unparsable"""
        value = self.get_config(key)
        try:
            return int(value) if value is not None else default
        except ValueError:
            return default

    def get_run_defaults(self) -> Dict[str, Any]:
        """
        Defaults for experiment parameters: stored values override the
        built-in ones

        Returns:
            Dictionary with nx, ny, alpha, iters, tstep, amplitude, out_dir
        """
        return {
            'nx': self.get_int('nx', RUN_DEFAULTS['nx']),
            'ny': self.get_int('ny', RUN_DEFAULTS['ny']),
            'alpha': self.get_float('alpha', RUN_DEFAULTS['alpha']),
            'iters': self.get_int('iters', RUN_DEFAULTS['iters']),
            'tstep': self.get_float('tstep', RUN_DEFAULTS['tstep']),
            'amplitude': self.get_float('amplitude', RUN_DEFAULTS['amplitude']),
            'out_dir': self.get_config('out_dir', RUN_DEFAULTS['out_dir']) or RUN_DEFAULTS['out_dir'],
        }
